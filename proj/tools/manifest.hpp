/*
 * Copyright 2026 The hte Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef HTE_TOOLS_MANIFEST_HPP_
#define HTE_TOOLS_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hte::cli {

// Lowercase hex SHA-256 of a byte string or of a file's contents.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);

// Sidecar name for an output file: "<path>.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& output);

}  // namespace hte::cli

#endif  // HTE_TOOLS_MANIFEST_HPP_
