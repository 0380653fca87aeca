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
#include "hte/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace hte {
namespace {

int threads_from_env() noexcept {
  const char* env = std::getenv("HTE_THREADS");
  if (env == nullptr) return 1;
  try {
    const int n = std::stoi(env);
    return n > 0 ? n : 1;
  } catch (...) {
    return 1;
  }
}

std::atomic<int>& thread_setting() noexcept {
  static std::atomic<int> setting{threads_from_env()};
  return setting;
}

}  // namespace

int thread_count() noexcept { return thread_setting().load(); }

void set_thread_count(int threads) noexcept {
  thread_setting().store(threads > 0 ? threads : 1);
}

}  // namespace hte
