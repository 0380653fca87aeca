# Copyright 2026 The hte Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Heterogeneous treatment effect analysis for randomized experiments."""
from ._hte import (
    Dataset,
    HteError,
    __version__,
    detect,
    fdr,
    ite,
    kurtosis_test,
    set_threads,
    simulate,
    surface,
    threads,
)

__all__ = [
    "Dataset",
    "HteError",
    "__version__",
    "detect",
    "fdr",
    "ite",
    "kurtosis_test",
    "set_threads",
    "simulate",
    "surface",
    "threads",
]
