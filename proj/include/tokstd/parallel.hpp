// Copyright 2026 The tokstd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

namespace tokstd {

/// Selects between the serial reference kernels and their OpenMP versions.
/// Both produce bit-identical results; the serial path exists as a test
/// oracle and benchmark baseline.
enum class Exec { kSerial, kParallel };

/// Worker-thread count used by the OpenMP kernels (default 1).
void SetThreads(int threads);
int Threads();

}  // namespace tokstd
