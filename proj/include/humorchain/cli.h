// Copyright 2026 The HumorChain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HUMORCHAIN_CLI_H_
#define HUMORCHAIN_CLI_H_

#include <string>

#include "humorchain/types.h"

namespace humorchain {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;  // some images or fits failed
inline constexpr int kExitConfig = 2;   // bad flags, config or inputs

// Entry point of the humorchain tool. Subcommands: generate, eval-pairwise,
// eval-single, discriminator-report, serve.
int RunCli(int argc, char** argv);

// Loads a tool configuration file, resolving relative paths against its
// directory. Throws Error(kConfig).
Json LoadToolConfig(const std::string& path);

}  // namespace humorchain

#endif  // HUMORCHAIN_CLI_H_
