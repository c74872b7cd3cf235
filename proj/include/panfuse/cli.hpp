// Copyright 2026 The panfuse Authors.
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

#ifndef PANFUSE_CLI_HPP_
#define PANFUSE_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace panfuse {

enum ExitStatus : int {
  kExitOk = 0,
  kExitValidation = 1,  // contract or validation failure
  kExitIo = 2,          // I/O or schema failure
  kExitDivergence = 3,  // training diverged
};

// Entry point of the `panfuse` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace panfuse

#endif  // PANFUSE_CLI_HPP_
