/* Copyright 2026 The ulkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ULKIT_COMMON_H_
#define ULKIT_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ulkit {

using TokenId = std::int32_t;

// Ordered token ids over a Vocab. Every id is non-negative and below the
// vocabulary size it was produced for.
using TokenSequence = std::vector<TokenId>;

inline constexpr std::string_view kVersion = "0.3.1";

// Malformed or semantically invalid input data (exit code 3 in the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or unwritable files (exit code 4 in the CLI).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values surface as std::invalid_argument.

}  // namespace ulkit

#endif  // ULKIT_COMMON_H_
