/*
 * Copyright 2026 The LC-DPF Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LC_ERRORS_HPP_
#define LC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace lc {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TooFewPoints : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPerfectSquare : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotConnected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when every particle has zero likelihood (all log-weights are -inf).
class FilterDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lc

#endif  // LC_ERRORS_HPP_
