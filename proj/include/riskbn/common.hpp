// Copyright 2026 The riskbn Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskbn {

// Error categories surfaced by the library.  All of them derive from
// std::runtime_error so callers can catch broadly or by class.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Graph or table shape violations (cycles, missing ids, bad arity...).
class structural_error : public error {
 public:
  explicit structural_error(const std::string& msg) : error(msg) {}
};

// Expression text that does not parse.
class parse_error : public error {
 public:
  parse_error(const std::string& msg, std::size_t pos)
      : error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

// Invalid numeric state: bad distribution parameters, all-zero factors,
// inconsistent evidence.
class numeric_error : public error {
 public:
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

// Model/cache file problems.
class io_error : public error {
 public:
  explicit io_error(const std::string& msg) : error(msg) {}
};

// A model that cannot be brought into the supported dense/factorized form.
class unsupported_conversion_error : public error {
 public:
  explicit unsupported_conversion_error(const std::string& msg) : error(msg) {}
};

namespace detail {

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

// Mass floor applied before negative powers and divisions so that factor
// tables stay finite.
inline constexpr double kMassFloor = 1e-300;

inline bool nearly_equal(double a, double b, double tol = 1e-12) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

// FNV-1a, used for cache fingerprints of model files and settings.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 1469598103934665603ull) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace riskbn
