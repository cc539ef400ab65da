// biglearn/errors.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef BIGLEARN_ERRORS_HPP_
#define BIGLEARN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace biglearn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

// A covariance that should have been SPD failed to factorize; signals a
// conditioning bug upstream (missing eigenvalue floor).
struct FactorizationFailure : Error {
  using Error::Error;
};

struct DegenerateWeights : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct EmptyFile : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace biglearn

#endif  // BIGLEARN_ERRORS_HPP_
