// Copyright 2026 The Preictal Authors.
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

#ifndef PREICTAL_ERROR_HPP_
#define PREICTAL_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace preictal {

// Every error raised by the library derives from Error. The category maps
// onto the CLI exit code (2 config, 3 data, 4 training).
enum class ErrorCategory { kConfig, kData, kTraining };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, const std::string& what)
      : std::runtime_error(what), category_(category), code_(std::move(code)) {}

  ErrorCategory category() const { return category_; }
  // Short machine-readable tag, e.g. "format" or "missing-channel".
  const std::string& code() const { return code_; }

 private:
  ErrorCategory category_;
  std::string code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, "config", what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what)
      : Error(ErrorCategory::kConfig, "precondition", what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorCategory::kData, "shape", what) {}
};

class InputLengthError : public Error {
 public:
  explicit InputLengthError(const std::string& what)
      : Error(ErrorCategory::kData, "input-length", what) {}
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t byte_offset)
      : Error(ErrorCategory::kData, "format",
              what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what)
      : Error(ErrorCategory::kData, "integrity", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error(ErrorCategory::kData, "io", what) {}
};

class MissingChannelError : public Error {
 public:
  explicit MissingChannelError(std::vector<std::string> missing)
      : Error(ErrorCategory::kData, "missing-channel",
              "missing channels: " + join(missing)),
        missing_(std::move(missing)) {}
  // Custom message, e.g. one clause per offending file.
  MissingChannelError(std::vector<std::string> missing, const std::string& what)
      : Error(ErrorCategory::kData, "missing-channel", what), missing_(std::move(missing)) {}

  const std::vector<std::string>& missing() const { return missing_; }

 private:
  static std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
      if (!out.empty()) out += ", ";
      out += n;
    }
    return out;
  }
  std::vector<std::string> missing_;
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what)
      : Error(ErrorCategory::kData, "split", what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what)
      : Error(ErrorCategory::kTraining, "training", what) {}
};

}  // namespace preictal

#endif  // PREICTAL_ERROR_HPP_
