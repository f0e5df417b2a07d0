#ifndef APDFRANK_ERROR_H_
#define APDFRANK_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace apdfrank {

// Error categories double as CLI exit codes.
enum class ErrorCategory : int {
  kValidation = 2,
  kIo = 3,
  kDegenerate = 4,
};

std::string_view CategoryName(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCategory::kValidation, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorCategory::kIo, message) {}
};

// Input is well-formed but the math is undefined on it (e.g. log of a zero
// reward weight).
class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& message)
      : Error(ErrorCategory::kDegenerate, message) {}
};

}  // namespace apdfrank

#endif  // APDFRANK_ERROR_H_
