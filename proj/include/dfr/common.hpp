#pragma once

#include <stdexcept>
#include <string>

namespace dfr {

enum class ErrorKind {
  Validation,  // bad user input, malformed files, precondition violations
  Shape,       // mismatched dimensions or grids
  Numeric,     // non-finite values, failed factorizations, degenerate data
  Bandwidth,   // query point out of kernel reach
};

/// Library-wide exception. `stage` names the pipeline stage that failed and
/// `field` the offending input, so the CLI can emit its machine-parseable
/// ERROR:<stage>:<field> prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, std::string field, const std::string& message)
      : std::runtime_error("ERROR:" + stage + ":" + field + ": " + message),
        kind_(kind),
        stage_(std::move(stage)),
        field_(std::move(field)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& stage() const { return stage_; }
  const std::string& field() const { return field_; }

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string field_;
};

}  // namespace dfr
