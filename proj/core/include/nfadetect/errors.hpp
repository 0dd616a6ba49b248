#pragma once

#include <stdexcept>
#include <string>

namespace nfadetect {

/// Missing, unreadable or truncated file; failed write.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally invalid content: bad magic, unsupported encoding, wrong version.
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

/// Metric requested on data that cannot define it (e.g. single-class labels).
class undefined_metric : public std::runtime_error {
 public:
  explicit undefined_metric(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nfadetect
