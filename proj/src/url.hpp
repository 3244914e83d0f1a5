#pragma once

#include <string>

namespace gistkit::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash; may be empty
};

/// Splits an http(s) URL; throws ContractViolation for anything else.
SplitUrl split_url(const std::string& url);

}  // namespace gistkit::detail
