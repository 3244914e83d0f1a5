#include "url.hpp"

#include <regex>

#include "gistkit/errors.hpp"

namespace gistkit::detail {

SplitUrl split_url(const std::string& url) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch match;
  if (!std::regex_match(url, match, pattern)) {
    throw ContractViolation("not an http(s) URL: " + url);
  }
  SplitUrl out{match[1].str(), match[2].str()};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace gistkit::detail
