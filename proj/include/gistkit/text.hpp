#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gistkit {

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view separator);
std::vector<std::string> split_lines(std::string_view text);

/// "[a, b, c]" rendering used for list-valued prompt fields.
std::string bracket_list(const std::vector<std::string>& items);

/// Lowercases ASCII and splits on runs of characters that are not ASCII
/// alphanumerics. Bytes >= 0x80 count as word characters so UTF-8 words stay
/// whole. With `stem` set, each token is reduced by the Porter stemmer.
std::vector<std::string> tokenize(std::string_view text, bool stem = false);

/// Number of Unicode code points in a UTF-8 string (invalid bytes count as one).
std::size_t utf8_length(std::string_view text);

/// Porter (1980) suffix-stripping stemmer over lowercase ASCII words. Words
/// with non-ASCII bytes or of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace gistkit
