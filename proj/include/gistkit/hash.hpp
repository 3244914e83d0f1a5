#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gistkit {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Hash of an ordered id sequence; distinct sequences give distinct digests.
std::string sequence_fingerprint(const std::vector<std::string>& ids);

}  // namespace gistkit
