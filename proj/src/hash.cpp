#include "gistkit/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "gistkit/errors.hpp"

namespace gistkit {

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
    throw Error(ErrorCode::kIo, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0F]);
  }
  return out;
}

std::string sequence_fingerprint(const std::vector<std::string>& ids) {
  // Length-prefixed so ["ab","c"] and ["a","bc"] differ.
  std::string buffer;
  for (const auto& id : ids) {
    buffer += std::to_string(id.size());
    buffer += ':';
    buffer += id;
    buffer += ';';
  }
  return sha256_hex(buffer);
}

}  // namespace gistkit
