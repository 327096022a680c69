#pragma once

#include <openssl/evp.h>

#include <string>
#include <string_view>

#include "sarfa/errors.hpp"

namespace sarfa::base64 {

inline std::string encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

/// Strict standard-alphabet decoding with padding. Throws InputError.
inline std::string decode(std::string_view text) {
  if (text.size() % 4 != 0) throw InputError("base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::string out(text.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw InputError("invalid base64 payload");
  // EVP_DecodeBlock counts padding bytes as zeros.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace sarfa::base64
