#pragma once

#include <array>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include <openssl/evp.h>

namespace treereader {

/// Lowercase hex SHA-256 of `data`.
inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0x0F]);
    }
    return out;
}

/// Digest of several fields. Each field is length-prefixed so that field
/// boundaries cannot be forged by concatenation.
inline std::string sha256_fields(std::initializer_list<std::string_view> fields) {
    std::string buffer;
    for (auto f : fields) {
        buffer += std::to_string(f.size());
        buffer.push_back(':');
        buffer.append(f);
    }
    return sha256_hex(buffer);
}

} // namespace treereader
