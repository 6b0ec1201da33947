#pragma once

#include <string>
#include <string_view>

namespace agentloop {

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

// Throws Error on invalid input.
std::string base64_decode(std::string_view text);

}  // namespace agentloop
