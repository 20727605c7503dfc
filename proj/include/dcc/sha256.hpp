#pragma once

#include <string>
#include <string_view>

namespace dcc {

// Lowercase hex SHA-256 digest, used for prompt hashes in run manifests.
std::string sha256_hex(std::string_view data);

}  // namespace dcc
