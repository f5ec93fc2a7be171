#pragma once

#include <cstdint>
#include <string>

namespace pairforge {

// SHA-256 of a byte string, hex-encoded. Used for input hashes in run
// manifests; checked against FIPS 180-2 test vectors in the unit tests.
std::string sha256_hex(const std::string& bytes);

// Convenience: hash a file's contents. Throws SchemaError if unreadable.
std::string sha256_file_hex(const std::string& path);

}  // namespace pairforge
