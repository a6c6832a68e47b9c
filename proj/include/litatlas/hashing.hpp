#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace litatlas {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
/// SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace litatlas
