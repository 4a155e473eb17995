#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace refswap {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string file_sha256(const std::filesystem::path& path);

}  // namespace refswap
