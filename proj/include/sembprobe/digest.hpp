#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sembprobe {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace sembprobe
