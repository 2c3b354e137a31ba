#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace k2q {

/// Whole-file read. Throws io errors.
std::string read_text_file(const std::filesystem::path& path);

/// Replaces the file contents. Throws io errors.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace k2q
