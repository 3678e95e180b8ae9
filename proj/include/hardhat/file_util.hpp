#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace hardhat {

// Whole-file read; throws IoError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a partially written report. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace hardhat
