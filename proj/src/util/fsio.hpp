#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace agentloop {

std::string read_file(const std::filesystem::path& path);

// Write-temp-then-rename so partially written files are never observed.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

// Non-empty lines of a JSONL-style file.
std::vector<std::string> read_lines(const std::filesystem::path& path);

void ensure_directory(const std::filesystem::path& dir);

}  // namespace agentloop
