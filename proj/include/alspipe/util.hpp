#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace alspipe {

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::byte> read_binary_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename, so readers never observe a torn file.
void atomic_write_file(const std::filesystem::path& path, const void* data, std::size_t size);
void atomic_write_file(const std::filesystem::path& path, const std::string& text);
void atomic_write_file(const std::filesystem::path& path, const std::vector<std::byte>& bytes);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Exceptions from
// workers are rethrown (first one wins) after all threads join.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

std::string format_double(double v, int decimals);

}  // namespace alspipe
