#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace storyreel {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_file(const fs::path& path);

// Writes to a sibling temp file, flushes, then renames over `path`. Readers see
// either the old or the new content, never a partial file.
void atomic_write(const fs::path& path, std::string_view bytes);

void write_json(const fs::path& path, const json& value);
json read_json(const fs::path& path);

// Test hook invoked between the temp write and the rename of every
// atomic_write. A hook that throws simulates a crash at that point.
using CrashHook = std::function<void(const fs::path& target)>;
void set_atomic_write_crash_hook(CrashHook hook);

}  // namespace storyreel
