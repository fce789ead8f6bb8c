#include "storyreel/fs_util.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include <unistd.h>

#include "storyreel/errors.hpp"

namespace storyreel {

namespace {

std::mutex g_hook_mutex;
CrashHook g_crash_hook;
std::atomic<unsigned long> g_temp_counter{0};

}  // namespace

void set_atomic_write_crash_hook(CrashHook hook) {
  std::lock_guard lock(g_hook_mutex);
  g_crash_hook = std::move(hook);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(g_temp_counter++);
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw Error(Errc::Io, "cannot create " + tmp.string());
    bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
    ok = (std::fflush(f) == 0) && ok;
    ok = (::fsync(::fileno(f)) == 0) && ok;
    ok = (std::fclose(f) == 0) && ok;
    if (!ok) {
      fs::remove(tmp);
      throw Error(Errc::Io, "short write to " + tmp.string());
    }
  }
  CrashHook hook;
  {
    std::lock_guard lock(g_hook_mutex);
    hook = g_crash_hook;
  }
  // a throwing hook leaves the temp file behind, like a real crash would
  if (hook) hook(path);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(Errc::Io, "rename to " + path.string() + " failed: " + ec.message());
  }
}

void write_json(const fs::path& path, const json& value) { atomic_write(path, value.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseFailed, "malformed JSON in " + path.string());
  return j;
}

}  // namespace storyreel
