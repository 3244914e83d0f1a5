#include "fs_util.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "gistkit/errors.hpp"

namespace gistkit::detail {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  static std::atomic<unsigned long> counter{0};
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create " + target.parent_path().string() + ": " + ec.message());
  }
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  fs::path temp = target;
  temp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + temp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + temp.string());
  }
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp);
    throw IoError("cannot rename onto " + path + ": " + ec.message());
  }
}

}  // namespace gistkit::detail
