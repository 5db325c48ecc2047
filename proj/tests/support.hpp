#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace shiftup::testing {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(SHIFTUP_FIXTURE_DIR); }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    for (;;) {
      path_ = fs::temp_directory_path() / ("shiftup-test-" + std::to_string(rd()));
      if (fs::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    fs::permissions(path_, fs::perms::owner_all, fs::perm_options::add, ec);
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// A scratch copy of the snack-bar fixture.
class FixtureCopy : public TempDir {
 public:
  FixtureCopy() : root_(path() / "snackbar") { fs::copy(fixture_dir(), root_, fs::copy_options::recursive); }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
};

inline std::string fixed_clock() { return "2025-01-01T00:00:00.000Z"; }

}  // namespace shiftup::testing
