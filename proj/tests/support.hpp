#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Shared helpers for the test binaries: scratch directories under the build
// tree and small file utilities.

namespace testutil {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(UNWRAP_TEST_DATA_DIR); }

// Fresh per-name scratch directory; wiped on construction so reruns are clean.
class TempDir {
  public:
    explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / "unwrap_tests" / name) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace testutil
