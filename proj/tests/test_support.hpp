#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mtmerlin/rng.hpp"
#include "mtmerlin/stack.hpp"

namespace testing {

inline mtmerlin::ComplexPlane random_plane(int H, int W, std::uint64_t seed) {
  mtmerlin::RngHandle g(seed);
  mtmerlin::ComplexPlane p(H, W);
  for (auto& v : p.data) v = {g.normal(), g.normal()};
  return p;
}

inline mtmerlin::RealImage random_image(int H, int W, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  mtmerlin::RngHandle g(seed);
  mtmerlin::RealImage img(H, W);
  for (auto& v : img.data) v = lo + (hi - lo) * g.uniform();
  return img;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mtmerlin_" + tag + "_" + std::to_string(std::hash<std::string>{}(tag) ^ static_cast<std::size_t>(::getpid())));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
