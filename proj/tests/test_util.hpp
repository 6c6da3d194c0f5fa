#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/seed.hpp"

namespace nnkgc::testing {

inline ad::Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return ad::Tensor(rows, cols, std::move(v), requires_grad);
}

// Values bounded away from zero, for ops with a kink at the origin.
inline ad::Tensor away_from_zero(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  ad::Tensor t = random_tensor(rows, cols, seed, true, 0.2, 1.0);
  Rng rng(seed ^ 0x5555);
  std::bernoulli_distribution flip(0.5);
  for (double& x : t.mutable_values())
    if (flip(rng)) x = -x;
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

// a→b, b→c, ... over entities named n0..n{k-1}, all in train.
inline kg::KnowledgeGraph chain_graph(std::size_t k) {
  kg::KnowledgeGraphBuilder b;
  for (std::size_t i = 0; i < k; ++i)
    b.add_entity("n" + std::to_string(i), "node " + std::to_string(i), "");
  const auto r = b.add_relation("next");
  for (std::size_t i = 0; i + 1 < k; ++i)
    b.add_triple(kg::Split::train, static_cast<kg::EntityId>(i), r, static_cast<kg::EntityId>(i + 1));
  return std::move(b).build();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("nnkgc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace nnkgc::testing
