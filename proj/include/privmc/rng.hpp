#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace privmc {

// FNV-1a. Tags go through this instead of std::hash so that stream
// derivation does not depend on the standard library build.
constexpr std::uint64_t hash_tag(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Identifies one noise/initialization stream. Every random draw in the
// library is owned by exactly one (master, algo, iteration, purpose) tuple,
// so any component can be replayed in isolation: reconstructing the same
// stream on the same build yields the same sample sequence bit for bit.
struct RngStream {
  std::uint64_t master = 0;
  std::string_view algo{};      // e.g. "fw", "oja", "svd", "pgd"
  std::uint64_t iteration = 0;  // outer iteration the draw belongs to
  std::string_view purpose{};   // e.g. "cov-noise", "eig-init"

  RngStream with(std::string_view algo_tag, std::uint64_t iter,
                 std::string_view purpose_tag) const {
    return RngStream{master, algo_tag, iter, purpose_tag};
  }

  // Derives a child master seed, for nesting one algorithm inside another
  // (the oja backend inside the Frank-Wolfe loop, per-cell seeds in sweeps).
  static std::uint64_t derive_master(std::uint64_t master, std::string_view tag,
                                     std::uint64_t index) {
    return splitmix64(splitmix64(master ^ hash_tag(tag)) ^ index);
  }

  std::mt19937_64 engine() const {
    const std::uint64_t a = hash_tag(algo);
    const std::uint64_t p = hash_tag(purpose);
    std::seed_seq seq{
        static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
        static_cast<std::uint32_t>(a),      static_cast<std::uint32_t>(a >> 32),
        static_cast<std::uint32_t>(iteration),
        static_cast<std::uint32_t>(iteration >> 32),
        static_cast<std::uint32_t>(p),      static_cast<std::uint32_t>(p >> 32)};
    return std::mt19937_64(seq);
  }
};

// Fills out with iid N(0, sigma^2) draws. Allocation-free; the caller owns
// the buffer and the engine (streaming consumers keep both across steps).
inline void gaussian_fill(std::span<double> out, double sigma, std::mt19937_64& eng) {
  if (sigma == 0.0) {
    for (double& x : out) x = 0.0;
    return;
  }
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& x : out) x = dist(eng);
}

inline std::vector<double> gaussian_vector(std::size_t len, double sigma,
                                           const RngStream& stream) {
  std::vector<double> out(len);
  auto eng = stream.engine();
  gaussian_fill(out, sigma, eng);
  return out;
}

// Symmetric noise for covariance releases: iid N(0, sigma^2) on the upper
// triangle (diagonal included, row-major draw order), mirrored below, so the
// result is symmetric to bit precision.
inline Eigen::MatrixXd symmetric_noise_matrix(Eigen::Index n, double sigma,
                                              const RngStream& stream) {
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(n, n);
  if (sigma == 0.0) return noise;
  auto eng = stream.engine();
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double g = dist(eng);
      noise(i, j) = g;
      noise(j, i) = g;
    }
  return noise;
}

}  // namespace privmc
