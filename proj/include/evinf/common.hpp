#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace evinf {

// Malformed or inconsistent input data. CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values, degenerate statistics, failed numeric checks. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Seeded RNG with explicit sampling code so that streams are identical across
// platforms (std::normal_distribution and friends are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform index in [0, n); modulo bias is negligible for our n
  size_t index(size_t n) { return n == 0 ? 0 : size_t(eng_() % n); }

  // standard normal via Box-Muller
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  // derive an independent stream, e.g. per epoch or per run
  Rng fork(uint64_t salt) {
    return Rng(eng_() ^ (salt * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull));
  }

 private:
  std::mt19937_64 eng_;
};

// FNV-1a, used for vocab hashes and run-manifest artifact hashes.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

// string literals must go through (ptr, len) or std::string explicitly
template <size_t N>
uint64_t fnv1a(const char (&)[N], uint64_t) = delete;

}  // namespace evinf
