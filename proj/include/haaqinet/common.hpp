#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace haaqi {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Library-level error. CLI maps these to nonzero exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

// ---------------------------------------------------------------------------
// Deterministic RNG helpers.
//
// std::mt19937_64 output is fully specified by the standard, but the
// std::*_distribution adaptors are not. Everything random in this library
// goes through the helpers below so that a master seed reproduces identical
// corpora, weights, and audio bit-for-bit across platforms.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable 64-bit hash of a string (FNV-1a), for deriving per-item seeds.
inline std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
  return splitmix64(master ^ hash_str(tag));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double uniform() {
    return double(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at our scales.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + int(below(std::uint64_t(hi - lo + 1)));
  }

  // Standard normal via Box-Muller (explicit formula keeps it portable).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Waveform
// ---------------------------------------------------------------------------

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration() const { return double(samples.size()) / sample_rate; }
};

inline double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / double(x.size()));
}

inline double rms(const Waveform& w) { return rms(w.samples); }

inline double db(double ratio) { return 20.0 * std::log10(ratio); }
inline double from_db(double d) { return std::pow(10.0, d / 20.0); }

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace haaqi
