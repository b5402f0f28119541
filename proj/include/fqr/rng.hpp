#pragma once

// Counter-based random streams.
//
// Every draw in the sampler is addressed by (master_seed, chain_id, site_key,
// iteration). The first two form the Philox key, the last two the high words
// of the counter. Because a stream is a pure function of its address, sites
// can be updated in any order or on any thread and still produce the same
// variates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace fqr {

/// Philox4x64-10 block cipher (Salmon et al., 2011). Matches numpy's
/// `Philox` bit generator block function.
class Philox4x64 {
 public:
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

  /// Two consecutive blocks with their rounds interleaved; same output as two
  /// calls to block() but roughly twice the throughput.
  static std::array<Counter, 2> block_pair(Counter c0, Counter c1, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      c0 = single_round(c0, key);
      c1 = single_round(c1, key);
    }
    return {c0, c1};
  }

 private:
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  static Counter single_round(const Counter& c, const Key& k) {
    const auto p0 = static_cast<unsigned __int128>(kMul0) * c[0];
    const auto p1 = static_cast<unsigned __int128>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const auto lo0 = static_cast<std::uint64_t>(p0);
    const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const auto lo1 = static_cast<std::uint64_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Site namespaces for keyed streams. The tag occupies the top byte of the
/// site key so indices from different update steps never collide.
enum class Site : std::uint8_t {
  kSigma = 1,
  kXi = 2,
  kCoefficients = 3,
  kLocalScale = 4,
  kGlobalScale = 5,
  kHyperScale = 6,
  kSimulation = 16,
  kTruthOracle = 17,
  kTest = 255,
};

constexpr std::uint64_t site_key(Site tag, std::uint64_t index) {
  return (static_cast<std::uint64_t>(tag) << 56) | (index & 0x00FFFFFFFFFFFFFFULL);
}

/// A reproducible stream addressed by (master_seed, chain_id, site_key,
/// iteration). Satisfies UniformRandomBitGenerator, so it can drive the
/// standard `<random>` distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t chain_id, std::uint64_t site,
            std::uint64_t iteration)
      : key_{master_seed, chain_id}, site_(site), iteration_(iteration) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == kBuffered) refill();
    return buffer_[pos_++];
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by Marsaglia's polar method; the second variate is kept
  /// for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double r2 = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      r2 = u * u + v * v;
    } while (r2 >= 1.0 || r2 == 0.0);
    const double f = std::sqrt(-2.0 * std::log(r2) / r2);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  void refill() {
    const auto pair = Philox4x64::block_pair({block_, site_, iteration_, 0},
                                             {block_ + 1, site_, iteration_, 0}, key_);
    std::copy(pair[0].begin(), pair[0].end(), buffer_.begin());
    std::copy(pair[1].begin(), pair[1].end(), buffer_.begin() + 4);
    block_ += 2;
    pos_ = 0;
  }

  Philox4x64::Key key_;
  std::uint64_t site_;
  std::uint64_t iteration_;
  std::uint64_t block_ = 0;
  static constexpr int kBuffered = 8;
  std::array<std::uint64_t, kBuffered> buffer_{};
  int pos_ = kBuffered;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fqr
