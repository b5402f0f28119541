#pragma once

// Binary persistence of posterior draws.
//
// Layout (all little-endian):
//   char[4]  magic "FQRD"
//   u32      version
//   u64      G, p, T
//   f64      tau
//   u64      run-manifest hash
//   f64[G*p*T]  B draws in (g, a, l) order
//   f64[G*T]    sigma draws in (g, l) order

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fqr/dataset.hpp"
#include "fqr/error.hpp"
#include "fqr/gibbs.hpp"

namespace fqr {

inline constexpr std::array<char, 4> kDrawsMagic{'F', 'Q', 'R', 'D'};
inline constexpr std::uint32_t kDrawsVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw DataError(path + ": truncated draws file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_draws(const std::string& path, const PosteriorDraws& d, std::uint64_t manifest_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(kDrawsMagic.data(), 4);
  detail::write_le<std::uint32_t>(out, kDrawsVersion);
  detail::write_le<std::uint64_t>(out, d.n_draws);
  detail::write_le<std::uint64_t>(out, d.n_covariates);
  detail::write_le<std::uint64_t>(out, d.grid_len);
  detail::write_le<double>(out, d.tau);
  detail::write_le<std::uint64_t>(out, manifest_hash);
  for (double v : d.b) detail::write_le<double>(out, v);
  for (double v : d.sigma) detail::write_le<double>(out, v);
  if (!out) throw DataError("failed writing " + path);
}

struct LoadedDraws {
  PosteriorDraws draws;
  std::uint64_t manifest_hash = 0;
};

inline LoadedDraws read_draws(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kDrawsMagic) throw DataError(path + ": not an FQRD draws file");
  const auto version = detail::read_le<std::uint32_t>(in, path);
  if (version != kDrawsVersion) throw DataError(path + ": unsupported draws version " + std::to_string(version));
  const auto g = detail::read_le<std::uint64_t>(in, path);
  const auto p = detail::read_le<std::uint64_t>(in, path);
  const auto t = detail::read_le<std::uint64_t>(in, path);
  LoadedDraws out;
  const double tau = detail::read_le<double>(in, path);
  out.manifest_hash = detail::read_le<std::uint64_t>(in, path);
  if (g > (1ULL << 40) / std::max<std::uint64_t>(p * t, 1)) throw DataError(path + ": implausible dimensions");
  out.draws.resize(g, p, t);
  out.draws.tau = tau;
  for (auto& v : out.draws.b) v = detail::read_le<double>(in, path);
  for (auto& v : out.draws.sigma) v = detail::read_le<double>(in, path);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path + ": trailing bytes after draws");
  return out;
}

/// CSV mirror of the binary file: one row per (draw, series) where series
/// 0..p-1 are the coefficient functions and series p is sigma.
inline void write_draws_csv(const std::string& path, const PosteriorDraws& d, const std::string& header_comment = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "# tau=" << format_real(d.tau) << " draws=" << d.n_draws << " covariates=" << d.n_covariates
      << " grid_len=" << d.grid_len << "; columns: draw,series,value_1..value_T\n";
  for (std::size_t g = 0; g < d.n_draws; ++g) {
    for (std::size_t a = 0; a <= d.n_covariates; ++a) {
      out << g << ',' << a;
      for (std::size_t l = 0; l < d.grid_len; ++l) {
        out << ',' << format_real(a < d.n_covariates ? d.b_at(g, a, l) : d.sigma[g * d.grid_len + l]);
      }
      out << '\n';
    }
  }
}

}  // namespace fqr
