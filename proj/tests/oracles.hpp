#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "tdoaloc/tdoa.hpp"

namespace oracle {

using Complex = std::complex<double>;

// Direct O(N^2) DFT, bins 0..N/2.
inline std::vector<Complex> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    Complex acc{};
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce the phase index first so the angle stays small and exact.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * std::polar(1.0, angle);
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

// y[n] = x[(n - d) mod N]
inline std::vector<double> rotate_delay(const std::vector<double>& x, long d) {
  const long n = static_cast<long>(x.size());
  std::vector<double> y(x.size());
  for (long i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>((((i - d) % n) + n) % n)];
  return y;
}

// Moving-average low-pass, circular.
inline std::vector<double> lowpass(const std::vector<double>& x, int taps) {
  const long n = static_cast<long>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i)
    for (int t = 0; t < taps; ++t) y[static_cast<std::size_t>(i)] += x[static_cast<std::size_t>(((i - t) % n + n) % n)];
  return y;
}

// Number of contiguous samples around the maximum that are >= half of it.
inline int half_height_width(const std::vector<double>& v) {
  const auto peak = std::max_element(v.begin(), v.end());
  const double half = *peak / 2.0;
  auto lo = peak;
  while (lo != v.begin() && *(lo - 1) >= half) --lo;
  auto hi = peak;
  while (hi + 1 != v.end() && *(hi + 1) >= half) ++hi;
  return static_cast<int>(hi - lo) + 1;
}

// Every combination of one peak per reference pair, in lexicographic index
// order; the first strictly best consistent combination wins.
inline std::optional<tdoaloc::TdoaSet> exhaustive_search(const tdoaloc::PeakTable& table, int tol) {
  const std::size_t levels = table.mic_count() - 1;
  std::vector<std::size_t> sizes(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    sizes[l] = table.at(0, l + 1).peaks.size();
    if (sizes[l] == 0) return std::nullopt;
  }
  std::optional<tdoaloc::TdoaSet> best;
  std::vector<std::size_t> idx(levels, 0);
  while (true) {
    tdoaloc::TdoaSet set;
    double score = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
      const auto& p = table.at(0, l + 1).peaks[idx[l]];
      set.delays.push_back(p.lag);
      score += p.value;
    }
    set.score = score;
    bool ok = true;
    for (std::size_t i = 1; i < table.mic_count() && ok; ++i)
      for (std::size_t j = i + 1; j < table.mic_count() && ok; ++j) {
        const int dij = set.delays[j - 1] - set.delays[i - 1];
        const auto& peaks = table.at(i, j).peaks;
        ok = std::any_of(peaks.begin(), peaks.end(), [&](const tdoaloc::Peak& p) { return std::abs(p.lag - dij) <= tol; });
      }
    if (ok && (!best || score > best->score)) best = set;

    std::size_t l = levels;
    while (l > 0) {
      --l;
      if (++idx[l] < sizes[l]) break;
      idx[l] = 0;
      if (l == 0) return best;
    }
    if (levels == 0) return best;
  }
}

}  // namespace oracle
