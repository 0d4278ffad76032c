#pragma once

// Peak picking and the multi-pair consistency search.
//
// Microphones are indexed from 0; microphone 0 is the reference. A TdoaSet
// stores the N-1 independent delays d_0i (i = 1..N-1), where d_ij is the lag
// at which the (i, j) cross-correlation peaks. Every other pair follows as
// d_ij = d_0j - d_0i.

#include <cstddef>
#include <optional>
#include <vector>

#include "tdoaloc/spectral.hpp"

namespace tdoaloc {

inline constexpr std::size_t kDefaultMaxPeaks = 8;
inline constexpr int kDefaultMinSeparation = 2;
inline constexpr int kDefaultTolerance = 1;

struct Peak {
  int lag = 0;
  double value = 0.0;
};

struct PeakList {
  std::size_t i = 0;
  std::size_t j = 0;
  std::vector<Peak> peaks;  // value non-increasing

  bool has_lag_near(int lag, int tol) const;
};

// Up to `max_peaks` local maxima of `corr`, strongest first. A candidate is
// dropped when it lies closer than `min_separation` lags to a stronger peak
// already taken. Throws InputError when max_peaks == 0.
PeakList extract_peaks(const CrossCorrelation& corr, std::size_t max_peaks,
                       int min_separation = kDefaultMinSeparation);

// Peak lists for every unordered microphone pair (i < j).
class PeakTable {
 public:
  explicit PeakTable(std::size_t mic_count);

  std::size_t mic_count() const { return mics_; }
  const PeakList& at(std::size_t i, std::size_t j) const;
  PeakList& at(std::size_t i, std::size_t j);
  void set(PeakList list);

 private:
  std::size_t index(std::size_t i, std::size_t j) const;

  std::size_t mics_;
  std::vector<PeakList> lists_;
};

struct TdoaSet {
  std::vector<int> delays;  // d_01 .. d_0(N-1), samples
  double score = 0.0;       // sum of the selected peak values
  std::size_t frame_index = 0;

  std::size_t mic_count() const { return delays.size() + 1; }
};

// d_ij = d_0j - d_0i for 0 <= i < j < N. Throws InputError otherwise.
int dependent_delay(const TdoaSet& set, std::size_t i, std::size_t j);

// True when every pair (i, j), 1 <= i < j, has an extracted peak within
// `tol` lags of d_ij.
bool satisfies_constraints(const TdoaSet& set, const PeakTable& table, int tol);

// Among all combinations of one peak from each reference pair (0, i), finds
// the highest-scoring one that satisfies every dependent-pair constraint.
// Branch-and-bound over the peaks in descending order; the result is the same
// as full enumeration, including the choice among equal scores (the first in
// lexicographic peak-index order wins). Returns nullopt when no combination
// is consistent.
std::optional<TdoaSet> consistency_search(const PeakTable& table, int tol = kDefaultTolerance);

}  // namespace tdoaloc
