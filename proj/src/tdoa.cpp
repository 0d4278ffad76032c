#include "tdoaloc/tdoa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "tdoaloc/error.hpp"

namespace tdoaloc {

bool PeakList::has_lag_near(int lag, int tol) const {
  return std::any_of(peaks.begin(), peaks.end(), [&](const Peak& p) { return std::abs(p.lag - lag) <= tol; });
}

PeakList extract_peaks(const CrossCorrelation& corr, std::size_t max_peaks, int min_separation) {
  if (max_peaks == 0) throw InputError("extract_peaks: M must be positive");
  const auto& v = corr.values;
  const std::size_t n = v.size();

  // Strictly above the left neighbour, at least the right one; a window edge
  // must strictly exceed its single neighbour.
  std::vector<Peak> candidates;
  for (std::size_t k = 0; k < n; ++k) {
    const bool left_ok = k == 0 || v[k] > v[k - 1];
    const bool right_ok = k + 1 == n || (k == 0 ? v[k] > v[k + 1] : v[k] >= v[k + 1]);
    if (left_ok && right_ok) candidates.push_back({corr.lag_of(k), v[k]});
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.value > b.value; });

  PeakList out;
  out.i = corr.pair.first;
  out.j = corr.pair.second;
  for (const auto& c : candidates) {
    if (out.peaks.size() == max_peaks) break;
    const bool crowded = std::any_of(out.peaks.begin(), out.peaks.end(),
                                     [&](const Peak& p) { return std::abs(p.lag - c.lag) < min_separation; });
    if (!crowded) out.peaks.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------

PeakTable::PeakTable(std::size_t mic_count) : mics_(mic_count), lists_(mic_count * (mic_count - 1) / 2) {
  if (mic_count < 2) throw InputError("PeakTable: need >= 2 microphones");
  for (std::size_t i = 0; i < mics_; ++i)
    for (std::size_t j = i + 1; j < mics_; ++j) {
      auto& l = lists_[index(i, j)];
      l.i = i;
      l.j = j;
    }
}

std::size_t PeakTable::index(std::size_t i, std::size_t j) const {
  if (!(i < j && j < mics_))
    throw InputError("PeakTable: bad pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  // Row-major upper triangle.
  return i * (2 * mics_ - i - 1) / 2 + (j - i - 1);
}

const PeakList& PeakTable::at(std::size_t i, std::size_t j) const { return lists_[index(i, j)]; }
PeakList& PeakTable::at(std::size_t i, std::size_t j) { return lists_[index(i, j)]; }

void PeakTable::set(PeakList list) {
  const std::size_t idx = index(list.i, list.j);
  lists_[idx] = std::move(list);
}

// ---------------------------------------------------------------------------

int dependent_delay(const TdoaSet& set, std::size_t i, std::size_t j) {
  const std::size_t n = set.mic_count();
  if (!(i < j && j < n))
    throw InputError("dependent_delay: need 0 <= i < j < " + std::to_string(n) + ", got (" + std::to_string(i) +
                     ", " + std::to_string(j) + ")");
  const int d0j = set.delays[j - 1];
  const int d0i = i == 0 ? 0 : set.delays[i - 1];
  return d0j - d0i;
}

bool satisfies_constraints(const TdoaSet& set, const PeakTable& table, int tol) {
  if (set.mic_count() != table.mic_count()) return false;
  for (std::size_t i = 0; i < table.mic_count(); ++i)
    for (std::size_t j = i + 1; j < table.mic_count(); ++j)
      if (!table.at(i, j).has_lag_near(dependent_delay(set, i, j), tol)) return false;
  return true;
}

namespace {

class Search {
 public:
  Search(const PeakTable& table, int tol) : table_(table), tol_(tol), mics_(table.mic_count()) {
    const std::size_t levels = mics_ - 1;
    delays_.assign(levels, 0);
    suffix_bound_.assign(levels + 1, 0.0);
    for (std::size_t l = levels; l-- > 0;) suffix_bound_[l] = suffix_bound_[l + 1] + list(l).peaks.front().value;
  }

  std::optional<TdoaSet> run() {
    descend(0, 0.0);
    return best_;
  }

 private:
  const PeakList& list(std::size_t level) const { return table_.at(0, level + 1); }

  bool consistent(std::size_t level, int delay) const {
    // Pairs (i, level+1) for every earlier mic i >= 1.
    for (std::size_t prev = 0; prev < level; ++prev)
      if (!table_.at(prev + 1, level + 1).has_lag_near(delay - delays_[prev], tol_)) return false;
    return true;
  }

  bool hopeless(double bound) const {
    if (!best_) return false;
    const double slack = 1e-9 * (std::abs(best_->score) + std::abs(bound) + 1.0);
    return bound < best_->score - slack;
  }

  void descend(std::size_t level, double partial) {
    if (level == delays_.size()) {
      if (!best_ || partial > best_->score) best_ = TdoaSet{delays_, partial, 0};
      return;
    }
    for (const Peak& p : list(level).peaks) {
      // Peaks are sorted, so once the bound fails it fails for the rest.
      if (hopeless(partial + p.value + suffix_bound_[level + 1])) break;
      if (!consistent(level, p.lag)) continue;
      delays_[level] = p.lag;
      descend(level + 1, partial + p.value);
    }
  }

  const PeakTable& table_;
  int tol_;
  std::size_t mics_;
  std::vector<int> delays_;
  std::vector<double> suffix_bound_;
  std::optional<TdoaSet> best_;
};

}  // namespace

std::optional<TdoaSet> consistency_search(const PeakTable& table, int tol) {
  if (tol < 0) throw InputError("consistency_search: negative tolerance");
  for (std::size_t i = 1; i < table.mic_count(); ++i) {
    const auto& l = table.at(0, i);
    if (l.peaks.empty()) return std::nullopt;
    if (!std::is_sorted(l.peaks.begin(), l.peaks.end(), [](const Peak& a, const Peak& b) { return a.value > b.value; }))
      throw InputError("consistency_search: peak lists must be sorted by value");
  }
  return Search(table, tol).run();
}

}  // namespace tdoaloc
