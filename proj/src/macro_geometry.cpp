#include "mjpb/macro_geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace mjpb {

long long MacroState::volume() const {
  long long v = 1;
  for (int d = 0; d < dims(); ++d) v *= width(d);
  return v;
}

bool MacroState::contains(const StateVec& x) const {
  for (int d = 0; d < dims(); ++d)
    if (x[d] < lower[d] || x[d] > upper[d]) return false;
  return true;
}

bool MacroState::overlaps(const MacroState& other) const {
  for (int d = 0; d < dims(); ++d)
    if (upper[d] < other.lower[d] || other.upper[d] < lower[d]) return false;
  return true;
}

MacroState make_box(StateVec lower, StateVec upper) {
  if (lower.size() != upper.size())
    throw std::invalid_argument("make_box: corner dimension mismatch");
  for (size_t d = 0; d < lower.size(); ++d)
    if (lower[d] < 0 || lower[d] > upper[d])
      throw std::invalid_argument("make_box: requires 0 <= lower <= upper");
  return MacroState{std::move(lower), std::move(upper)};
}

std::optional<MacroState> transition_set(const MacroState& src, const MacroState& dst,
                                         const StateVec& v) {
  MacroState out;
  const int n = src.dims();
  out.lower.resize(n);
  out.upper.resize(n);
  for (int d = 0; d < n; ++d) {
    const long long lo = std::max(src.lower[d] + v[d], dst.lower[d]) - v[d];
    const long long hi = std::min(src.upper[d] + v[d], dst.upper[d]) - v[d];
    if (lo > hi) return std::nullopt;
    out.lower[d] = lo;
    out.upper[d] = hi;
  }
  return out;
}

std::optional<MacroState> stay_set(const MacroState& s, const StateVec& v) {
  return transition_set(s, s, v);
}

long long exit_count(const MacroState& s, const StateVec& v) {
  const auto stay = stay_set(s, v);
  return s.volume() - (stay ? stay->volume() : 0);
}

std::vector<MacroState> split(const MacroState& s, const std::vector<bool>& unlumped) {
  const int n = s.dims();
  // Per-dimension pieces: one interval if not splittable, two halves otherwise.
  std::vector<std::vector<std::pair<long long, long long>>> pieces(n);
  for (int d = 0; d < n; ++d) {
    if (unlumped[d] || s.width(d) == 1) {
      pieces[d] = {{s.lower[d], s.upper[d]}};
    } else {
      const long long mid = s.lower[d] + (s.width(d) + 1) / 2 - 1;  // ceil(w/2) low piece
      pieces[d] = {{s.lower[d], mid}, {mid + 1, s.upper[d]}};
    }
  }
  std::vector<MacroState> out;
  StateVec lo(n), hi(n);
  std::vector<size_t> idx(n, 0);
  while (true) {
    for (int d = 0; d < n; ++d) {
      lo[d] = pieces[d][idx[d]].first;
      hi[d] = pieces[d][idx[d]].second;
    }
    out.push_back(MacroState{lo, hi});
    int d = n - 1;
    while (d >= 0 && ++idx[d] == pieces[d].size()) idx[d--] = 0;
    if (d < 0) break;
  }
  return out;
}

LumpedSpace::LumpedSpace(std::vector<MacroState> states, std::vector<bool> unlumped)
    : states_(std::move(states)), unlumped_(std::move(unlumped)) {
  if (states_.empty()) throw std::invalid_argument("LumpedSpace: no macro-states");
  const int n = states_[0].dims();
  if (static_cast<int>(unlumped_.size()) != n)
    throw std::invalid_argument("LumpedSpace: unlumped flag count != dimensions");
  for (const auto& s : states_) {
    if (s.dims() != n) throw std::invalid_argument("LumpedSpace: mixed dimensions");
    for (int d = 0; d < n; ++d) {
      if (s.lower[d] < 0 || s.lower[d] > s.upper[d])
        throw std::invalid_argument("LumpedSpace: invalid box corners");
      if (unlumped_[d] && s.width(d) != 1)
        throw std::invalid_argument("LumpedSpace: width > 1 in unlumped dimension");
    }
  }
  build_index();
  for (int i = 0; i < size(); ++i)
    for (int j : overlapping(states_[i]))
      if (j != i) throw std::invalid_argument("LumpedSpace: macro-states overlap");
  reset_candidate_visits();
}

long long LumpedSpace::micro_count() const {
  long long total = 0;
  for (const auto& s : states_) total += s.volume();
  return total;
}

bool LumpedSpace::all_volume_one() const {
  return std::all_of(states_.begin(), states_.end(),
                     [](const MacroState& s) { return s.volume() == 1; });
}

uint64_t LumpedSpace::cell_key(const StateVec& cell) const {
  uint64_t h = 1469598103934665603ull;
  for (long long c : cell) {
    h ^= static_cast<uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void LumpedSpace::build_index() {
  const int n = states_[0].dims();
  cell_width_.assign(n, 1);
  for (const auto& s : states_)
    for (int d = 0; d < n; ++d) cell_width_[d] = std::max(cell_width_[d], s.width(d));

  StateVec cell(n), lo(n), hi(n);
  for (int i = 0; i < size(); ++i) {
    const auto& s = states_[i];
    for (int d = 0; d < n; ++d) {
      lo[d] = s.lower[d] / cell_width_[d];
      hi[d] = s.upper[d] / cell_width_[d];
      cell[d] = lo[d];
    }
    while (true) {
      cells_[cell_key(cell)].push_back(i);
      int d = n - 1;
      while (d >= 0 && ++cell[d] > hi[d]) cell[d--] = lo[d];
      if (d < 0) break;
    }
  }
}

std::vector<int> LumpedSpace::overlapping(const MacroState& query) const {
  const int n = static_cast<int>(cell_width_.size());
  StateVec cell(n), lo(n), hi(n);
  for (int d = 0; d < n; ++d) {
    // Query corners may be negative after a shift; floor-divide toward -inf.
    auto fdiv = [](long long a, long long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    lo[d] = fdiv(query.lower[d], cell_width_[d]);
    hi[d] = fdiv(query.upper[d], cell_width_[d]);
    cell[d] = lo[d];
  }
  std::vector<int> hits;
  while (true) {
    auto it = cells_.find(cell_key(cell));
    if (it != cells_.end()) {
      for (int i : it->second) {
        visit_counter_->fetch_add(1, std::memory_order_relaxed);
        if (states_[i].overlaps(query)) hits.push_back(i);
      }
    }
    int d = n - 1;
    while (d >= 0 && ++cell[d] > hi[d]) cell[d--] = lo[d];
    if (d < 0) break;
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  return hits;
}

int LumpedSpace::find(const StateVec& x) const {
  for (int i : overlapping(MacroState{x, x}))
    if (states_[i].contains(x)) return i;
  return -1;
}

LumpedSpace initial_grid(const StateVec& bounds, int m, const std::vector<bool>& unlumped) {
  const int n = static_cast<int>(bounds.size());
  if (m < 0) throw std::invalid_argument("initial_grid: m must be >= 0");
  if (static_cast<int>(unlumped.size()) != n)
    throw std::invalid_argument("initial_grid: unlumped flag count != dimensions");
  for (int d = 0; d < n; ++d)
    if (bounds[d] < 0) throw std::invalid_argument("initial_grid: negative bounds");

  std::vector<std::vector<std::pair<long long, long long>>> tiles(n);
  for (int d = 0; d < n; ++d) {
    const long long side = unlumped[d] ? 1 : (1ll << m);
    for (long long lo = 0; lo <= bounds[d]; lo += side)
      tiles[d].push_back({lo, std::min(lo + side - 1, bounds[d])});
  }
  std::vector<MacroState> boxes;
  StateVec lo(n), hi(n);
  std::vector<size_t> idx(n, 0);
  while (true) {
    for (int d = 0; d < n; ++d) {
      lo[d] = tiles[d][idx[d]].first;
      hi[d] = tiles[d][idx[d]].second;
    }
    boxes.push_back(MacroState{lo, hi});
    int d = n - 1;
    while (d >= 0 && ++idx[d] == tiles[d].size()) idx[d--] = 0;
    if (d < 0) break;
  }
  return LumpedSpace(std::move(boxes), unlumped);
}

}  // namespace mjpb
