#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mjpb/reaction_model.hpp"

namespace mjpb {

// Axis-aligned integer hyperrectangle [lower, upper], both corners inclusive.
struct MacroState {
  StateVec lower;
  StateVec upper;

  int dims() const { return static_cast<int>(lower.size()); }
  long long width(int d) const { return upper[d] - lower[d] + 1; }
  long long volume() const;
  bool contains(const StateVec& x) const;
  bool overlaps(const MacroState& other) const;

  bool operator==(const MacroState&) const = default;
};

// Throws std::invalid_argument unless 0 <= lower <= upper elementwise.
MacroState make_box(StateVec lower, StateVec upper);

// ((src + v) ∩ dst) - v: the sub-box of src whose members jump into dst
// under change vector v.  Empty intersections yield nullopt.
std::optional<MacroState> transition_set(const MacroState& src, const MacroState& dst,
                                         const StateVec& v);

// transition_set(s, s, v): micro-states whose v-successor stays inside s.
std::optional<MacroState> stay_set(const MacroState& s, const StateVec& v);

// |s| - |stay_set(s, v)|: number of micro-states that leave s under v.  The
// exit set itself need not be a box and is never materialized; lumped exit
// rates are computed by the complement identity in lumped_rates.
long long exit_count(const MacroState& s, const StateVec& v);

// Halve the box in every lumped dimension of width > 1 (ceil/floor split for
// odd widths).  Children partition the parent; ordered lexicographically.
std::vector<MacroState> split(const MacroState& s, const std::vector<bool>& unlumped);

// Disjoint collection of macro-states plus an implicit absorbing sink.
// Supplies overlap queries for generator assembly via a uniform-cell spatial
// hash (cell size = max box width per dimension).
class LumpedSpace {
 public:
  LumpedSpace() = default;
  // Checks pairwise disjointness and width-1 in unlumped dims; throws on violation.
  LumpedSpace(std::vector<MacroState> states, std::vector<bool> unlumped);

  const std::vector<MacroState>& states() const { return states_; }
  const MacroState& state(int i) const { return states_[i]; }
  const std::vector<bool>& unlumped() const { return unlumped_; }
  int size() const { return static_cast<int>(states_.size()); }
  long long micro_count() const;
  bool all_volume_one() const;

  // Indices of member boxes overlapping the query box, ascending.
  std::vector<int> overlapping(const MacroState& query) const;
  // Index of the box containing micro-state x, or -1.
  int find(const StateVec& x) const;

  // Instrumentation: candidate boxes inspected by overlap queries since
  // construction (used to assert linear-time generator assembly).
  long long candidate_visits() const { return visit_counter_->load(); }
  void reset_candidate_visits() const { visit_counter_->store(0); }

 private:
  std::vector<MacroState> states_;
  std::vector<bool> unlumped_;
  StateVec cell_width_;
  std::unordered_map<uint64_t, std::vector<int>> cells_;
  std::shared_ptr<std::atomic<long long>> visit_counter_ =
      std::make_shared<std::atomic<long long>>(0);

  uint64_t cell_key(const StateVec& cell) const;
  void build_index();
};

// Tile the region prod_l [0, bounds_l] with boxes of side 2^m in lumped
// dimensions (side 1 in unlumped ones); the last tile of a dimension may be
// narrower when bounds_l + 1 is not a multiple of 2^m.
LumpedSpace initial_grid(const StateVec& bounds, int m, const std::vector<bool>& unlumped);

}  // namespace mjpb
