#pragma once

#include "mjpb/macro_geometry.hpp"
#include "mjpb/reaction_model.hpp"

namespace mjpb {

// Sum_{x=a}^{b} C(x, k) = C(b+1, k+1) - C(a, k+1)  (hockey-stick identity).
// Requires 0 <= a <= b+1; an empty range (a == b+1) gives 0.
double binomial_range_sum(long long a, long long b, int k);

// Sum of alpha(x) over all micro-states of the box.  Exact closed form for
// mass-action factors; reciprocal factors use the continuous-integral
// approximation with +-0.5 bounds for ranges wider than 8 and the exact
// micro-sum otherwise.  An empty box contributes 0.
double lumped_rate(const PropensitySpec& spec, const MacroState& box);

// lumped_rate(spec, box) - lumped_rate(spec, stay_set(box, v)): total rate at
// which reaction mass leaves the box under change vector v.  Exact for
// separable specs; clamped at 0 against roundoff.
double exit_rate(const PropensitySpec& spec, const MacroState& box, const StateVec& v);

}  // namespace mjpb
