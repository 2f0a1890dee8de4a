#include "mjpb/lumped_rates.hpp"

#include <cmath>
#include <stdexcept>

namespace mjpb {

double binomial_range_sum(long long a, long long b, int k) {
  if (k < 0) throw std::invalid_argument("binomial_range_sum: negative order");
  if (a < 0 || a > b + 1) throw std::invalid_argument("binomial_range_sum: requires 0 <= a <= b+1");
  if (a == b + 1) return 0.0;
  return binomial(b + 1, k + 1) - binomial(a, k + 1);
}

namespace {

// Widths up to this use the exact micro-sum for non-polynomial factors; the
// integral approximation is reserved for boxes where summation would defeat
// the closed-form speedup.
constexpr long long kExactSumWidth = 8;

double reciprocal_range_sum(double offset, long long a, long long b) {
  if (b - a + 1 <= kExactSumWidth) {
    double s = 0.0;
    for (long long x = a; x <= b; ++x) s += 1.0 / (offset + static_cast<double>(x));
    return s;
  }
  // Integral of 1/(offset + x) over [a - 0.5, b + 0.5].
  return std::log(offset + static_cast<double>(b) + 0.5) -
         std::log(offset + static_cast<double>(a) - 0.5);
}

}  // namespace

double lumped_rate(const PropensitySpec& spec, const MacroState& box) {
  double value = spec.prefactor;
  for (int d = 0; d < box.dims(); ++d) {
    // alpha vanishes below the loss vector, so the effective range starts at
    // min_state.  (Redundant for binomial factors, which are 0 there anyway,
    // but required for reciprocal/constant factors on consuming reactions.)
    const long long a = std::max(box.lower[d], spec.min_state[d]);
    const long long b = box.upper[d];
    if (a > b) return 0.0;
    const auto& f = spec.factors[d];
    switch (f.kind) {
      case PropensityFactor::Kind::One:
        value *= static_cast<double>(b - a + 1);
        break;
      case PropensityFactor::Kind::Binomial:
        value *= binomial_range_sum(a, b, f.order);
        break;
      case PropensityFactor::Kind::Reciprocal:
        value *= reciprocal_range_sum(f.offset, a, b);
        break;
    }
  }
  return value;
}

double exit_rate(const PropensitySpec& spec, const MacroState& box, const StateVec& v) {
  const auto stay = stay_set(box, v);
  const double total = lumped_rate(spec, box);
  const double staying = stay ? lumped_rate(spec, *stay) : 0.0;
  const double out = total - staying;
  return out > 0.0 ? out : 0.0;
}

}  // namespace mjpb
