#include "mjpb/reaction_model.hpp"

#include <set>
#include <stdexcept>

namespace mjpb {

PropensitySpec PropensitySpec::mass_action(double c, const StateVec& loss) {
  if (!(c > 0))
    throw std::invalid_argument("mass_action: rate constant must be positive");
  PropensitySpec s;
  s.kind = Kind::MassAction;
  s.prefactor = c;
  s.min_state = loss;
  s.factors.resize(loss.size());
  for (size_t l = 0; l < loss.size(); ++l) {
    if (loss[l] > 0)
      s.factors[l] = {PropensityFactor::Kind::Binomial, static_cast<int>(loss[l]), 0.0};
  }
  return s;
}

PropensitySpec PropensitySpec::hill(double rho, int species_index, const StateVec& loss) {
  if (!(rho > 0))
    throw std::invalid_argument("hill: numerator must be positive");
  if (species_index < 0 || species_index >= static_cast<int>(loss.size()))
    throw std::invalid_argument("hill: denominator species index out of range");
  PropensitySpec s;
  s.kind = Kind::Hill;
  s.prefactor = rho;
  s.min_state = loss;
  s.factors.resize(loss.size());
  s.factors[species_index] = {PropensityFactor::Kind::Reciprocal, 0, 1.0};
  return s;
}

PropensitySpec PropensitySpec::custom(double prefactor, std::vector<PropensityFactor> factors,
                                      const StateVec& loss) {
  if (!(prefactor > 0))
    throw std::invalid_argument("custom: prefactor must be positive");
  if (factors.size() != loss.size())
    throw std::invalid_argument("custom: factor list length must equal species count");
  PropensitySpec s;
  s.kind = Kind::Custom;
  s.prefactor = prefactor;
  s.factors = std::move(factors);
  s.min_state = loss;
  return s;
}

Reaction Reaction::make(std::string name, StateVec loss, StateVec gain, PropensitySpec spec) {
  if (loss.size() != gain.size())
    throw std::invalid_argument("reaction " + name + ": loss/gain dimension mismatch");
  bool any = false;
  for (size_t l = 0; l < loss.size(); ++l) {
    if (loss[l] < 0 || gain[l] < 0)
      throw std::invalid_argument("reaction " + name + ": negative stoichiometry");
    any = any || loss[l] != 0 || gain[l] != 0;
  }
  if (!any)
    throw std::invalid_argument("reaction " + name + ": both sides empty");
  Reaction r;
  r.name = std::move(name);
  r.change.resize(loss.size());
  for (size_t l = 0; l < loss.size(); ++l) r.change[l] = gain[l] - loss[l];
  r.loss = std::move(loss);
  r.gain = std::move(gain);
  r.propensity = std::move(spec);
  return r;
}

int ReactionNetwork::species_index(const std::string& name) const {
  for (const auto& s : species)
    if (s.name == name) return s.index;
  return -1;
}

void ReactionNetwork::validate() const {
  std::set<std::string> names;
  for (int i = 0; i < n_species(); ++i) {
    if (species[i].index != i)
      throw std::invalid_argument("species indices must be contiguous 0..n_S-1");
    if (!names.insert(species[i].name).second)
      throw std::invalid_argument("duplicate species name: " + species[i].name);
  }
  const size_t n = species.size();
  for (const auto& r : reactions) {
    if (r.loss.size() != n || r.gain.size() != n || r.change.size() != n ||
        r.propensity.factors.size() != n || r.propensity.min_state.size() != n)
      throw std::invalid_argument("reaction " + r.name + ": vector length != n_S");
    for (size_t l = 0; l < n; ++l) {
      if (r.change[l] != r.gain[l] - r.loss[l])
        throw std::invalid_argument("reaction " + r.name + ": change != gain - loss");
      if (r.propensity.min_state[l] != r.loss[l])
        throw std::invalid_argument("reaction " + r.name + ": propensity not bound to loss vector");
      if (r.propensity.kind == PropensitySpec::Kind::MassAction && r.loss[l] > 0 &&
          (r.propensity.factors[l].kind != PropensityFactor::Kind::Binomial ||
           r.propensity.factors[l].order != r.loss[l]))
        throw std::invalid_argument("reaction " + r.name + ": mass-action factors inconsistent");
    }
  }
}

double binomial(long long n, int k) {
  if (k < 0 || n < k) return 0.0;
  // Multiply/divide in lock step; every prefix is an integer binomial,
  // so the double stays exact until it exceeds 2^53.
  double result = 1.0;
  for (int i = 0; i < k; ++i) {
    result *= static_cast<double>(n - i);
    result /= static_cast<double>(i + 1);
  }
  return result;
}

double evaluate_propensity(const PropensitySpec& spec, const StateVec& state) {
  if (state.size() != spec.factors.size())
    throw std::invalid_argument("evaluate_propensity: state dimension mismatch");
  for (size_t l = 0; l < state.size(); ++l) {
    if (state[l] < 0)
      throw std::domain_error("evaluate_propensity: negative state component");
    if (state[l] < spec.min_state[l]) return 0.0;
  }
  double value = spec.prefactor;
  for (size_t l = 0; l < state.size(); ++l) {
    const auto& f = spec.factors[l];
    switch (f.kind) {
      case PropensityFactor::Kind::One:
        break;
      case PropensityFactor::Kind::Binomial:
        value *= binomial(state[l], f.order);
        break;
      case PropensityFactor::Kind::Reciprocal:
        // Multiply by the reciprocal so this rounds bit-identically to the
        // volume-1 lumped rate.
        value *= 1.0 / (f.offset + static_cast<double>(state[l]));
        break;
    }
  }
  return value;
}

StateVec stoichiometric_change(const Reaction& r) { return r.change; }

}  // namespace mjpb
