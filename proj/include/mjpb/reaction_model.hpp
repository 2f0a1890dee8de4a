#pragma once

#include <map>
#include <string>
#include <vector>

namespace mjpb {

// Micro-state: copy number per species.
using StateVec = std::vector<long long>;

struct Species {
  std::string name;
  int index = 0;  // 0-based dimension index
};

// One per-dimension factor of a separable propensity function.
struct PropensityFactor {
  enum class Kind { One, Binomial, Reciprocal };
  Kind kind = Kind::One;
  int order = 0;        // Binomial: C(x, order)
  double offset = 1.0;  // Reciprocal: 1 / (offset + x)

  bool operator==(const PropensityFactor&) const = default;
};

// Separable propensity: alpha(x) = prefactor * prod_l f_l(x_l), and
// alpha(x) = 0 whenever x_l < min_state_l for some l (no reactant
// combinations below the loss vector).
struct PropensitySpec {
  enum class Kind { MassAction, Hill, Custom };
  Kind kind = Kind::MassAction;
  double prefactor = 0.0;  // rate constant c, Hill numerator rho, or leading constant
  std::vector<PropensityFactor> factors;  // length n_S
  StateVec min_state;                     // = loss vector of the owning reaction

  static PropensitySpec mass_action(double c, const StateVec& loss);
  static PropensitySpec hill(double rho, int species_index, const StateVec& loss);
  static PropensitySpec custom(double prefactor, std::vector<PropensityFactor> factors,
                               const StateVec& loss);

  bool operator==(const PropensitySpec&) const = default;
};

struct Reaction {
  std::string name;
  StateVec loss;    // v-
  StateVec gain;    // v+
  StateVec change;  // v = v+ - v-
  PropensitySpec propensity;

  static Reaction make(std::string name, StateVec loss, StateVec gain, PropensitySpec spec);
};

struct ReactionNetwork {
  std::vector<Species> species;
  std::vector<Reaction> reactions;
  std::map<std::string, double> parameters;

  int n_species() const { return static_cast<int>(species.size()); }
  int n_reactions() const { return static_cast<int>(reactions.size()); }
  int species_index(const std::string& name) const;  // -1 if unknown

  // Throws std::invalid_argument on inconsistent dimensions, duplicate
  // species names, or factor lists that do not match the loss vectors.
  void validate() const;
};

// C(n, k) evaluated in double; exact while intermediate values stay below 2^53.
double binomial(long long n, int k);

// alpha_j(x).  Throws std::domain_error on negative state components.
double evaluate_propensity(const PropensitySpec& spec, const StateVec& state);

// v = v+ - v-.
StateVec stoichiometric_change(const Reaction& r);

}  // namespace mjpb
