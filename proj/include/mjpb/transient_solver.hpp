#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mjpb/generator.hpp"

namespace mjpb {

struct SolverOptions {
  double rtol = 1e-6;
  double atol = 1e-12;
  enum class Method { Bdf, Rk45 };
  Method method = Method::Bdf;
};

struct SolverStats {
  long long steps = 0;
  long long rejected = 0;
  long long matvecs = 0;
  long long factorizations = 0;
};

// Solution vectors on the time grid; values[k] is the state vector (macro
// rows + sink) at times[k].  Entries are raw integrator output: tiny negative
// values are possible and are clamped only at readout by consumers.
struct TimeGridSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> values;
  SolverStats stats;

  const std::vector<double>& at(int k) const { return values[k]; }
  double sink_mass(int k) const { return values[k].back(); }
};

struct SolverFailure : std::runtime_error {
  double time;
  SolverFailure(const std::string& what, double t) : std::runtime_error(what), time(t) {}
};

// K equispaced points on [0, T].
std::vector<double> time_grid(double horizon, int k_points);

// Integrate d/dt pi = pi Q from pi(0) = init, reporting pi at all grid times.
TimeGridSolution solve_forward(const SparseGenerator& gen, const std::vector<double>& init,
                               const std::vector<double>& grid, const SolverOptions& opts = {});

// Integrate d/dt beta = Q beta backwards from beta(T) = terminal, reporting
// beta at all grid times (ascending t, like solve_forward).
TimeGridSolution solve_backward(const SparseGenerator& gen, const std::vector<double>& terminal,
                                const std::vector<double>& grid, const SolverOptions& opts = {});

}  // namespace mjpb
