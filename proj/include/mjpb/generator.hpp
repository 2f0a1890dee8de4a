#pragma once

#include <iosfwd>
#include <vector>

#include "mjpb/lumped_rates.hpp"
#include "mjpb/macro_geometry.hpp"
#include "mjpb/reaction_model.hpp"

namespace mjpb {

// Lumped rate matrix over a LumpedSpace.  Rows 0..n-2 are macro-states in
// space order; the last row is the absorbing sink that receives all rate mass
// leaving the truncation.  Row sums are 0 up to roundoff; the sink row is
// identically 0.
struct SparseGenerator {
  int dimension = 0;  // macro-states + 1
  // Per-row entries sorted by column; includes the diagonal.
  std::vector<std::vector<std::pair<int, double>>> rows;

  int sink_row() const { return dimension - 1; }
  double entry(int r, int c) const;
  double max_row_sum_magnitude() const;
};

// Q[i,k] = sum_j lumped_rate(alpha_j, transition_set(x_i, x_k, v_j)) / vol(x_i)
// for retained neighbors k, diagonal -sum_j exit_rate_j / vol(x_i), and the
// gap between total exit rate and retained outflow routed to the sink.
// Neighbor discovery uses the space's spatial index, never all pairs.
SparseGenerator assemble(const LumpedSpace& space, const ReactionNetwork& network,
                         int n_threads = 1);

// Zero all outgoing rates (including diagonal and sink column) of the given
// rows, making them absorbing; used for first-passage queries.
SparseGenerator make_absorbing(SparseGenerator gen, const std::vector<int>& goal_rows);

// Debug dump: one "row col rate" line per entry.
void dump_coordinate_list(const SparseGenerator& gen, std::ostream& os);

}  // namespace mjpb
