#include "mjpb/generator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace mjpb {

double SparseGenerator::entry(int r, int c) const {
  for (const auto& [col, v] : rows[r])
    if (col == c) return v;
  return 0.0;
}

double SparseGenerator::max_row_sum_magnitude() const {
  double worst = 0.0;
  for (const auto& row : rows) {
    double s = 0.0;
    for (const auto& [c, v] : row) s += v;
    worst = std::max(worst, std::fabs(s));
  }
  return worst;
}

namespace {

void assemble_row(const LumpedSpace& space, const ReactionNetwork& network, int i,
                  std::vector<std::pair<int, double>>& row, int sink) {
  const MacroState& src = space.state(i);
  const double inv_vol = 1.0 / static_cast<double>(src.volume());
  double diagonal = 0.0;
  double sink_rate = 0.0;
  row.clear();

  for (const auto& reaction : network.reactions) {
    const auto& v = reaction.change;
    const double exit = exit_rate(reaction.propensity, src, v);
    diagonal -= exit * inv_vol;
    if (exit == 0.0) continue;

    MacroState shifted{src.lower, src.upper};
    for (int d = 0; d < src.dims(); ++d) {
      shifted.lower[d] += v[d];
      shifted.upper[d] += v[d];
    }
    double retained = 0.0;
    for (int k : space.overlapping(shifted)) {
      if (k == i) continue;
      const auto ts = transition_set(src, space.state(k), v);
      if (!ts) continue;
      const double rate = lumped_rate(reaction.propensity, *ts);
      if (rate <= 0.0) continue;
      retained += rate;
      row.emplace_back(k, rate * inv_vol);
    }
    const double lost = exit - retained;
    if (lost > 0.0) sink_rate += lost * inv_vol;
  }

  row.emplace_back(i, diagonal);
  if (sink_rate > 0.0) row.emplace_back(sink, sink_rate);
  std::stable_sort(row.begin(), row.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  // Merge duplicate columns (several reactions can feed the same neighbor);
  // stable order keeps per-reaction accumulation in reaction index order.
  size_t w = 0;
  for (size_t r = 0; r < row.size(); ++r) {
    if (w > 0 && row[w - 1].first == row[r].first)
      row[w - 1].second += row[r].second;
    else
      row[w++] = row[r];
  }
  row.resize(w);
}

}  // namespace

SparseGenerator assemble(const LumpedSpace& space, const ReactionNetwork& network,
                         int n_threads) {
  SparseGenerator gen;
  gen.dimension = space.size() + 1;
  gen.rows.resize(gen.dimension);
  const int sink = gen.sink_row();

  if (n_threads <= 1 || space.size() < 256) {
    for (int i = 0; i < space.size(); ++i)
      assemble_row(space, network, i, gen.rows[i], sink);
  } else {
    // Rows are independent; each thread fills a disjoint stripe, so the
    // result is identical to the serial one.
    const int nt = std::min<int>(n_threads, space.size());
    std::vector<std::thread> workers;
    for (int t = 0; t < nt; ++t) {
      workers.emplace_back([&, t]() {
        for (int i = t; i < space.size(); i += nt)
          assemble_row(space, network, i, gen.rows[i], sink);
      });
    }
    for (auto& w : workers) w.join();
  }
  return gen;
}

SparseGenerator make_absorbing(SparseGenerator gen, const std::vector<int>& goal_rows) {
  for (int r : goal_rows) {
    if (r < 0 || r >= gen.dimension)
      throw std::invalid_argument("make_absorbing: row out of range");
    gen.rows[r].clear();
  }
  return gen;
}

void dump_coordinate_list(const SparseGenerator& gen, std::ostream& os) {
  for (int r = 0; r < gen.dimension; ++r)
    for (const auto& [c, v] : gen.rows[r]) os << r << ' ' << c << ' ' << v << '\n';
}

}  // namespace mjpb
