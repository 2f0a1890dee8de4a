#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mjpb/reaction_model.hpp"

namespace mjpb {

struct InitialSpec {
  enum class Kind { Point, Table };
  Kind kind = Kind::Point;
  StateVec point;
  std::vector<std::pair<StateVec, double>> table;  // explicit state -> probability

  bool operator==(const InitialSpec&) const = default;
};

struct PredicateClause {
  enum class Cmp { Ge, Gt, Le, Lt, Eq };
  int species = 0;
  Cmp cmp = Cmp::Ge;
  long long threshold = 0;

  bool operator==(const PredicateClause&) const = default;
};

// Built-in per-individual binary test: Y = TP + FP with TP ~ Bin(n, p_tp) on
// the observed species count n and FP ~ Bin(total - n, p_fp).
struct ObservationSpec {
  std::string likelihood_name = "binary_test";
  double sensitivity = 0.0;
  double fpr = 0.0;
  long long observed = 0;
  int species = 0;
  long long total = -1;  // -1: default to the sum of the initial point state

  bool operator==(const ObservationSpec&) const = default;
};

struct TerminalSpec {
  enum class Kind { Point, Predicate, Observe };
  Kind kind = Kind::Point;
  StateVec point;
  std::vector<PredicateClause> predicate;  // conjunction
  std::string predicate_text;              // verbatim source form
  ObservationSpec observe;

  bool operator==(const TerminalSpec&) const = default;
};

struct RefinementOptions {
  double delta = 1e-4;     // truncation threshold
  int grid_exponent = 0;   // m: initial macro side 2^m
  int time_points = 101;   // K: equispaced grid size on [0, T]
  double rtol = 1e-6;
  double atol = 1e-12;
  std::vector<int> unlumped_dims;  // species indices never lumped
  StateVec bounds;                 // per-dimension upper limit of the initial grid

  bool operator==(const RefinementOptions&) const = default;
};

struct ModelDocument {
  ReactionNetwork network;
  InitialSpec initial;
  TerminalSpec terminal;
  double horizon = 0.0;  // T
  RefinementOptions options;
};

bool documents_equal(const ModelDocument& a, const ModelDocument& b);

struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(int line_, int col_, const std::string& message)
      : std::runtime_error("line " + std::to_string(line_) + ":" + std::to_string(col_) + ": " +
                           message),
        line(line_),
        column(col_) {}
};

// Parse the .mjp text format (see README for the grammar).  Parameters are
// resolved at parse time; the result is fully validated.
ModelDocument parse_model(const std::string& text);

// Canonical text form; parse_model(render_model(d)) is structurally equal to d.
std::string render_model(const ModelDocument& doc);

}  // namespace mjpb
