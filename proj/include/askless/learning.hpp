#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "askless/core.hpp"

namespace askless {

using LevelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// Complete categorical responses, one row per respondent and one column per
// schema variable, stored as level indices. The label column may hold -1
// throughout when the data is unlabeled; every other cell is a valid level.
struct Dataset {
  SurveySchema schema;
  LevelMatrix values;

  Eigen::Index rows() const { return values.rows(); }
  bool empty() const { return values.rows() == 0; }
  bool labeled() const;
  // Rows at the given indices, in that order.
  Dataset subset(const std::vector<int>& rowIndices) const;
};

enum class Criterion { AIC, BIC };

std::string_view to_string(Criterion c);
Criterion criterion_from_string(std::string_view text);

struct HillClimbConfig {
  Criterion criterion = Criterion::AIC;
  int maxParents = 4;
  long maxIterations = 1'000'000;
  int restarts = 0;
  // Random edge flips applied before each restart.
  int perturb = 1;
  std::uint64_t seed = 0;
  std::vector<NamedEdge> forbiddenEdges;
  std::vector<NamedEdge> requiredEdges;
};

struct HillClimbResult {
  Dag dag;
  double score = 0.0;
  // One score trace per climb (the initial climb, then each restart); each
  // starts with the score of the climb's starting graph.
  std::vector<std::vector<double>> traces;
};

// Sum over rows and nodes of ln P_mle(level | parent levels).
// Errors: EmptyDataset, UnknownNode (DAG node missing from the dataset).
double log_likelihood(const Dag& dag, const Dataset& data);

// Number of free parameters: sum_v (|levels(v)| - 1) * prod_{u in pa(v)} |levels(u)|.
double parameter_count(const Dag& dag, const Dataset& data);

// Network score, larger is better: AIC = LL - p, BIC = LL - (ln N / 2) p.
double score(const Dag& dag, const Dataset& data, Criterion criterion);

// Score contribution of one family: `child` with the given parent columns.
double family_score(const Dataset& data, int child, const std::vector<int>& parents, Criterion criterion);

// Greedy search over DAGs on all dataset columns starting from the empty
// graph plus required edges. Errors: EmptyDataset, InconsistentConstraints,
// InvalidConfig.
HillClimbResult hill_climb_traced(const Dataset& data, const HillClimbConfig& config);
Dag hill_climb(const Dataset& data, const HillClimbConfig& config);

// CPT entry = (n(level, config) + alpha) / (n(config) + alpha * |levels|);
// configurations never observed with alpha = 0 get the uniform row.
// The DAG must declare the dataset's schema variables in schema order.
// Errors: EmptyDataset, InvalidConfig.
BayesianNetwork fit_mle(const Dag& dag, const Dataset& data, double alpha = 0.0);

// Counts n(config, level) for one family; rows follow the Cpt radix order
// over `parents`.
Eigen::MatrixXd family_counts(const Dataset& data, int child, const std::vector<int>& parents);

}  // namespace askless
