#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "askless/core.hpp"

namespace askless {

enum class Engine { exact, likelihoodWeighting };

std::string_view to_string(Engine engine);
// Accepts "exact", "lw" and "likelihood-weighting".
Engine engine_from_string(std::string_view text);

struct Posterior {
  std::string variable;
  std::vector<std::string> levels;
  Eigen::VectorXd probs;
  Engine engine = Engine::exact;
  // (sum w)^2 / sum w^2 for sampled posteriors; +infinity when exact.
  double effectiveSamples = std::numeric_limits<double>::infinity();

  double probability(std::string_view level) const;
  // Highest-probability level index, lowest index on ties.
  int argmax() const;
};

struct QueryOptions {
  Engine engine = Engine::exact;
  long nSamples = 5000;
  std::uint64_t seed = 0;
};

// Exact P(target | evidence) by variable elimination with a min-degree order.
// Errors: UnknownVariable, InvalidLevel, TargetInEvidence, ZeroProbabilityEvidence.
Posterior eliminate(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence);
// Index form: `evidence` holds one level index per node, -1 when unobserved.
Posterior eliminate(const BayesianNetwork& bn, int target, std::span<const int> evidence);

// Likelihood weighting, deterministic for a given seed.
// Errors: as eliminate, plus AllZeroWeights and InvalidConfig (nSamples < 1).
Posterior lw_query(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence,
                   long nSamples, std::uint64_t seed);
Posterior lw_query(const BayesianNetwork& bn, int target, std::span<const int> evidence, long nSamples,
                   std::uint64_t seed);

Posterior query(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence,
                const QueryOptions& options);
Posterior query(const BayesianNetwork& bn, int target, std::span<const int> evidence,
                const QueryOptions& options);

// Argmax level of the posterior.
std::string predict(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence,
                    const QueryOptions& options);

// Union of two evidence sets. Errors: ConflictingEvidence.
Evidence merge_evidence(const Evidence& prior, const Evidence& added);

// Query on the merged evidence; the network is static so updating is
// accumulate-and-requery.
Posterior incremental_update(const BayesianNetwork& bn, const std::string& target, const Evidence& priorEvidence,
                             const Evidence& newAnswers, const QueryOptions& options);

// Total-variation distance between two posteriors over the same levels.
double total_variation(const Posterior& a, const Posterior& b);

}  // namespace askless
