#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "askless/inference.hpp"
#include "askless/learning.hpp"
#include "askless/network_io.hpp"
#include "askless/rng.hpp"

namespace askless {

// 2PR / (P + R), and 0 when P + R = 0.
double f_score(double precision, double recall);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double fScore = 0.0;
  long support = 0;
};

struct EvaluationReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> perClass;
  double macroPrecision = 0.0;
  double macroRecall = 0.0;
  // Mean of per-class F.
  double macroF = 0.0;
  // f_score(macroPrecision, macroRecall); the "Average" row aggregate.
  double fOfMacroPR = 0.0;
  // Rows are true classes, columns predicted classes.
  Eigen::MatrixXi confusion;
};

// Errors: LengthMismatch (also on empty input), UnknownClass.
EvaluationReport evaluate(std::span<const std::string> predictions, std::span<const std::string> labels,
                          std::span<const std::string> classes);
// Index form; values are positions in `classes`.
EvaluationReport evaluate(std::span<const int> predictions, std::span<const int> labels,
                          std::span<const std::string> classes);

// Uniform k-subset without replacement (partial Fisher-Yates), in draw order.
// Errors: KTooLarge.
std::vector<std::string> random_subset(std::span<const std::string> pool, std::size_t k, Rng& rng);

enum class SelectionMode { threshold, best };

std::string_view to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(std::string_view text);

struct FindKConfig {
  std::vector<int> grid{5, 10, 15, 20};
  double threshold = 0.70;
  SelectionMode mode = SelectionMode::threshold;
  // Empty means every asked question of the network's schema.
  std::vector<std::string> questionPool;
  Engine engine = Engine::likelihoodWeighting;
  long nSamples = 5000;
  std::uint64_t seed = 0;
};

struct FindKReport {
  std::map<int, EvaluationReport> perK;
  std::optional<int> chosenK;
  SelectionMode mode = SelectionMode::threshold;
  double threshold = 0.70;
  std::string trace;
};

// Picks k from per-k reports: smallest k with fOfMacroPR >= threshold
// (threshold mode) or the argmax with ties to the smaller k (best mode).
void select_k(FindKReport& report);

// Line search with a caller-supplied evaluator for each grid value.
// Errors: InvalidConfig.
FindKReport find_k(const FindKConfig& config, const std::function<EvaluationReport(int k)>& evaluateK);

// For each k and each test row, asks a fresh random k-subset of the pool,
// predicts the label from those answers and scores the predictions.
// Errors: UnlabeledTestSet, InvalidConfig, KTooLarge, inference errors.
FindKReport find_k(const BayesianNetwork& bn, const Dataset& testSet, const FindKConfig& config);

// Predictions for every test row from `k` random questions (k = pool size
// with an empty pool means the full questionnaire).
EvaluationReport evaluate_with_k(const BayesianNetwork& bn, const Dataset& testSet, int k,
                                 const FindKConfig& config);

Json report_to_json(const EvaluationReport& report);
Json report_to_json(const FindKReport& report);
// Aligned Segment / Precision / Recall / F-Score table with an Average row.
std::string render_table(const EvaluationReport& report, const std::string& title);
std::string render_table(const FindKReport& report);

}  // namespace askless
