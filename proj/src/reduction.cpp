#include "askless/reduction.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace askless {

double f_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

EvaluationReport evaluate(std::span<const int> predictions, std::span<const int> labels,
                          std::span<const std::string> classes) {
  if (predictions.size() != labels.size())
    throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                          std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw Error(Errc::LengthMismatch, "nothing to evaluate");
  const auto nc = static_cast<int>(classes.size());
  EvaluationReport report;
  report.classes.assign(classes.begin(), classes.end());
  report.confusion = Eigen::MatrixXi::Zero(nc, nc);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= nc || predictions[i] < 0 || predictions[i] >= nc)
      throw Error(Errc::UnknownClass, "class index out of range at position " + std::to_string(i));
    report.confusion(labels[i], predictions[i]) += 1;
  }
  for (int c = 0; c < nc; ++c) {
    const double tp = report.confusion(c, c);
    const double predicted = report.confusion.col(c).sum();
    const double actual = report.confusion.row(c).sum();
    ClassMetrics m;
    m.precision = predicted == 0.0 ? 0.0 : tp / predicted;
    m.recall = actual == 0.0 ? 0.0 : tp / actual;
    m.fScore = f_score(m.precision, m.recall);
    m.support = static_cast<long>(actual);
    report.macroPrecision += m.precision;
    report.macroRecall += m.recall;
    report.macroF += m.fScore;
    report.perClass.push_back(m);
  }
  if (nc > 0) {
    report.macroPrecision /= nc;
    report.macroRecall /= nc;
    report.macroF /= nc;
  }
  report.fOfMacroPR = f_score(report.macroPrecision, report.macroRecall);
  return report;
}

EvaluationReport evaluate(std::span<const std::string> predictions, std::span<const std::string> labels,
                          std::span<const std::string> classes) {
  const auto index = [&](const std::string& value) {
    auto it = std::find(classes.begin(), classes.end(), value);
    if (it == classes.end()) throw Error(Errc::UnknownClass, "'" + value + "'");
    return static_cast<int>(it - classes.begin());
  };
  if (predictions.size() != labels.size())
    throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                          std::to_string(labels.size()) + " labels");
  std::vector<int> p, l;
  for (const auto& x : predictions) p.push_back(index(x));
  for (const auto& x : labels) l.push_back(index(x));
  return evaluate(std::span<const int>(p), std::span<const int>(l), classes);
}

std::vector<std::string> random_subset(std::span<const std::string> pool, std::size_t k, Rng& rng) {
  if (k > pool.size())
    throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " exceeds pool of " + std::to_string(pool.size()));
  std::vector<std::string> items(pool.begin(), pool.end());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

std::string_view to_string(SelectionMode mode) { return mode == SelectionMode::threshold ? "threshold" : "best"; }

SelectionMode selection_mode_from_string(std::string_view text) {
  if (text == "threshold") return SelectionMode::threshold;
  if (text == "best") return SelectionMode::best;
  throw Error(Errc::InvalidConfig, "unknown mode '" + std::string(text) + "' (use threshold or best)");
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void check_grid(const FindKConfig& config) {
  if (config.grid.empty()) throw Error(Errc::InvalidConfig, "grid must not be empty");
  if (!std::is_sorted(config.grid.begin(), config.grid.end()) ||
      std::adjacent_find(config.grid.begin(), config.grid.end()) != config.grid.end())
    throw Error(Errc::InvalidConfig, "grid must be strictly ascending");
  if (config.grid.front() < 1) throw Error(Errc::InvalidConfig, "grid values must be >= 1");
  if (!(config.threshold > 0.0 && config.threshold <= 1.0))
    throw Error(Errc::InvalidConfig, "threshold must be in (0, 1]");
}

std::vector<std::string> resolve_pool(const SurveySchema& schema, const FindKConfig& config) {
  if (config.questionPool.empty()) return schema.asked_questions();
  for (const auto& q : config.questionPool) {
    const int v = schema.require_index(q);
    if (schema[v].role != Role::asked)
      throw Error(Errc::InvalidConfig, q + " is not an asked question and cannot be in the pool");
  }
  return config.questionPool;
}

}  // namespace

void select_k(FindKReport& report) {
  std::ostringstream trace;
  trace << to_string(report.mode) << " mode";
  report.chosenK.reset();
  if (report.mode == SelectionMode::threshold) {
    trace << ", tau=" << fmt(report.threshold) << ":";
    for (const auto& [k, r] : report.perK) {
      const bool pass = r.fOfMacroPR >= report.threshold;
      trace << " k=" << k << " f=" << fmt(r.fOfMacroPR) << (pass ? " meets" : " below");
      if (pass) {
        report.chosenK = k;
        trace << "; chose smallest qualifying k=" << k;
        break;
      }
      trace << ";";
    }
    if (!report.chosenK) trace << " no k meets the threshold";
  } else {
    double best = 0.0;
    trace << ":";
    for (const auto& [k, r] : report.perK) {
      trace << " k=" << k << " f=" << fmt(r.fOfMacroPR) << ";";
      // Strict improvement keeps the smaller k on ties.
      if (!report.chosenK || r.fOfMacroPR > best) {
        best = r.fOfMacroPR;
        report.chosenK = k;
      }
    }
    if (report.chosenK) trace << " chose argmax k=" << *report.chosenK;
  }
  report.trace = trace.str();
}

FindKReport find_k(const FindKConfig& config, const std::function<EvaluationReport(int k)>& evaluateK) {
  check_grid(config);
  FindKReport report;
  report.mode = config.mode;
  report.threshold = config.threshold;
  for (int k : config.grid) report.perK.emplace(k, evaluateK(k));
  select_k(report);
  return report;
}

EvaluationReport evaluate_with_k(const BayesianNetwork& bn, const Dataset& testSet, int k,
                                 const FindKConfig& config) {
  const SurveySchema& schema = bn.schema();
  if (testSet.empty()) throw Error(Errc::EmptyDataset, "test set has no rows");
  if (!testSet.labeled()) throw Error(Errc::UnlabeledTestSet, "test rows need " + schema.label_var());
  const auto pool = resolve_pool(schema, config);
  if (k < 0 || static_cast<std::size_t>(k) > pool.size())
    throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " exceeds pool of " + std::to_string(pool.size()));

  // Test-set column holding each network variable.
  std::vector<int> column(static_cast<std::size_t>(schema.size()), -1);
  for (int v = 0; v < schema.size(); ++v) {
    auto c = testSet.schema.index_of(schema[v].abbr);
    if (c) column[v] = *c;
  }
  std::vector<int> poolIndex;
  for (const auto& q : pool) {
    const int v = schema.require_index(q);
    if (column[v] < 0) throw Error(Errc::MissingColumn, q + " missing from test set");
    poolIndex.push_back(v);
  }
  const int target = schema.label_index();
  const auto& classes = schema[target].levels;
  const auto& testLabels = testSet.schema[testSet.schema.label_index()].levels;

  std::vector<int> predictions, labels;
  predictions.reserve(static_cast<std::size_t>(testSet.rows()));
  labels.reserve(static_cast<std::size_t>(testSet.rows()));
  std::vector<int> evidence(static_cast<std::size_t>(schema.size()));
  std::vector<int> order;
  for (Eigen::Index r = 0; r < testSet.rows(); ++r) {
    Rng rng(derive_seed({config.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)}));
    std::fill(evidence.begin(), evidence.end(), -1);
    order = poolIndex;
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
      std::swap(order[i], order[j]);
      const int v = order[i];
      const int level = testSet.values(r, column[v]);
      const int mapped = schema[v].level_index(testSet.schema[column[v]].levels[static_cast<std::size_t>(level)]);
      if (mapped < 0) throw Error(Errc::InvalidLevel, schema[v].abbr + " level unknown to the network");
      evidence[v] = mapped;
    }
    QueryOptions options{config.engine, config.nSamples, rng.next()};
    predictions.push_back(query(bn, target, evidence, options).argmax());
    const auto& truth = testLabels[static_cast<std::size_t>(testSet.values(r, testSet.schema.label_index()))];
    const int label = schema[target].level_index(truth);
    if (label < 0) throw Error(Errc::UnknownClass, "'" + truth + "'");
    labels.push_back(label);
  }
  return evaluate(std::span<const int>(predictions), std::span<const int>(labels), classes);
}

FindKReport find_k(const BayesianNetwork& bn, const Dataset& testSet, const FindKConfig& config) {
  if (!testSet.labeled()) throw Error(Errc::UnlabeledTestSet, "find_k needs labeled test rows");
  check_grid(config);
  const auto pool = resolve_pool(bn.schema(), config);
  if (static_cast<std::size_t>(config.grid.back()) > pool.size())
    throw Error(Errc::KTooLarge, "grid value " + std::to_string(config.grid.back()) + " exceeds pool of " +
                                     std::to_string(pool.size()));
  return find_k(config, [&](int k) { return evaluate_with_k(bn, testSet, k, config); });
}

// ---------------------------------------------------------------------------
// Rendering

Json report_to_json(const EvaluationReport& report) {
  Json perClass = Json::array();
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const auto& m = report.perClass[c];
    perClass.push_back({{"segment", report.classes[c]},
                        {"precision", m.precision},
                        {"recall", m.recall},
                        {"fScore", m.fScore},
                        {"support", m.support}});
  }
  Json confusion = Json::array();
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) row.push_back(report.confusion(r, c));
    confusion.push_back(std::move(row));
  }
  return {{"perClass", std::move(perClass)},
          {"macroPrecision", report.macroPrecision},
          {"macroRecall", report.macroRecall},
          {"macroF", report.macroF},
          {"fOfMacroPR", report.fOfMacroPR},
          {"confusion", std::move(confusion)}};
}

Json report_to_json(const FindKReport& report) {
  Json perK = Json::array();
  for (const auto& [k, r] : report.perK) {
    Json entry = report_to_json(r);
    entry["k"] = k;
    perK.push_back(std::move(entry));
  }
  return {{"mode", std::string(to_string(report.mode))},
          {"threshold", report.threshold},
          {"chosenK", report.chosenK ? Json(*report.chosenK) : Json(nullptr)},
          {"trace", report.trace},
          {"perK", std::move(perK)}};
}

std::string render_table(const EvaluationReport& report, const std::string& title) {
  std::ostringstream out;
  char line[128];
  out << title << '\n';
  std::snprintf(line, sizeof line, "%-10s %9s %9s %9s %9s\n", "Segment", "Precision", "Recall", "F-Score", "Support");
  out << line;
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const auto& m = report.perClass[c];
    std::snprintf(line, sizeof line, "%-10s %9.2f %9.2f %9.2f %9ld\n", report.classes[c].c_str(), m.precision,
                  m.recall, m.fScore, m.support);
    out << line;
  }
  long total = 0;
  for (const auto& m : report.perClass) total += m.support;
  std::snprintf(line, sizeof line, "%-10s %9.2f %9.2f %9.2f %9ld\n", "Average", report.macroPrecision,
                report.macroRecall, report.fOfMacroPR, total);
  out << line;
  std::snprintf(line, sizeof line, "(mean of per-segment F: %.4f)\n", report.macroF);
  out << line;
  return out.str();
}

std::string render_table(const FindKReport& report) {
  std::ostringstream out;
  for (const auto& [k, r] : report.perK) out << render_table(r, "Accuracy metrics for k=" + std::to_string(k)) << '\n';
  out << "chosen k: " << (report.chosenK ? std::to_string(*report.chosenK) : std::string("none")) << '\n';
  out << report.trace << '\n';
  return out.str();
}

}  // namespace askless
