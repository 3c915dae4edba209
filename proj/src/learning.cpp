#include "askless/learning.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "askless/rng.hpp"

namespace askless {

bool Dataset::labeled() const {
  const int label = schema.label_index();
  if (label < 0 || values.rows() == 0) return false;
  return values.col(label).minCoeff() >= 0;
}

Dataset Dataset::subset(const std::vector<int>& rowIndices) const {
  Dataset out{schema, LevelMatrix(static_cast<Eigen::Index>(rowIndices.size()), values.cols())};
  for (std::size_t i = 0; i < rowIndices.size(); ++i)
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(rowIndices[i]);
  return out;
}

std::string_view to_string(Criterion c) { return c == Criterion::AIC ? "aic" : "bic"; }

Criterion criterion_from_string(std::string_view text) {
  if (text == "aic" || text == "AIC") return Criterion::AIC;
  if (text == "bic" || text == "BIC") return Criterion::BIC;
  throw Error(Errc::InvalidConfig, "unknown score '" + std::string(text) + "' (use aic or bic)");
}

Eigen::MatrixXd family_counts(const Dataset& data, int child, const std::vector<int>& parents) {
  Eigen::Index configs = 1;
  for (int p : parents) configs *= data.schema[p].cardinality();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(configs, data.schema[child].cardinality());
  const auto& values = data.values;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    Eigen::Index row = 0;
    for (int p : parents) {
      const int level = values(r, p);
      if (level < 0) throw Error(Errc::MissingColumn, data.schema[p].abbr + " has missing values");
      row = row * data.schema[p].cardinality() + level;
    }
    const int level = values(r, child);
    if (level < 0) throw Error(Errc::MissingColumn, data.schema[child].abbr + " has missing values");
    counts(row, level) += 1.0;
  }
  return counts;
}

namespace {

double family_log_likelihood(const Dataset& data, int child, const std::vector<int>& parents) {
  const Eigen::MatrixXd counts = family_counts(data, child, parents);
  double ll = 0.0;
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const double total = counts.row(r).sum();
    if (total == 0.0) continue;
    for (Eigen::Index c = 0; c < counts.cols(); ++c) {
      const double n = counts(r, c);
      if (n > 0.0) ll += n * std::log(n / total);
    }
  }
  return ll;
}

double family_parameters(const Dataset& data, int child, const std::vector<int>& parents) {
  double q = 1.0;
  for (int p : parents) q *= data.schema[p].cardinality();
  return (data.schema[child].cardinality() - 1) * q;
}

double penalty_weight(const Dataset& data, Criterion criterion) {
  return criterion == Criterion::AIC ? 1.0 : std::log(static_cast<double>(data.rows())) / 2.0;
}

void require_rows(const Dataset& data) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "learning needs at least one row");
}

// Maps DAG node indices to dataset columns.
struct FamilyMap {
  std::vector<int> column;

  FamilyMap(const Dag& dag, const Dataset& data) {
    for (const auto& name : dag.nodes()) {
      auto c = data.schema.index_of(name);
      if (!c) throw Error(Errc::UnknownNode, name + " is not a dataset column");
      column.push_back(*c);
    }
  }

  std::vector<int> parents(const Dag& dag, int v) const {
    std::vector<int> out;
    for (int p : dag.parents(v)) out.push_back(column[p]);
    return out;
  }
};

}  // namespace

double family_score(const Dataset& data, int child, const std::vector<int>& parents, Criterion criterion) {
  require_rows(data);
  return family_log_likelihood(data, child, parents) -
         penalty_weight(data, criterion) * family_parameters(data, child, parents);
}

double log_likelihood(const Dag& dag, const Dataset& data) {
  require_rows(data);
  const FamilyMap map(dag, data);
  double ll = 0.0;
  for (int v = 0; v < dag.size(); ++v) ll += family_log_likelihood(data, map.column[v], map.parents(dag, v));
  return ll;
}

double parameter_count(const Dag& dag, const Dataset& data) {
  const FamilyMap map(dag, data);
  double p = 0.0;
  for (int v = 0; v < dag.size(); ++v) p += family_parameters(data, map.column[v], map.parents(dag, v));
  return p;
}

double score(const Dag& dag, const Dataset& data, Criterion criterion) {
  require_rows(data);
  return log_likelihood(dag, data) - penalty_weight(data, criterion) * parameter_count(dag, data);
}

// ---------------------------------------------------------------------------
// Hill climbing

namespace {

constexpr double kMinImprovement = 1e-9;
constexpr double kTieTolerance = 1e-9;

class FamilyCache {
 public:
  FamilyCache(const Dataset& data, Criterion criterion)
      : data_(data), criterion_(criterion), cache_(static_cast<std::size_t>(data.schema.size())) {}

  double operator()(int child, const std::vector<int>& parents) {
    std::uint64_t key = 0;
    for (int p : parents) key |= std::uint64_t{1} << p;
    auto& slot = cache_[child];
    if (auto it = slot.find(key); it != slot.end()) return it->second;
    const double s = family_score(data_, child, parents, criterion_);
    slot.emplace(key, s);
    return s;
  }

 private:
  const Dataset& data_;
  Criterion criterion_;
  std::vector<std::unordered_map<std::uint64_t, double>> cache_;
};

enum class MoveKind { add, remove, reverse };

struct Move {
  MoveKind kind;
  int from;
  int to;
  double delta;
};

std::vector<int> with(std::vector<int> set, int x) {
  set.insert(std::lower_bound(set.begin(), set.end(), x), x);
  return set;
}

std::vector<int> without(std::vector<int> set, int x) {
  set.erase(std::find(set.begin(), set.end(), x));
  return set;
}

class Search {
 public:
  Search(const Dataset& data, const HillClimbConfig& config)
      : n_(data.schema.size()),
        config_(config),
        cache_(data, config.criterion),
        parents_(static_cast<std::size_t>(n_)),
        family_(static_cast<std::size_t>(n_)),
        required_(static_cast<std::size_t>(n_ * n_), false),
        forbidden_(static_cast<std::size_t>(n_ * n_), false) {
    const auto lookup = [&](const std::string& name) {
      auto i = data.schema.index_of(name);
      if (!i) throw Error(Errc::UnknownNode, name + " in edge constraints");
      return *i;
    };
    for (const auto& [p, c] : config.forbiddenEdges) forbidden_[at(lookup(p), lookup(c))] = true;
    std::vector<IndexEdge> required;
    for (const auto& [p, c] : config.requiredEdges) {
      const int pi = lookup(p), ci = lookup(c);
      if (pi == ci) throw Error(Errc::InconsistentConstraints, "required self-loop on " + p);
      if (forbidden_[at(pi, ci)])
        throw Error(Errc::InconsistentConstraints, p + " -> " + c + " is both required and forbidden");
      if (!required_[at(pi, ci)]) required.emplace_back(pi, ci);
      required_[at(pi, ci)] = true;
    }
    try {
      validate_dag(data.schema.names(), required);
    } catch (const Error& e) {
      throw Error(Errc::InconsistentConstraints, std::string("required edges: ") + e.what());
    }
    for (auto [p, c] : required) parents_[c] = with(parents_[c], p);
    for (int v = 0; v < n_; ++v) {
      if (static_cast<int>(parents_[v].size()) > config.maxParents)
        throw Error(Errc::InconsistentConstraints,
                    "required edges give " + data.schema[v].abbr + " more than maxParents parents");
      family_[v] = cache_(v, parents_[v]);
    }
    names_ = data.schema.names();
  }

  double total() const {
    double s = 0.0;
    for (double f : family_) s += f;
    return s;
  }

  std::vector<double> climb() {
    std::vector<double> trace{total()};
    for (long it = 0; it < config_.maxIterations; ++it) {
      auto best = best_move();
      if (!best) break;
      apply(*best);
      trace.push_back(total());
    }
    return trace;
  }

  void perturb(Rng& rng) {
    if (n_ < 2) return;
    const int from = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_)));
    int to = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ - 1)));
    if (to >= from) ++to;
    if (has_edge(from, to)) {
      if (!required_[at(from, to)]) apply({MoveKind::remove, from, to, 0.0});
    } else if (has_edge(to, from)) {
      if (reverse_legal(to, from)) apply({MoveKind::reverse, to, from, 0.0});
    } else if (add_legal(from, to, reachability())) {
      apply({MoveKind::add, from, to, 0.0});
    }
  }

  std::vector<std::vector<int>> parents() const { return parents_; }

  void restore(const std::vector<std::vector<int>>& parents) {
    parents_ = parents;
    for (int v = 0; v < n_; ++v) family_[v] = cache_(v, parents_[v]);
  }

  Dag dag() const {
    std::vector<IndexEdge> edges;
    for (int c = 0; c < n_; ++c)
      for (int p : parents_[c]) edges.emplace_back(p, c);
    return validate_dag(names_, edges);
  }

 private:
  std::size_t at(int i, int j) const { return static_cast<std::size_t>(i * n_ + j); }

  bool has_edge(int p, int c) const { return std::binary_search(parents_[c].begin(), parents_[c].end(), p); }

  // reach[i*n+j]: a directed path i ~> j exists.
  std::vector<bool> reachability() const {
    std::vector<std::vector<int>> children(static_cast<std::size_t>(n_));
    for (int c = 0; c < n_; ++c)
      for (int p : parents_[c]) children[p].push_back(c);
    std::vector<bool> reach(static_cast<std::size_t>(n_ * n_), false);
    std::vector<int> stack;
    for (int s = 0; s < n_; ++s) {
      stack.assign(1, s);
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int c : children[v])
          if (!reach[at(s, c)]) {
            reach[at(s, c)] = true;
            stack.push_back(c);
          }
      }
    }
    return reach;
  }

  // Path from `from` to `to` that does not use the direct edge from -> to.
  bool indirect_path(int from, int to) const {
    std::vector<bool> seen(static_cast<std::size_t>(n_), false);
    std::vector<int> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int c = 0; c < n_; ++c) {
        if (seen[c] || !has_edge(v, c) || (v == from && c == to)) continue;
        if (c == to) return true;
        seen[c] = true;
        stack.push_back(c);
      }
    }
    return false;
  }

  bool add_legal(int from, int to, const std::vector<bool>& reach) const {
    return !forbidden_[at(from, to)] && static_cast<int>(parents_[to].size()) < config_.maxParents &&
           !reach[at(to, from)];
  }

  bool reverse_legal(int from, int to) const {
    return !required_[at(from, to)] && !forbidden_[at(to, from)] &&
           static_cast<int>(parents_[from].size()) < config_.maxParents && !indirect_path(from, to);
  }

  std::optional<Move> best_move() {
    const auto reach = reachability();
    std::optional<Move> best;
    double bestDelta = kMinImprovement;
    // Gains equal up to rounding count as ties, so the earlier move keeps
    // its place (A -> C and C -> A score identically on an empty graph).
    const auto consider = [&](MoveKind kind, int from, int to, double delta) {
      const double slack = best ? kTieTolerance * std::max(1.0, std::abs(bestDelta)) : 0.0;
      if (delta > bestDelta + slack) {
        bestDelta = delta;
        best = Move{kind, from, to, delta};
      }
    };
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (i == j || has_edge(i, j) || has_edge(j, i) || !add_legal(i, j, reach)) continue;
        consider(MoveKind::add, i, j, cache_(j, with(parents_[j], i)) - family_[j]);
      }
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (!has_edge(i, j) || required_[at(i, j)]) continue;
        consider(MoveKind::remove, i, j, cache_(j, without(parents_[j], i)) - family_[j]);
      }
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (!has_edge(i, j) || !reverse_legal(i, j)) continue;
        const double delta = cache_(j, without(parents_[j], i)) - family_[j] +
                             cache_(i, with(parents_[i], j)) - family_[i];
        consider(MoveKind::reverse, i, j, delta);
      }
    return best;
  }

  void apply(const Move& m) {
    switch (m.kind) {
      case MoveKind::add:
        parents_[m.to] = with(parents_[m.to], m.from);
        break;
      case MoveKind::remove:
        parents_[m.to] = without(parents_[m.to], m.from);
        break;
      case MoveKind::reverse:
        parents_[m.to] = without(parents_[m.to], m.from);
        parents_[m.from] = with(parents_[m.from], m.to);
        family_[m.from] = cache_(m.from, parents_[m.from]);
        break;
    }
    family_[m.to] = cache_(m.to, parents_[m.to]);
  }

  int n_;
  HillClimbConfig config_;
  FamilyCache cache_;
  std::vector<std::vector<int>> parents_;
  std::vector<double> family_;
  std::vector<bool> required_;
  std::vector<bool> forbidden_;
  std::vector<std::string> names_;
};

}  // namespace

HillClimbResult hill_climb_traced(const Dataset& data, const HillClimbConfig& config) {
  require_rows(data);
  if (config.maxParents < 1) throw Error(Errc::InvalidConfig, "maxParents must be >= 1");
  if (config.restarts < 0) throw Error(Errc::InvalidConfig, "restarts must be >= 0");
  if (config.maxIterations < 0) throw Error(Errc::InvalidConfig, "maxIterations must be >= 0");
  if (data.schema.size() > 64) throw Error(Errc::InvalidConfig, "at most 64 variables are supported");

  Search search(data, config);
  HillClimbResult result;
  result.traces.push_back(search.climb());
  auto bestParents = search.parents();
  double bestScore = search.total();

  Rng rng(config.seed);
  for (int r = 0; r < config.restarts; ++r) {
    search.restore(bestParents);
    for (int f = 0; f < config.perturb; ++f) search.perturb(rng);
    result.traces.push_back(search.climb());
    if (search.total() > bestScore + kMinImprovement) {
      bestScore = search.total();
      bestParents = search.parents();
    }
  }
  search.restore(bestParents);
  result.dag = search.dag();
  result.score = bestScore;
  return result;
}

Dag hill_climb(const Dataset& data, const HillClimbConfig& config) {
  return hill_climb_traced(data, config).dag;
}

// ---------------------------------------------------------------------------
// Parameter fitting

BayesianNetwork fit_mle(const Dag& dag, const Dataset& data, double alpha) {
  require_rows(data);
  if (!(alpha >= 0.0)) throw Error(Errc::InvalidConfig, "smoothing alpha must be >= 0");
  if (dag.nodes() != data.schema.names())
    throw Error(Errc::InvalidConfig, "fit_mle needs a DAG over every schema variable in schema order");
  std::vector<Cpt> cpts;
  cpts.reserve(static_cast<std::size_t>(dag.size()));
  for (int v = 0; v < dag.size(); ++v) {
    const auto& ps = dag.parents(v);
    const Eigen::MatrixXd counts = family_counts(data, v, ps);
    const double levels = static_cast<double>(counts.cols());
    Eigen::MatrixXd table(counts.rows(), counts.cols());
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
      const double total = counts.row(r).sum();
      if (total + alpha * levels == 0.0)
        table.row(r).setConstant(1.0 / levels);
      else
        table.row(r) = (counts.row(r).array() + alpha) / (total + alpha * levels);
    }
    std::vector<std::string> parentNames;
    std::vector<int> parentCards;
    for (int p : ps) {
      parentNames.push_back(data.schema[p].abbr);
      parentCards.push_back(data.schema[p].cardinality());
    }
    cpts.emplace_back(data.schema[v].abbr, std::move(parentNames), std::move(parentCards), std::move(table));
  }
  return BayesianNetwork(data.schema, dag, std::move(cpts));
}

}  // namespace askless
