#include "askless/inference.hpp"

#include <algorithm>
#include <cmath>

#include "askless/rng.hpp"

namespace askless {

std::string_view to_string(Engine engine) {
  return engine == Engine::exact ? "exact" : "lw";
}

Engine engine_from_string(std::string_view text) {
  if (text == "exact") return Engine::exact;
  if (text == "lw" || text == "likelihood-weighting" || text == "likelihoodWeighting")
    return Engine::likelihoodWeighting;
  throw Error(Errc::InvalidConfig, "unknown engine '" + std::string(text) + "' (use exact or lw)");
}

double Posterior::probability(std::string_view level) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return probs(static_cast<Eigen::Index>(i));
  throw Error(Errc::InvalidLevel, variable + "='" + std::string(level) + "'");
}

int Posterior::argmax() const {
  int best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs(i) > probs(best)) best = static_cast<int>(i);
  return best;
}

namespace {

void check_query(const BayesianNetwork& bn, int target, std::span<const int> evidence) {
  if (target < 0 || target >= bn.size()) throw Error(Errc::UnknownVariable, "target index out of range");
  if (static_cast<int>(evidence.size()) != bn.size())
    throw Error(Errc::InvalidConfig, "evidence vector must have one entry per node");
  for (int v = 0; v < bn.size(); ++v)
    if (evidence[v] >= bn.cardinality(v)) throw Error(Errc::InvalidLevel, bn.schema()[v].abbr);
  if (evidence[target] >= 0) throw Error(Errc::TargetInEvidence, bn.schema()[target].abbr);
}

// Ancestors of the target and evidence nodes (inclusive). Other nodes are
// barren: summing them out contributes a factor of one.
std::vector<bool> relevant_nodes(const BayesianNetwork& bn, int target, std::span<const int> evidence) {
  std::vector<bool> keep(static_cast<std::size_t>(bn.size()), false);
  std::vector<int> stack;
  for (int v = 0; v < bn.size(); ++v)
    if (v == target || evidence[v] >= 0) {
      keep[v] = true;
      stack.push_back(v);
    }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int p : bn.dag().parents(v))
      if (!keep[p]) {
        keep[p] = true;
        stack.push_back(p);
      }
  }
  return keep;
}

Posterior make_posterior(const BayesianNetwork& bn, int target, Eigen::VectorXd probs, Engine engine,
                         double effective) {
  Posterior post;
  post.variable = bn.schema()[target].abbr;
  post.levels = bn.schema()[target].levels;
  post.probs = std::move(probs);
  post.engine = engine;
  post.effectiveSamples = effective;
  return post;
}

// Dense table over a sorted variable list; last variable varies fastest.
struct Factor {
  std::vector<int> vars;
  std::vector<int> cards;
  std::vector<double> values;

  bool mentions(int v) const { return std::binary_search(vars.begin(), vars.end(), v); }
};

std::vector<std::size_t> strides_for(const Factor& f, const std::vector<int>& vars) {
  // Stride of each variable of `vars` inside `f` (0 when absent).
  std::vector<std::size_t> out(vars.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = f.vars.size(); i-- > 0;) {
    const auto it = std::lower_bound(vars.begin(), vars.end(), f.vars[i]);
    out[static_cast<std::size_t>(it - vars.begin())] = stride;
    stride *= static_cast<std::size_t>(f.cards[i]);
  }
  return out;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(out.vars));
  std::size_t size = 1;
  for (int v : out.vars) {
    const auto ia = std::lower_bound(a.vars.begin(), a.vars.end(), v);
    const int card = (ia != a.vars.end() && *ia == v)
                         ? a.cards[static_cast<std::size_t>(ia - a.vars.begin())]
                         : b.cards[static_cast<std::size_t>(std::lower_bound(b.vars.begin(), b.vars.end(), v) -
                                                            b.vars.begin())];
    out.cards.push_back(card);
    size *= static_cast<std::size_t>(card);
  }
  out.values.resize(size);
  const auto sa = strides_for(a, out.vars);
  const auto sb = strides_for(b, out.vars);
  std::vector<int> counter(out.vars.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < size; ++i) {
    out.values[i] = a.values[ia] * b.values[ib];
    for (std::size_t d = out.vars.size(); d-- > 0;) {
      if (++counter[d] < out.cards[d]) {
        ia += sa[d];
        ib += sb[d];
        break;
      }
      counter[d] = 0;
      ia -= sa[d] * static_cast<std::size_t>(out.cards[d] - 1);
      ib -= sb[d] * static_cast<std::size_t>(out.cards[d] - 1);
    }
  }
  return out;
}

Factor sum_out(const Factor& f, int var) {
  const auto pos = static_cast<std::size_t>(std::lower_bound(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i)
    if (i != pos) {
      out.vars.push_back(f.vars[i]);
      out.cards.push_back(f.cards[i]);
    }
  std::size_t inner = 1;
  for (std::size_t i = pos + 1; i < f.vars.size(); ++i) inner *= static_cast<std::size_t>(f.cards[i]);
  const auto card = static_cast<std::size_t>(f.cards[pos]);
  const std::size_t outer = f.values.size() / (inner * card);
  out.values.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < card; ++k)
      for (std::size_t i = 0; i < inner; ++i) out.values[o * inner + i] += f.values[(o * card + k) * inner + i];
  return out;
}

// CPT of `node` as a factor over its family with observed variables fixed.
Factor cpt_factor(const BayesianNetwork& bn, int node, std::span<const int> evidence) {
  std::vector<int> family = bn.dag().parents(node);
  family.push_back(node);
  std::sort(family.begin(), family.end());
  Factor f;
  for (int v : family)
    if (evidence[v] < 0) {
      f.vars.push_back(v);
      f.cards.push_back(bn.cardinality(v));
    }
  std::size_t size = 1;
  for (int c : f.cards) size *= static_cast<std::size_t>(c);
  f.values.resize(size);
  std::vector<int> levels(static_cast<std::size_t>(bn.size()), 0);
  for (int v : family)
    if (evidence[v] >= 0) levels[v] = evidence[v];
  std::vector<int> counter(f.vars.size(), 0);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t d = 0; d < f.vars.size(); ++d) levels[f.vars[d]] = counter[d];
    f.values[i] = bn.conditional(node, levels);
    for (std::size_t d = f.vars.size(); d-- > 0;) {
      if (++counter[d] < f.cards[d]) break;
      counter[d] = 0;
    }
  }
  return f;
}

// Greedy min-degree order over the interaction graph of the factors; ties
// go to the earliest schema variable.
std::vector<int> elimination_order(int n, const std::vector<Factor>& factors, const std::vector<int>& toEliminate) {
  std::vector<std::vector<bool>> adj(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
  for (const auto& f : factors)
    for (int a : f.vars)
      for (int b : f.vars)
        if (a != b) adj[a][b] = true;
  std::vector<bool> pending(static_cast<std::size_t>(n), false);
  for (int v : toEliminate) pending[v] = true;
  std::vector<bool> gone(static_cast<std::size_t>(n), false);
  std::vector<int> order;
  for (std::size_t step = 0; step < toEliminate.size(); ++step) {
    int best = -1, bestDegree = 0;
    for (int v = 0; v < n; ++v) {
      if (!pending[v]) continue;
      int degree = 0;
      for (int u = 0; u < n; ++u)
        if (adj[v][u] && !gone[u]) ++degree;
      if (best < 0 || degree < bestDegree) {
        best = v;
        bestDegree = degree;
      }
    }
    std::vector<int> nbrs;
    for (int u = 0; u < n; ++u)
      if (adj[best][u] && !gone[u]) nbrs.push_back(u);
    for (int a : nbrs)
      for (int b : nbrs)
        if (a != b) adj[a][b] = true;
    pending[best] = false;
    gone[best] = true;
    order.push_back(best);
  }
  return order;
}

}  // namespace

Posterior eliminate(const BayesianNetwork& bn, int target, std::span<const int> evidence) {
  check_query(bn, target, evidence);
  const int n = bn.size();
  const auto keep = relevant_nodes(bn, target, evidence);

  std::vector<Factor> factors;
  std::vector<int> hidden;
  for (int v = 0; v < n; ++v) {
    if (!keep[v]) continue;
    factors.push_back(cpt_factor(bn, v, evidence));
    if (v != target && evidence[v] < 0) hidden.push_back(v);
  }

  for (int var : elimination_order(n, factors, hidden)) {
    std::vector<Factor> rest;
    Factor product{{}, {}, {1.0}};
    for (auto& f : factors) {
      if (f.mentions(var))
        product = multiply(product, f);
      else
        rest.push_back(std::move(f));
    }
    rest.push_back(sum_out(product, var));
    factors = std::move(rest);
  }

  Factor result{{}, {}, {1.0}};
  for (const auto& f : factors) result = multiply(result, f);
  // Only the target can remain.
  Eigen::VectorXd probs(bn.cardinality(target));
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    probs(i) = result.vars.empty() ? result.values[0] : result.values[static_cast<std::size_t>(i)];
  const double z = probs.sum();
  if (!(z > 0.0))
    throw Error(Errc::ZeroProbabilityEvidence, "evidence has probability 0 under the network");
  probs /= z;
  return make_posterior(bn, target, std::move(probs), Engine::exact, std::numeric_limits<double>::infinity());
}

Posterior eliminate(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence) {
  const int t = bn.schema().require_index(target);
  if (evidence.contains(target)) throw Error(Errc::TargetInEvidence, target);
  return eliminate(bn, t, resolve_evidence(bn.schema(), evidence));
}

Posterior lw_query(const BayesianNetwork& bn, int target, std::span<const int> evidence, long nSamples,
                   std::uint64_t seed) {
  check_query(bn, target, evidence);
  if (nSamples < 1) throw Error(Errc::InvalidConfig, "nSamples must be >= 1");
  const auto keep = relevant_nodes(bn, target, evidence);
  std::vector<int> order;
  for (int v : bn.topological())
    if (keep[v]) order.push_back(v);

  Rng rng(seed);
  std::vector<int> levels(evidence.begin(), evidence.end());
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(bn.cardinality(target));
  double sumW = 0.0, sumW2 = 0.0;
  for (long s = 0; s < nSamples; ++s) {
    double w = 1.0;
    for (int v : order) {
      const auto row = static_cast<Eigen::Index>(bn.row_index(v, levels));
      const auto& table = bn.cpt(v).table();
      if (evidence[v] >= 0) {
        w *= table(row, evidence[v]);
        continue;
      }
      const double u = rng.uniform();
      double acc = 0.0;
      int level = static_cast<int>(table.cols()) - 1;
      for (Eigen::Index c = 0; c < table.cols(); ++c) {
        acc += table(row, c);
        if (u < acc) {
          level = static_cast<int>(c);
          break;
        }
      }
      levels[v] = level;
    }
    weights(levels[target]) += w;
    sumW += w;
    sumW2 += w * w;
  }
  if (!(sumW > 0.0))
    throw Error(Errc::AllZeroWeights, "every sample had weight 0 (" + std::to_string(nSamples) + " samples)");
  weights /= sumW;
  return make_posterior(bn, target, std::move(weights), Engine::likelihoodWeighting, sumW * sumW / sumW2);
}

Posterior lw_query(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence,
                   long nSamples, std::uint64_t seed) {
  const int t = bn.schema().require_index(target);
  if (evidence.contains(target)) throw Error(Errc::TargetInEvidence, target);
  return lw_query(bn, t, resolve_evidence(bn.schema(), evidence), nSamples, seed);
}

Posterior query(const BayesianNetwork& bn, int target, std::span<const int> evidence,
                const QueryOptions& options) {
  if (options.engine == Engine::exact) return eliminate(bn, target, evidence);
  return lw_query(bn, target, evidence, options.nSamples, options.seed);
}

Posterior query(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence,
                const QueryOptions& options) {
  if (options.engine == Engine::exact) return eliminate(bn, target, evidence);
  return lw_query(bn, target, evidence, options.nSamples, options.seed);
}

std::string predict(const BayesianNetwork& bn, const std::string& target, const Evidence& evidence,
                    const QueryOptions& options) {
  const Posterior post = query(bn, target, evidence, options);
  return post.levels[static_cast<std::size_t>(post.argmax())];
}

Evidence merge_evidence(const Evidence& prior, const Evidence& added) {
  Evidence merged = prior;
  for (const auto& [name, value] : added.assignments) {
    auto [it, inserted] = merged.assignments.emplace(name, value);
    if (!inserted && it->second != value)
      throw Error(Errc::ConflictingEvidence, name + " is '" + it->second + "', new answer '" + value + "'");
  }
  return merged;
}

Posterior incremental_update(const BayesianNetwork& bn, const std::string& target, const Evidence& priorEvidence,
                             const Evidence& newAnswers, const QueryOptions& options) {
  return query(bn, target, merge_evidence(priorEvidence, newAnswers), options);
}

double total_variation(const Posterior& a, const Posterior& b) {
  if (a.probs.size() != b.probs.size()) throw Error(Errc::LengthMismatch, "posteriors over different levels");
  return 0.5 * (a.probs - b.probs).cwiseAbs().sum();
}

}  // namespace askless
