#include "askless/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <unordered_set>

namespace askless {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::asked: return "asked";
    case Role::derived: return "derived";
    case Role::label: return "label";
  }
  return "asked";
}

Role role_from_string(std::string_view text) {
  if (text == "asked") return Role::asked;
  if (text == "derived") return Role::derived;
  if (text == "label") return Role::label;
  throw Error(Errc::MalformedDocument, "unknown role '" + std::string(text) + "'");
}

int QuestionSpec::level_index(std::string_view level) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return static_cast<int>(i);
  return -1;
}

SurveySchema::SurveySchema(std::vector<QuestionSpec> questions, std::string labelVar)
    : questions_(std::move(questions)), label_var_(std::move(labelVar)) {
  std::unordered_set<std::string> seen;
  int labels = 0;
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    const auto& q = questions_[i];
    if (q.abbr.empty()) throw Error(Errc::MalformedDocument, "question with empty abbr");
    if (!seen.insert(q.abbr).second) throw Error(Errc::DuplicateAbbr, q.abbr);
    if (q.levels.size() < 2)
      throw Error(Errc::MalformedDocument, q.abbr + " needs at least 2 levels");
    std::set<std::string> distinct(q.levels.begin(), q.levels.end());
    if (distinct.size() != q.levels.size())
      throw Error(Errc::MalformedDocument, q.abbr + " has repeated levels");
    if (q.role == Role::label) {
      ++labels;
      if (q.abbr != label_var_)
        throw Error(Errc::MissingLabelVar,
                    "label role on " + q.abbr + " but labelVar is '" + label_var_ + "'");
      label_index_ = static_cast<int>(i);
    }
  }
  if (labels == 0) throw Error(Errc::MissingLabelVar, "no question has role=label");
  if (labels > 1) throw Error(Errc::MalformedDocument, "more than one role=label question");
}

std::optional<int> SurveySchema::index_of(std::string_view abbr) const {
  for (std::size_t i = 0; i < questions_.size(); ++i)
    if (questions_[i].abbr == abbr) return static_cast<int>(i);
  return std::nullopt;
}

int SurveySchema::require_index(std::string_view abbr) const {
  if (auto i = index_of(abbr)) return *i;
  throw Error(Errc::UnknownVariable, std::string(abbr));
}

std::vector<std::string> SurveySchema::names() const {
  std::vector<std::string> out;
  out.reserve(questions_.size());
  for (const auto& q : questions_) out.push_back(q.abbr);
  return out;
}

std::vector<int> SurveySchema::cardinalities() const {
  std::vector<int> out;
  out.reserve(questions_.size());
  for (const auto& q : questions_) out.push_back(q.cardinality());
  return out;
}

std::vector<std::string> SurveySchema::asked_questions() const {
  std::vector<std::string> out;
  for (const auto& q : questions_)
    if (q.role == Role::asked) out.push_back(q.abbr);
  return out;
}

bool SurveySchema::operator==(const SurveySchema& other) const {
  if (label_var_ != other.label_var_ || questions_.size() != other.questions_.size()) return false;
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    const auto& a = questions_[i];
    const auto& b = other.questions_[i];
    if (a.abbr != b.abbr || a.text != b.text || a.levels != b.levels || a.role != b.role)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dag

std::vector<NamedEdge> Dag::named_edges() const {
  std::vector<NamedEdge> out;
  out.reserve(edges_.size());
  for (auto [p, c] : edges_) out.emplace_back(nodes_[p], nodes_[c]);
  return out;
}

bool Dag::has_edge(int parent, int child) const {
  return std::binary_search(edges_.begin(), edges_.end(), IndexEdge{parent, child});
}

std::optional<int> Dag::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

namespace {

// Returns one directed cycle as node indices, or empty when acyclic.
std::vector<int> find_cycle(int n, const std::vector<std::vector<int>>& children) {
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 on stack, 2 done
  std::vector<int> stack;
  std::vector<int> cycle;
  std::function<bool(int)> visit = [&](int v) {
    state[v] = 1;
    stack.push_back(v);
    for (int c : children[v]) {
      if (state[c] == 1) {
        auto it = std::find(stack.begin(), stack.end(), c);
        cycle.assign(it, stack.end());
        return true;
      }
      if (state[c] == 0 && visit(c)) return true;
    }
    stack.pop_back();
    state[v] = 2;
    return false;
  };
  for (int v = 0; v < n; ++v)
    if (state[v] == 0 && visit(v)) return cycle;
  return {};
}

}  // namespace

Dag validate_dag(std::vector<std::string> nodes, const std::vector<IndexEdge>& edges) {
  if (nodes.empty()) throw Error(Errc::InvalidConfig, "a DAG needs at least one node");
  {
    std::unordered_set<std::string> seen;
    for (const auto& n : nodes)
      if (!seen.insert(n).second) throw Error(Errc::InvalidConfig, "node declared twice: " + n);
  }
  const int n = static_cast<int>(nodes.size());
  Dag dag;
  dag.parents_.resize(nodes.size());
  dag.children_.resize(nodes.size());
  std::set<IndexEdge> unique;
  for (auto [p, c] : edges) {
    if (p < 0 || p >= n || c < 0 || c >= n)
      throw Error(Errc::UnknownNode, "edge endpoint index out of range");
    if (p == c) throw Error(Errc::SelfLoop, nodes[p]);
    if (!unique.insert({p, c}).second)
      throw Error(Errc::DuplicateEdge, nodes[p] + " -> " + nodes[c]);
  }
  dag.edges_.assign(unique.begin(), unique.end());
  for (auto [p, c] : dag.edges_) {
    dag.parents_[c].push_back(p);
    dag.children_[p].push_back(c);
  }
  for (auto& ps : dag.parents_) std::sort(ps.begin(), ps.end());
  for (auto& cs : dag.children_) std::sort(cs.begin(), cs.end());
  if (auto cycle = find_cycle(n, dag.children_); !cycle.empty()) {
    std::string msg;
    for (int v : cycle) msg += nodes[v] + " -> ";
    msg += nodes[cycle.front()];
    throw Error(Errc::CycleDetected, msg);
  }
  dag.nodes_ = std::move(nodes);
  return dag;
}

Dag validate_dag(std::vector<std::string> nodes, const std::vector<NamedEdge>& edges) {
  auto lookup = [&](const std::string& name) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == name) return static_cast<int>(i);
    throw Error(Errc::UnknownNode, name);
  };
  std::vector<IndexEdge> indexed;
  indexed.reserve(edges.size());
  for (const auto& [p, c] : edges) indexed.emplace_back(lookup(p), lookup(c));
  return validate_dag(std::move(nodes), indexed);
}

std::vector<int> topological_indices(const Dag& dag) {
  const int n = dag.size();
  std::vector<int> indegree(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) indegree[v] = static_cast<int>(dag.parents(v).size());
  std::set<int> ready;
  for (int v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.insert(v);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!ready.empty()) {
    int v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (int c : dag.children(v))
      if (--indegree[c] == 0) ready.insert(c);
  }
  return order;
}

std::vector<std::string> topological_order(const Dag& dag) {
  std::vector<std::string> out;
  for (int v : topological_indices(dag)) out.push_back(dag.nodes()[v]);
  return out;
}

// ---------------------------------------------------------------------------
// Cpt

Cpt::Cpt(std::string variable, std::vector<std::string> parents, std::vector<int> parentCards,
         Eigen::MatrixXd table)
    : variable_(std::move(variable)),
      parents_(std::move(parents)),
      parent_cards_(std::move(parentCards)),
      table_(std::move(table)) {
  if (parents_.size() != parent_cards_.size())
    throw Error(Errc::InvalidTable, variable_ + ": parent names and cardinalities differ in length");
  Eigen::Index expected = 1;
  for (int c : parent_cards_) {
    if (c < 1) throw Error(Errc::InvalidTable, variable_ + ": parent cardinality < 1");
    expected *= c;
  }
  if (table_.rows() != expected)
    throw Error(Errc::InvalidTable, variable_ + ": expected " + std::to_string(expected) +
                                        " rows, got " + std::to_string(table_.rows()));
  if (table_.cols() < 2) throw Error(Errc::InvalidTable, variable_ + ": fewer than 2 levels");
  if (!table_.allFinite() || table_.minCoeff() < 0.0 || table_.maxCoeff() > 1.0)
    throw Error(Errc::InvalidTable, variable_ + ": entries outside [0,1]");
  for (Eigen::Index r = 0; r < table_.rows(); ++r)
    if (std::abs(table_.row(r).sum() - 1.0) > kRowTolerance)
      throw Error(Errc::InvalidTable, variable_ + ": row " + std::to_string(r) + " does not sum to 1");
}

std::size_t Cpt::row_of(std::span<const int> parentLevels) const {
  std::size_t row = 0;
  for (std::size_t i = 0; i < parent_cards_.size(); ++i)
    row = row * static_cast<std::size_t>(parent_cards_[i]) + static_cast<std::size_t>(parentLevels[i]);
  return row;
}

std::size_t parent_config_index(const Cpt& cpt, const std::map<std::string, int>& assignment) {
  std::vector<int> levels;
  levels.reserve(cpt.parents().size());
  for (std::size_t i = 0; i < cpt.parents().size(); ++i) {
    auto it = assignment.find(cpt.parents()[i]);
    if (it == assignment.end()) throw Error(Errc::MissingParentValue, cpt.parents()[i]);
    if (it->second < 0 || it->second >= cpt.parent_cards()[i])
      throw Error(Errc::InvalidLevel, cpt.parents()[i] + "=" + std::to_string(it->second));
    levels.push_back(it->second);
  }
  return cpt.row_of(levels);
}

std::vector<int> resolve_evidence(const SurveySchema& schema, const Evidence& evidence) {
  std::vector<int> out(static_cast<std::size_t>(schema.size()), -1);
  for (const auto& [name, value] : evidence.assignments) {
    const int v = schema.require_index(name);
    const int level = schema[v].level_index(value);
    if (level < 0) throw Error(Errc::InvalidLevel, name + "='" + value + "'");
    out[v] = level;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BayesianNetwork

BayesianNetwork::BayesianNetwork(SurveySchema schema, Dag dag, std::vector<Cpt> cpts)
    : schema_(std::move(schema)), dag_(std::move(dag)), cpts_(std::move(cpts)) {
  if (dag_.nodes() != schema_.names())
    throw Error(Errc::InvalidConfig, "DAG nodes must equal the schema variables in schema order");
  if (static_cast<int>(cpts_.size()) != dag_.size())
    throw Error(Errc::InvalidTable, "one CPT per node required");
  for (int v = 0; v < dag_.size(); ++v) {
    const Cpt& cpt = cpts_[v];
    if (cpt.variable() != dag_.nodes()[v])
      throw Error(Errc::InvalidTable, "CPT " + std::to_string(v) + " is for " + cpt.variable());
    const auto& ps = dag_.parents(v);
    if (cpt.parents().size() != ps.size())
      throw Error(Errc::InvalidTable, cpt.variable() + ": parent list differs from DAG");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (cpt.parents()[i] != dag_.nodes()[ps[i]] || cpt.parent_cards()[i] != schema_[ps[i]].cardinality())
        throw Error(Errc::InvalidTable, cpt.variable() + ": parent list differs from DAG");
    }
    if (cpt.levels() != schema_[v].cardinality())
      throw Error(Errc::InvalidTable, cpt.variable() + ": column count differs from level count");
  }
  topo_ = topological_indices(dag_);
}

std::size_t BayesianNetwork::row_index(int node, std::span<const int> levels) const {
  std::size_t row = 0;
  for (int p : dag_.parents(node))
    row = row * static_cast<std::size_t>(schema_[p].cardinality()) + static_cast<std::size_t>(levels[p]);
  return row;
}

double BayesianNetwork::conditional(int node, std::span<const int> levels) const {
  return cpts_[node].table()(static_cast<Eigen::Index>(row_index(node, levels)), levels[node]);
}

double joint_probability(const BayesianNetwork& bn, std::span<const int> levels) {
  if (static_cast<int>(levels.size()) != bn.size())
    throw Error(Errc::IncompleteAssignment, "assignment must cover every node");
  for (int v = 0; v < bn.size(); ++v) {
    if (levels[v] < 0) throw Error(Errc::IncompleteAssignment, bn.dag().nodes()[v] + " unassigned");
    if (levels[v] >= bn.cardinality(v)) throw Error(Errc::InvalidLevel, bn.dag().nodes()[v]);
  }
  double p = 1.0;
  for (int v = 0; v < bn.size(); ++v) p *= bn.conditional(v, levels);
  return p;
}

double joint_probability(const BayesianNetwork& bn, const Evidence& fullAssignment) {
  return joint_probability(bn, resolve_evidence(bn.schema(), fullAssignment));
}

}  // namespace askless
