#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "askless/error.hpp"

namespace askless {

enum class Role { asked, derived, label };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct QuestionSpec {
  std::string abbr;
  std::string text;
  std::vector<std::string> levels;
  Role role = Role::asked;

  // Position of `level` in `levels`, or -1.
  int level_index(std::string_view level) const;
  int cardinality() const { return static_cast<int>(levels.size()); }
};

// The questionnaire. Exactly one question carries Role::label.
class SurveySchema {
 public:
  SurveySchema() = default;
  SurveySchema(std::vector<QuestionSpec> questions, std::string labelVar);

  const std::vector<QuestionSpec>& questions() const { return questions_; }
  const QuestionSpec& operator[](int i) const { return questions_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(questions_.size()); }

  const std::string& label_var() const { return label_var_; }
  int label_index() const { return label_index_; }

  std::optional<int> index_of(std::string_view abbr) const;
  // Throws UnknownVariable.
  int require_index(std::string_view abbr) const;

  std::vector<std::string> names() const;
  std::vector<int> cardinalities() const;
  // Names with Role::asked, in schema order.
  std::vector<std::string> asked_questions() const;

  bool operator==(const SurveySchema& other) const;

 private:
  std::vector<QuestionSpec> questions_;
  std::string label_var_;
  int label_index_ = -1;
};

using NamedEdge = std::pair<std::string, std::string>;
using IndexEdge = std::pair<int, int>;

// Directed acyclic graph over declared nodes. Build through validate_dag.
class Dag {
 public:
  Dag() = default;

  const std::vector<std::string>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  // Sorted (parent, child) index pairs.
  const std::vector<IndexEdge>& edges() const { return edges_; }
  std::vector<NamedEdge> named_edges() const;
  // Parent indices in ascending (declaration) order.
  const std::vector<int>& parents(int node) const { return parents_[static_cast<std::size_t>(node)]; }
  const std::vector<int>& children(int node) const { return children_[static_cast<std::size_t>(node)]; }
  bool has_edge(int parent, int child) const;

  std::optional<int> index_of(std::string_view name) const;

  bool operator==(const Dag& other) const { return nodes_ == other.nodes_ && edges_ == other.edges_; }

 private:
  friend Dag validate_dag(std::vector<std::string> nodes, const std::vector<IndexEdge>& edges);

  std::vector<std::string> nodes_;
  std::vector<IndexEdge> edges_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
};

// Errors: CycleDetected (message names one cycle), UnknownNode, DuplicateEdge,
// SelfLoop, and InvalidConfig for an empty or duplicated node list.
Dag validate_dag(std::vector<std::string> nodes, const std::vector<NamedEdge>& edges);
Dag validate_dag(std::vector<std::string> nodes, const std::vector<IndexEdge>& edges);

// Parents before children; among ready nodes the earliest declared goes first.
std::vector<int> topological_indices(const Dag& dag);
std::vector<std::string> topological_order(const Dag& dag);

// Conditional probability table. Rows are parent configurations in
// mixed-radix order over `parents` (last parent varies fastest); columns
// are the variable's levels.
class Cpt {
 public:
  static constexpr double kRowTolerance = 1e-9;

  Cpt() = default;
  // Throws InvalidTable unless rows == prod(parentCards), every entry is in
  // [0,1] and every row sums to 1 within kRowTolerance.
  Cpt(std::string variable, std::vector<std::string> parents, std::vector<int> parentCards,
      Eigen::MatrixXd table);

  const std::string& variable() const { return variable_; }
  const std::vector<std::string>& parents() const { return parents_; }
  const std::vector<int>& parent_cards() const { return parent_cards_; }
  const Eigen::MatrixXd& table() const { return table_; }
  Eigen::Index rows() const { return table_.rows(); }
  Eigen::Index levels() const { return table_.cols(); }

  // Row index for parent level indices given in `parents()` order.
  std::size_t row_of(std::span<const int> parentLevels) const;

 private:
  std::string variable_;
  std::vector<std::string> parents_;
  std::vector<int> parent_cards_;
  Eigen::MatrixXd table_;
};

// `assignment` maps variable names to level indices; extra entries are ignored.
// Errors: MissingParentValue, InvalidLevel.
std::size_t parent_config_index(const Cpt& cpt, const std::map<std::string, int>& assignment);

// Partial answer set: variable abbr -> level label.
struct Evidence {
  std::map<std::string, std::string> assignments;

  bool empty() const { return assignments.empty(); }
  std::size_t size() const { return assignments.size(); }
  bool contains(const std::string& name) const { return assignments.count(name) != 0; }
};

// Level index per schema variable, -1 where unobserved.
// Errors: UnknownVariable, InvalidLevel.
std::vector<int> resolve_evidence(const SurveySchema& schema, const Evidence& evidence);

class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  // The DAG must declare exactly the schema variables in schema order, and
  // cpts[v] must list dag.parents(v) in that order with |levels(v)| columns.
  BayesianNetwork(SurveySchema schema, Dag dag, std::vector<Cpt> cpts);

  const SurveySchema& schema() const { return schema_; }
  const Dag& dag() const { return dag_; }
  const Cpt& cpt(int node) const { return cpts_[static_cast<std::size_t>(node)]; }
  const std::vector<Cpt>& cpts() const { return cpts_; }
  int size() const { return dag_.size(); }
  int cardinality(int node) const { return schema_[node].cardinality(); }
  const std::vector<int>& topological() const { return topo_; }

  // Row of node's CPT selected by a full (or parent-covering) assignment of
  // level indices indexed by node.
  std::size_t row_index(int node, std::span<const int> levels) const;
  double conditional(int node, std::span<const int> levels) const;

 private:
  SurveySchema schema_;
  Dag dag_;
  std::vector<Cpt> cpts_;
  std::vector<int> topo_;
};

// Product of CPT entries. Errors: IncompleteAssignment, InvalidLevel.
double joint_probability(const BayesianNetwork& bn, std::span<const int> levels);
double joint_probability(const BayesianNetwork& bn, const Evidence& fullAssignment);

}  // namespace askless
