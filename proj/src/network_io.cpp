#include "askless/network_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace askless {

namespace {

constexpr double kDeserializeRowTolerance = 1e-6;

const Json& field(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key))
    throw Error(Errc::MalformedDocument, std::string("missing field '") + key + "'");
  return doc.at(key);
}

template <typename T>
T get_as(const Json& value, const char* what) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::MalformedDocument, std::string("field '") + what + "' has the wrong type");
  }
}

}  // namespace

Json schema_to_json(const SurveySchema& schema) {
  Json questions = Json::array();
  for (const auto& q : schema.questions()) {
    questions.push_back(
        {{"abbr", q.abbr}, {"text", q.text}, {"levels", q.levels}, {"role", std::string(to_string(q.role))}});
  }
  return {{"labelVar", schema.label_var()}, {"questions", questions}};
}

SurveySchema schema_from_json(const Json& doc) {
  const auto labelVar = get_as<std::string>(field(doc, "labelVar"), "labelVar");
  const Json& qs = field(doc, "questions");
  if (!qs.is_array()) throw Error(Errc::MalformedDocument, "'questions' must be an array");
  std::vector<QuestionSpec> questions;
  for (const Json& q : qs) {
    QuestionSpec spec;
    spec.abbr = get_as<std::string>(field(q, "abbr"), "abbr");
    spec.text = q.contains("text") ? get_as<std::string>(q.at("text"), "text") : std::string{};
    spec.levels = get_as<std::vector<std::string>>(field(q, "levels"), "levels");
    spec.role = q.contains("role") ? role_from_string(get_as<std::string>(q.at("role"), "role")) : Role::asked;
    questions.push_back(std::move(spec));
  }
  return SurveySchema(std::move(questions), labelVar);
}

Json network_to_json(const BayesianNetwork& bn) {
  Json nodes = Json::array();
  for (int v = 0; v < bn.size(); ++v) {
    const Cpt& cpt = bn.cpt(v);
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < cpt.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < cpt.levels(); ++c) row.push_back(cpt.table()(r, c));
      rows.push_back(std::move(row));
    }
    nodes.push_back({{"name", cpt.variable()},
                     {"levels", bn.schema()[v].levels},
                     {"parents", cpt.parents()},
                     {"cptRows", std::move(rows)}});
  }
  return {{"schema", schema_to_json(bn.schema())}, {"nodes", std::move(nodes)}};
}

BayesianNetwork network_from_json(const Json& doc) {
  SurveySchema schema = schema_from_json(field(doc, "schema"));
  const Json& nodes = field(doc, "nodes");
  if (!nodes.is_array() || static_cast<int>(nodes.size()) != schema.size())
    throw Error(Errc::MalformedDocument, "'nodes' must list every schema variable");

  std::vector<NamedEdge> edges;
  std::vector<std::vector<std::string>> parentLists;
  for (int v = 0; v < schema.size(); ++v) {
    const Json& node = nodes[static_cast<std::size_t>(v)];
    const auto name = get_as<std::string>(field(node, "name"), "name");
    if (name != schema[v].abbr)
      throw Error(Errc::MalformedDocument, "node " + std::to_string(v) + " is '" + name +
                                               "', expected '" + schema[v].abbr + "'");
    if (node.contains("levels") && get_as<std::vector<std::string>>(node.at("levels"), "levels") != schema[v].levels)
      throw Error(Errc::MalformedDocument, name + ": levels differ from schema");
    auto parents = get_as<std::vector<std::string>>(field(node, "parents"), "parents");
    for (const auto& p : parents) edges.emplace_back(p, name);
    parentLists.push_back(std::move(parents));
  }
  Dag dag = validate_dag(schema.names(), edges);

  std::vector<Cpt> cpts;
  for (int v = 0; v < schema.size(); ++v) {
    // Stored parent order must match the DAG's canonical (schema) order.
    std::vector<std::string> expected;
    std::vector<int> cards;
    for (int p : dag.parents(v)) {
      expected.push_back(schema[p].abbr);
      cards.push_back(schema[p].cardinality());
    }
    if (parentLists[v] != expected)
      throw Error(Errc::MalformedDocument, schema[v].abbr + ": parents must be listed in schema order");
    const Json& rows = field(nodes[static_cast<std::size_t>(v)], "cptRows");
    if (!rows.is_array()) throw Error(Errc::MalformedDocument, schema[v].abbr + ": cptRows must be an array");
    const auto levels = schema[v].cardinality();
    Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()), levels);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto row = get_as<std::vector<double>>(rows[r], "cptRows");
      if (static_cast<int>(row.size()) != levels)
        throw Error(Errc::InvalidTable, schema[v].abbr + ": row " + std::to_string(r) + " has wrong width");
      double sum = 0.0;
      for (double x : row) sum += x;
      if (std::abs(sum - 1.0) > kDeserializeRowTolerance)
        throw Error(Errc::InvalidTable, schema[v].abbr + ": row " + std::to_string(r) + " sums to " +
                                            std::to_string(sum));
      for (int c = 0; c < levels; ++c) table(static_cast<Eigen::Index>(r), c) = row[c] / sum;
    }
    cpts.emplace_back(schema[v].abbr, std::move(expected), std::move(cards), std::move(table));
  }
  return BayesianNetwork(std::move(schema), std::move(dag), std::move(cpts));
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedDocument, path.string() + ": " + e.what());
  }
}

void write_json_file(const Json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

void save_network(const BayesianNetwork& bn, const std::filesystem::path& path) {
  write_json_file(network_to_json(bn), path);
}

BayesianNetwork load_network(const std::filesystem::path& path) {
  return network_from_json(read_json_file(path));
}

}  // namespace askless
