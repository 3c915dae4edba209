#include "askless/survey.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "askless/rng.hpp"

namespace askless {

namespace bundled {
const std::string& schema_json();
const std::string& generator_json();
}  // namespace bundled

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr const char* kDisName = "DIS";
constexpr const char* kHeavyUseLevel = "4";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool sums_to_one(const std::vector<double>& p) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= kSumTolerance;
}

int sample_categorical(Rng& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Fills derived columns of one row. Only DIS has a derivation rule.
void fill_derived(LevelMatrix& values, Eigen::Index r, const SurveySchema& schema, const std::vector<int>& derived) {
  if (derived.empty()) return;
  std::vector<int> row(values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) row[c] = values(r, c);
  for (int d : derived) values(r, d) = derive_dis(row, schema);
}

}  // namespace

const std::string& default_schema_document() { return bundled::schema_json(); }

const SurveySchema& default_schema() {
  static const SurveySchema schema = load_schema(default_schema_document());
  return schema;
}

SurveySchema load_schema(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedDocument, e.what());
  }
  return schema_from_json(doc);
}

SurveySchema load_schema_file(const std::string& pathOrDefault) {
  if (pathOrDefault == "default") return default_schema();
  return schema_from_json(read_json_file(pathOrDefault));
}

// ---------------------------------------------------------------------------
// CSV

Dataset read_csv(std::istream& in, const SurveySchema& schema, bool requireLabel) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::EmptyFile, "no header row");
  strip_cr(line);
  if (line.empty()) throw Error(Errc::EmptyFile, "empty header row");
  const auto header = split(line);

  std::vector<int> columnOf;  // file column -> schema index
  std::vector<bool> present(static_cast<std::size_t>(schema.size()), false);
  for (const auto& name : header) {
    auto idx = schema.index_of(name);
    if (!idx) throw Error(Errc::UnknownColumn, "'" + name + "' is not in the schema");
    if (present[*idx]) throw Error(Errc::UnknownColumn, "column '" + name + "' appears twice");
    present[*idx] = true;
    columnOf.push_back(*idx);
  }
  std::vector<int> derived;
  for (int v = 0; v < schema.size(); ++v) {
    if (present[v]) continue;
    const auto& q = schema[v];
    if (q.role == Role::label) {
      if (requireLabel) throw Error(Errc::MissingColumn, "label column '" + q.abbr + "' is required");
    } else if (q.role == Role::derived && q.abbr == kDisName) {
      derived.push_back(v);
    } else {
      throw Error(Errc::MissingColumn, q.abbr);
    }
  }

  std::vector<std::vector<int>> rows;
  long lineNo = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++lineNo;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error(Errc::MalformedDocument, "row " + std::to_string(lineNo) + " has " + std::to_string(cells.size()) +
                                               " cells, expected " + std::to_string(header.size()));
    std::vector<int> row(static_cast<std::size_t>(schema.size()), -1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& q = schema[columnOf[c]];
      const int level = q.level_index(cells[c]);
      if (level < 0)
        throw Error(Errc::InvalidLevel, "row " + std::to_string(lineNo) + ", column " + q.abbr + ": '" + cells[c] +
                                            "' is not a level of " + q.abbr);
      row[columnOf[c]] = level;
    }
    rows.push_back(std::move(row));
  }

  Dataset data{schema, LevelMatrix(static_cast<Eigen::Index>(rows.size()), schema.size())};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int v = 0; v < schema.size(); ++v) data.values(static_cast<Eigen::Index>(r), v) = rows[r][v];
    fill_derived(data.values, static_cast<Eigen::Index>(r), schema, derived);
  }
  return data;
}

Dataset read_csv(const std::filesystem::path& path, const SurveySchema& schema, bool requireLabel) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return read_csv(in, schema, requireLabel);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const Dataset& data) {
  const bool withLabel = data.labeled() || (data.empty() && data.schema.label_index() >= 0);
  std::vector<int> columns;
  for (int v = 0; v < data.schema.size(); ++v)
    if (withLabel || v != data.schema.label_index()) columns.push_back(v);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << data.schema[columns[i]].abbr;
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (std::size_t i = 0; i < columns.size(); ++i)
      out << (i ? "," : "") << data.schema[columns[i]].levels[static_cast<std::size_t>(data.values(r, columns[i]))];
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_csv(out, data);
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Derived attribute

const std::vector<std::string>& dis_usage_questions() {
  static const std::vector<std::string> names{"MBROW", "MEMAIL", "MBANK", "MVID", "GPS", "SMP"};
  return names;
}

namespace {

std::string dis_bucket(int heavy) {
  if (heavy <= 1) return "low";
  if (heavy <= 3) return "med";
  return "high";
}

}  // namespace

std::string derive_dis(const std::map<std::string, std::string>& row, const SurveySchema& schema) {
  int heavy = 0;
  for (const auto& name : dis_usage_questions()) {
    auto it = row.find(name);
    if (it == row.end()) throw Error(Errc::MissingUsageAnswer, name);
    const auto& q = schema[schema.require_index(name)];
    const int level = q.level_index(it->second);
    if (level < 0) throw Error(Errc::InvalidLevel, name + "='" + it->second + "'");
    if (level >= q.level_index(kHeavyUseLevel)) ++heavy;
  }
  return dis_bucket(heavy);
}

int derive_dis(std::span<const int> row, const SurveySchema& schema) {
  int heavy = 0;
  for (const auto& name : dis_usage_questions()) {
    const int v = schema.require_index(name);
    const int level = row[v];
    if (level < 0) throw Error(Errc::MissingUsageAnswer, name);
    const int threshold = schema[v].level_index(kHeavyUseLevel);
    if (threshold < 0) throw Error(Errc::InvalidConfig, name + " has no level \"4\"");
    if (level >= threshold) ++heavy;
  }
  const int dis = schema.require_index(kDisName);
  const int level = schema[dis].level_index(dis_bucket(heavy));
  if (level < 0) throw Error(Errc::InvalidConfig, "DIS levels must be low, med, high");
  return level;
}

// ---------------------------------------------------------------------------
// Generator

const std::string& default_generator_document() { return bundled::generator_json(); }

GeneratorConfig generator_config_from_json(const Json& doc) {
  try {
    GeneratorConfig config;
    config.segmentPrior = doc.at("segmentPrior").get<std::vector<double>>();
    config.responseProfiles =
        doc.at("responseProfiles").get<std::map<std::string, std::map<std::string, std::vector<double>>>>();
    if (doc.contains("noise")) config.noise = doc.at("noise").get<double>();
    if (doc.contains("rows")) config.rows = doc.at("rows").get<long>();
    if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedDocument, std::string("generator config: ") + e.what());
  }
}

Json generator_config_to_json(const GeneratorConfig& config) {
  return {{"segmentPrior", config.segmentPrior},
          {"responseProfiles", config.responseProfiles},
          {"noise", config.noise},
          {"rows", config.rows},
          {"seed", config.seed}};
}

GeneratorConfig default_generator_config() {
  return generator_config_from_json(Json::parse(default_generator_document()));
}

GeneratorConfig load_generator_config(const std::string& pathOrDefault) {
  if (pathOrDefault == "default") return default_generator_config();
  return generator_config_from_json(read_json_file(pathOrDefault));
}

Dataset generate_synthetic(const SurveySchema& schema, const GeneratorConfig& config) {
  const int label = schema.label_index();
  const auto& segments = schema[label].levels;
  if (config.segmentPrior.size() != segments.size())
    throw Error(Errc::ProfileSchemaMismatch, "segmentPrior needs one entry per level of " + schema.label_var());
  if (!sums_to_one(config.segmentPrior)) throw Error(Errc::InvalidConfig, "segmentPrior must sum to 1");
  if (!(config.noise >= 0.0 && config.noise <= 1.0)) throw Error(Errc::InvalidConfig, "noise must be in [0,1]");
  if (config.rows < 0) throw Error(Errc::InvalidConfig, "rows must be >= 0");

  std::vector<int> asked, derived;
  for (int v = 0; v < schema.size(); ++v) {
    if (schema[v].role == Role::asked) asked.push_back(v);
    if (schema[v].role == Role::derived) {
      if (schema[v].abbr != kDisName)
        throw Error(Errc::ProfileSchemaMismatch, "no derivation rule for derived variable " + schema[v].abbr);
      derived.push_back(v);
    }
  }
  for (const auto& [segment, profile] : config.responseProfiles) {
    if (schema[label].level_index(segment) < 0)
      throw Error(Errc::ProfileSchemaMismatch, "profile for unknown segment '" + segment + "'");
    for (const auto& [question, dist] : profile) {
      auto v = schema.index_of(question);
      if (!v || schema[*v].role != Role::asked)
        throw Error(Errc::ProfileSchemaMismatch, segment + ": '" + question + "' is not an asked question");
    }
  }

  // Mixed distributions, [segment][asked position][level].
  std::vector<std::vector<std::vector<double>>> mixed(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    auto it = config.responseProfiles.find(segments[s]);
    if (it == config.responseProfiles.end())
      throw Error(Errc::ProfileSchemaMismatch, "no profile for segment " + segments[s]);
    for (int v : asked) {
      const auto& q = schema[v];
      auto dist = it->second.find(q.abbr);
      if (dist == it->second.end())
        throw Error(Errc::ProfileSchemaMismatch, segments[s] + ": no distribution for " + q.abbr);
      if (static_cast<int>(dist->second.size()) != q.cardinality())
        throw Error(Errc::ProfileSchemaMismatch, segments[s] + "/" + q.abbr + ": expected " +
                                                     std::to_string(q.cardinality()) + " probabilities");
      if (!sums_to_one(dist->second))
        throw Error(Errc::InvalidConfig, segments[s] + "/" + q.abbr + ": profile must sum to 1");
      std::vector<double> p(dist->second.size());
      for (std::size_t l = 0; l < p.size(); ++l)
        p[l] = (1.0 - config.noise) * dist->second[l] + config.noise / static_cast<double>(p.size());
      mixed[s].push_back(std::move(p));
    }
  }

  Rng rng(config.seed);
  Dataset data{schema, LevelMatrix(config.rows, schema.size())};
  for (Eigen::Index r = 0; r < config.rows; ++r) {
    const int segment = sample_categorical(rng, config.segmentPrior);
    data.values(r, label) = segment;
    for (std::size_t a = 0; a < asked.size(); ++a) data.values(r, asked[a]) = sample_categorical(rng, mixed[segment][a]);
    fill_derived(data.values, r, schema, derived);
  }
  return data;
}

}  // namespace askless
