#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "askless/core.hpp"
#include "askless/learning.hpp"
#include "askless/network_io.hpp"

namespace askless {

// The 24-variable questionnaire: 22 asked questions, DIS (derived) and the
// SGV2 segment label.
const SurveySchema& default_schema();
const std::string& default_schema_document();

// Errors: MalformedDocument, DuplicateAbbr, MissingLabelVar.
SurveySchema load_schema(std::string_view document);
// "default" selects the bundled schema.
SurveySchema load_schema_file(const std::string& pathOrDefault);

// Comma-separated, header row first, no quoting. A derived column absent
// from the file is computed from the answers.
// Errors: Io, EmptyFile, UnknownColumn, MissingColumn, InvalidLevel (with
// 1-based data row and column name).
Dataset read_csv(const std::filesystem::path& path, const SurveySchema& schema, bool requireLabel);
Dataset read_csv(std::istream& in, const SurveySchema& schema, bool requireLabel);
// Columns in schema order; the label column is omitted when unlabeled.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Usage questions that feed the derived DIS attribute.
const std::vector<std::string>& dis_usage_questions();

// Count of usage answers at level "4" or above: <=1 low, 2-3 med, >=4 high.
// Errors: MissingUsageAnswer, InvalidLevel.
std::string derive_dis(const std::map<std::string, std::string>& row, const SurveySchema& schema);
// Index form over a full row of level indices; returns the DIS level index.
int derive_dis(std::span<const int> row, const SurveySchema& schema);

struct GeneratorConfig {
  // Aligned with the label variable's levels.
  std::vector<double> segmentPrior;
  // segment label -> asked question -> distribution over that question's levels.
  std::map<std::string, std::map<std::string, std::vector<double>>> responseProfiles;
  double noise = 0.15;
  long rows = 10000;
  std::uint64_t seed = 42;
};

const std::string& default_generator_document();
GeneratorConfig default_generator_config();
GeneratorConfig generator_config_from_json(const Json& doc);
Json generator_config_to_json(const GeneratorConfig& config);
// "default" selects the bundled configuration.
GeneratorConfig load_generator_config(const std::string& pathOrDefault);

// Samples a segment from the prior, then each asked question from
// (1 - noise) * profile + noise * uniform, then derived columns.
// Errors: InvalidConfig, ProfileSchemaMismatch.
Dataset generate_synthetic(const SurveySchema& schema, const GeneratorConfig& config);

}  // namespace askless
