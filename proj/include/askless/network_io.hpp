#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "askless/core.hpp"

namespace askless {

using Json = nlohmann::json;

// {"labelVar": "...", "questions": [{"abbr","text","levels","role"}]}
Json schema_to_json(const SurveySchema& schema);
// Errors: MalformedDocument, DuplicateAbbr, MissingLabelVar.
SurveySchema schema_from_json(const Json& doc);

// {"schema": {...}, "nodes": [{"name","levels","parents","cptRows"}]}.
// cptRows lists table rows in mixed-radix order, last parent fastest.
Json network_to_json(const BayesianNetwork& bn);
// Rows within 1e-6 of summing to 1 are renormalized; others are rejected
// with InvalidTable.
BayesianNetwork network_from_json(const Json& doc);

void save_network(const BayesianNetwork& bn, const std::filesystem::path& path);
BayesianNetwork load_network(const std::filesystem::path& path);

// Reads and parses a JSON file. Errors: Io, MalformedDocument.
Json read_json_file(const std::filesystem::path& path);
// Writes `doc` pretty-printed with a trailing newline. Errors: Io.
void write_json_file(const Json& doc, const std::filesystem::path& path);

}  // namespace askless
