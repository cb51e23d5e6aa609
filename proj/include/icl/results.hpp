#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icl/intervene.hpp"

namespace icl {

using nlohmann::json;

// Every persisted document carries "schema_version" ("<major>.<minor>") and
// "kind". Readers accept any minor revision of kSchemaMajor.
inline constexpr int kSchemaMajor = 1;
inline constexpr std::string_view kSchemaVersion = "1.0";

json to_json(const stats::RateCI& ci);
json to_json(const ExampleRecord& e);
json to_json(const ExperimentResult& r);  // kind "experiment"
ExperimentResult experiment_from_json(const json& doc);  // throws CorruptResult

// Throws CorruptResult when the version is missing, malformed or of
// another major revision.
void check_schema(const json& doc);

// Adds schema_version and kind to an object.
json envelope(std::string_view kind, json body);

// Deterministic text form: two-space indentation, keys sorted, trailing newline.
std::string dump(const json& doc);

// "<source>__<target>", or the target alone for single-task experiments.
std::string pair_dir(std::string_view source, std::string_view target);

// Experiment directory name: the experiment plus the parameters that
// distinguish sibling runs (layer, scope, site, variant).
std::string result_slug(const ExperimentResult& r);

// <root>/<slug>/<pair>/<seed>.json
std::filesystem::path result_path(const std::filesystem::path& root, const ExperimentResult& r);
std::filesystem::path write_result(const std::filesystem::path& root, const ExperimentResult& r);

// Non-experiment documents (probe sweeps, accuracies, ...):
// <root>/<dir>/<pair>/<seed>.json
std::filesystem::path write_document(const std::filesystem::path& root, std::string_view dir,
                                     std::string_view pair, std::uint64_t seed, const json& doc);

struct LoadedDocument {
  std::filesystem::path path;
  json doc;
};

// Every *.json below root in path order. Unreadable or unversioned files
// are skipped and described in `warnings`.
std::vector<LoadedDocument> load_documents(const std::filesystem::path& root,
                                           std::vector<std::string>& warnings);

using CsvRow = std::vector<std::string>;

// RFC 4180 quoting. Creates parent directories.
void write_csv(const std::filesystem::path& path, const CsvRow& header,
               const std::vector<CsvRow>& rows);
std::string csv_number(double v);
std::string csv_number(const std::optional<double>& v);  // empty when unset

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace icl
