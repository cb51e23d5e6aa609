#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "icl/results.hpp"

namespace icl {

// A directional finding checked against the collected results. Status is
// PASS when the toy model shows the expected direction and OBSERVED
// otherwise (including when the needed results are absent).
struct Claim {
  std::string id;
  std::string claim;
  std::string observation;
  std::string status;
  nlohmann::json values = nlohmann::json::object();
};

struct Table {
  std::string name;  // file stem under the reports directory
  CsvRow header;
  std::vector<CsvRow> rows;
};

// Tables from versioned documents. Table set and headers do not depend on
// the input, so an empty input gives header-only tables.
std::vector<Table> build_tables(const std::vector<nlohmann::json>& docs);

std::vector<Claim> evaluate_claims(const std::vector<nlohmann::json>& docs);

nlohmann::json to_json(const Claim& c);

struct ReportSummary {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
  std::vector<Claim> claims;
  int documents = 0;
};

// Reads every result document under results_dir, writes one CSV per table
// and summary.json to reports_dir. Unreadable documents become warnings.
ReportSummary emit_report(const std::filesystem::path& results_dir,
                          const std::filesystem::path& reports_dir);

}  // namespace icl
