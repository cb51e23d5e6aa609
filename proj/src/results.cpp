#include "icl/results.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "icl/error.hpp"

namespace icl {

namespace fs = std::filesystem;

json to_json(const stats::RateCI& ci) {
  return {{"successes", ci.successes}, {"n", ci.n},         {"point", ci.point},
          {"lower", ci.lower},         {"upper", ci.upper}, {"z", ci.z}};
}

json to_json(const ExampleRecord& e) {
  json j = {{"index", e.index},       {"query", e.query},   {"expected", e.expected},
            {"generated", e.generated}, {"label", e.label}, {"edited", e.edited},
            {"unaligned", e.unaligned}};
  if (!e.failure.empty()) j["failure"] = e.failure;
  if (e.correct) j["correct"] = *e.correct;
  if (e.clean_correct) j["clean_correct"] = *e.clean_correct;
  return j;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::CorruptResult, std::string("missing field ") + key);
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptResult, std::string("field ") + key + ": " + e.what());
  }
}

std::optional<double> optional_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw Error(ErrorCode::CorruptResult, std::string("field ") + key);
  return it->get<double>();
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '.';
  }
  return s;
}

}  // namespace

json to_json(const ExperimentResult& r) {
  json counts = {{"transfer", r.counts.transfer},
                 {"preserve", r.counts.preserve},
                 {"malformed", r.counts.malformed},
                 {"ambiguous", r.counts.ambiguous},
                 {"skipped", r.counts.skipped}};
  json examples = json::array();
  for (const auto& e : r.examples) examples.push_back(to_json(e));
  json seeds = json::object();
  for (const auto& [k, v] : r.seeds) seeds[k] = v;
  json body = {{"experiment", r.experiment},
               {"source", r.source},
               {"target", r.target},
               {"layers", r.layers},
               {"scope", r.scope},
               {"site", r.site},
               {"persistence", r.persistence},
               {"counts", counts},
               {"n_total", r.n_total},
               {"tau", optional_number(r.tau)},
               {"ci", r.ci ? to_json(*r.ci) : json(nullptr)},
               {"accuracy", optional_number(r.accuracy)},
               {"clean_accuracy", optional_number(r.clean_accuracy)},
               {"delta", optional_number(r.delta)},
               {"examples", examples},
               {"seeds", seeds},
               {"config", r.config},
               {"warnings", r.warnings}};
  return envelope("experiment", std::move(body));
}

void check_schema(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::CorruptResult, "document is not an object");
  const auto it = doc.find("schema_version");
  if (it == doc.end() || !it->is_string()) {
    throw Error(ErrorCode::CorruptResult, "missing schema_version");
  }
  const std::string v = it->get<std::string>();
  int major = -1;
  const auto dot = v.find('.');
  const auto res = std::from_chars(v.data(), v.data() + (dot == std::string::npos ? v.size() : dot), major);
  if (res.ec != std::errc() || dot == std::string::npos) {
    throw Error(ErrorCode::CorruptResult, "malformed schema_version " + v);
  }
  if (major != kSchemaMajor) {
    throw Error(ErrorCode::CorruptResult, "unsupported schema_version " + v);
  }
}

ExperimentResult experiment_from_json(const json& doc) {
  check_schema(doc);
  if (field<std::string>(doc, "kind") != "experiment") {
    throw Error(ErrorCode::CorruptResult, "not an experiment document");
  }
  ExperimentResult r;
  r.experiment = field<std::string>(doc, "experiment");
  r.source = field<std::string>(doc, "source");
  r.target = field<std::string>(doc, "target");
  r.layers = field<std::vector<int>>(doc, "layers");
  r.scope = field<std::string>(doc, "scope");
  r.site = field<std::string>(doc, "site");
  r.persistence = field<std::string>(doc, "persistence");
  const json counts = field<json>(doc, "counts");
  r.counts.transfer = field<int>(counts, "transfer");
  r.counts.preserve = field<int>(counts, "preserve");
  r.counts.malformed = field<int>(counts, "malformed");
  r.counts.ambiguous = field<int>(counts, "ambiguous");
  r.counts.skipped = field<int>(counts, "skipped");
  r.n_total = field<int>(doc, "n_total");
  r.tau = optional_field(doc, "tau");
  if (const auto it = doc.find("ci"); it != doc.end() && !it->is_null()) {
    r.ci = stats::RateCI{field<int>(*it, "successes"), field<int>(*it, "n"),
                         field<double>(*it, "point"),  field<double>(*it, "lower"),
                         field<double>(*it, "upper"),  field<double>(*it, "z")};
  }
  r.accuracy = optional_field(doc, "accuracy");
  r.clean_accuracy = optional_field(doc, "clean_accuracy");
  r.delta = optional_field(doc, "delta");
  for (const auto& e : field<json>(doc, "examples")) {
    ExampleRecord rec;
    rec.index = field<int>(e, "index");
    rec.query = field<std::string>(e, "query");
    rec.expected = field<std::string>(e, "expected");
    rec.generated = field<std::string>(e, "generated");
    rec.label = field<std::string>(e, "label");
    rec.edited = field<int>(e, "edited");
    rec.unaligned = field<int>(e, "unaligned");
    if (e.contains("failure")) rec.failure = field<std::string>(e, "failure");
    if (e.contains("correct")) rec.correct = field<bool>(e, "correct");
    if (e.contains("clean_correct")) rec.clean_correct = field<bool>(e, "clean_correct");
    r.examples.push_back(std::move(rec));
  }
  const json seeds = field<json>(doc, "seeds");
  for (const auto& [k, v] : seeds.items()) {
    if (!v.is_number_unsigned()) throw Error(ErrorCode::CorruptResult, "seed " + k);
    r.seeds[k] = v.get<std::uint64_t>();
  }
  r.config = field<json>(doc, "config");
  r.warnings = field<std::vector<std::string>>(doc, "warnings");
  if (r.counts.total() != r.n_total || static_cast<int>(r.examples.size()) != r.n_total) {
    throw Error(ErrorCode::CorruptResult, "counts do not sum to n_total");
  }
  return r;
}

json envelope(std::string_view kind, json body) {
  body["schema_version"] = std::string(kSchemaVersion);
  body["kind"] = std::string(kind);
  return body;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string pair_dir(std::string_view source, std::string_view target) {
  if (source.empty()) return std::string(target);
  return std::string(source) + "__" + std::string(target);
}

std::string result_slug(const ExperimentResult& r) {
  std::string slug = sanitize(r.experiment);
  slug += ".L";
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    if (i) slug += "_";
    slug += std::to_string(r.layers[i]);
  }
  if (!r.scope.empty()) slug += "." + r.scope;
  if (r.site != "post_block" || r.persistence != "initial_pass_only") {
    slug += "." + r.site + "." + r.persistence;
  }
  if (const auto it = r.config.find("variant"); it != r.config.end() && it->is_string()) {
    slug += "." + sanitize(it->get<std::string>());
  }
  return slug;
}

fs::path result_path(const fs::path& root, const ExperimentResult& r) {
  const auto it = r.seeds.find("master");
  const std::uint64_t seed = it == r.seeds.end() ? 0 : it->second;
  return root / result_slug(r) / pair_dir(r.source, r.target) / (std::to_string(seed) + ".json");
}

fs::path write_result(const fs::path& root, const ExperimentResult& r) {
  const fs::path p = result_path(root, r);
  write_text(p, dump(to_json(r)));
  return p;
}

fs::path write_document(const fs::path& root, std::string_view dir, std::string_view pair,
                        std::uint64_t seed, const json& doc) {
  const fs::path p = root / sanitize(std::string(dir)) / std::string(pair) / (std::to_string(seed) + ".json");
  write_text(p, dump(doc));
  return p;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::BadConfig, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::BadConfig, "write failed for " + path.string());
}

std::vector<LoadedDocument> load_documents(const fs::path& root, std::vector<std::string>& warnings) {
  std::vector<LoadedDocument> docs;
  if (!fs::exists(root)) {
    warnings.push_back("results directory " + root.string() + " does not exist");
    return docs;
  }
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    try {
      std::ifstream in(p, std::ios::binary);
      json doc = json::parse(in);
      check_schema(doc);
      docs.push_back({p, std::move(doc)});
    } catch (const Error& e) {
      warnings.push_back(p.string() + ": " + e.what());
    } catch (const json::exception& e) {
      warnings.push_back(p.string() + ": CorruptResult: " + e.what());
    }
  }
  return docs;
}

namespace {

std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_csv(const fs::path& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  auto line = [&](const CsvRow& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << quote(row[i]);
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  write_text(path, out.str());
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

}  // namespace icl
