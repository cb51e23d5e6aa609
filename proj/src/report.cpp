#include "icl/report.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "icl/error.hpp"
#include "icl/prompt.hpp"
#include "icl/stats.hpp"
#include "icl/tasks.hpp"

namespace icl {

using nlohmann::json;

namespace {

std::string str(const json& j, const char* key) {
  const auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::optional<double> num(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

int integer(const json& j, const char* key) {
  const auto it = j.find(key);
  return it != j.end() && it->is_number_integer() ? it->get<int>() : 0;
}

int first_layer(const json& doc) {
  const auto it = doc.find("layers");
  if (it == doc.end() || !it->is_array() || it->empty()) return -1;
  return (*it)[0].get<int>();
}

std::string kind_of(const json& doc) { return str(doc, "kind"); }

std::vector<const json*> of_kind(const std::vector<json>& docs, const std::string& kind) {
  std::vector<const json*> out;
  for (const auto& d : docs) {
    if (kind_of(d) == kind) out.push_back(&d);
  }
  return out;
}

std::vector<const json*> experiments(const std::vector<json>& docs, const std::string& prefix) {
  std::vector<const json*> out;
  for (const auto* d : of_kind(docs, "experiment")) {
    const std::string e = str(*d, "experiment");
    if (e == prefix || e.rfind(prefix + "/", 0) == 0) out.push_back(d);
  }
  return out;
}

bool singleton_scope(const std::string& scope) {
  try {
    return is_singleton(parse_scope(scope));
  } catch (const Error&) {
    return false;
  }
}

std::string ci_bound(const json& doc, const char* key) {
  const auto it = doc.find("ci");
  if (it == doc.end() || !it->is_object()) return "";
  return csv_number(num(*it, key));
}

CsvRow transfer_row(const json& d) {
  const auto& c = d.at("counts");
  return {str(d, "source"),
          str(d, "target"),
          std::to_string(first_layer(d)),
          str(d, "scope"),
          str(d, "site"),
          str(d, "persistence"),
          std::to_string(integer(d, "n_total")),
          std::to_string(integer(c, "transfer")),
          std::to_string(integer(c, "preserve")),
          std::to_string(integer(c, "malformed")),
          std::to_string(integer(c, "ambiguous")),
          std::to_string(integer(c, "skipped")),
          csv_number(num(d, "tau")),
          ci_bound(d, "lower"),
          ci_bound(d, "upper")};
}

const CsvRow kTransferHeader = {"source",   "target",   "layer",     "scope",   "site",
                                "persistence", "n",     "transfer",  "preserve", "malformed",
                                "ambiguous", "skipped", "tau",       "ci_lower", "ci_upper"};

void sort_rows(std::vector<CsvRow>& rows) { std::stable_sort(rows.begin(), rows.end()); }

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<Table> build_tables(const std::vector<json>& docs) {
  std::vector<Table> tables;

  {
    Table t{"task_suite", {"task", "regime", "core", "domain_size", "template", "domain"}, {}};
    for (const auto& spec : task_registry()) {
      t.rows.push_back({spec.name, std::string(to_string(spec.regime)), spec.core ? "yes" : "no",
                        std::to_string(spec.domain.size()), spec.output_template.name,
                        spec.domain_description});
    }
    tables.push_back(std::move(t));
  }

  {
    Table t{"fewshot_accuracy", {"task", "k", "n", "accuracy"}, {}};
    for (const auto* d : of_kind(docs, "eval")) {
      for (const auto& r : d->value("rows", json::array())) {
        t.rows.push_back({str(r, "task"), std::to_string(integer(r, "k")),
                          std::to_string(integer(r, "n")), csv_number(num(r, "accuracy"))});
      }
    }
    sort_rows(t.rows);
    tables.push_back(std::move(t));
  }

  {
    Table t{"probe_accuracy", {"layer", "position", "task", "accuracy"}, {}};
    for (const auto* d : of_kind(docs, "probe")) {
      for (const auto& r : d->value("rows", json::array())) {
        t.rows.push_back({std::to_string(integer(r, "layer")), str(r, "position"), str(r, "task"),
                          csv_number(num(r, "accuracy"))});
      }
    }
    tables.push_back(std::move(t));
  }

  {
    // Single-position interventions: transplants at one position plus the
    // zero/random ablations that test necessity at the same positions.
    Table t{"single_position",
            {"experiment", "source", "target", "layer", "position", "n", "tau", "ci_lower",
             "ci_upper", "accuracy", "clean_accuracy"},
            {}};
    for (const auto& d : docs) {
      if (kind_of(d) != "experiment") continue;
      const std::string e = str(d, "experiment");
      if (e != "transfer" && e != "ablate_zero" && e != "ablate_random") continue;
      if (!singleton_scope(str(d, "scope"))) continue;
      t.rows.push_back({e, str(d, "source"), str(d, "target"), std::to_string(first_layer(d)),
                        str(d, "scope"), std::to_string(integer(d, "n_total")),
                        csv_number(num(d, "tau")), ci_bound(d, "lower"), ci_bound(d, "upper"),
                        csv_number(num(d, "accuracy")), csv_number(num(d, "clean_accuracy"))});
    }
    sort_rows(t.rows);
    tables.push_back(std::move(t));
  }

  {
    Table t{"multi_position", kTransferHeader, {}};
    for (const auto* d : experiments(docs, "transfer")) {
      if (!singleton_scope(str(*d, "scope"))) t.rows.push_back(transfer_row(*d));
    }
    sort_rows(t.rows);
    tables.push_back(std::move(t));
  }

  {
    Table t{"causal_tracing",
            {"task", "position", "layer", "n", "clean_accuracy", "noised_accuracy", "delta", "alpha"},
            {}};
    for (const auto* d : experiments(docs, "trace")) {
      const json cfg = d->value("config", json::object());
      t.rows.push_back({str(*d, "target"), str(*d, "scope"), std::to_string(first_layer(*d)),
                        std::to_string(integer(*d, "n_total")), csv_number(num(*d, "clean_accuracy")),
                        csv_number(num(*d, "accuracy")), csv_number(num(*d, "delta")),
                        csv_number(num(cfg, "alpha"))});
    }
    sort_rows(t.rows);
    tables.push_back(std::move(t));
  }

  {
    Table t{"controls",
            {"source", "target", "layer", "scope", "control", "distractor", "n", "tau", "ci_lower",
             "ci_upper"},
            {}};
    for (const auto* d : experiments(docs, "controls")) {
      const std::string e = str(*d, "experiment");
      const json cfg = d->value("config", json::object());
      t.rows.push_back({str(*d, "source"), str(*d, "target"), std::to_string(first_layer(*d)),
                        str(*d, "scope"), e.substr(e.find('/') + 1), str(cfg, "distractor"),
                        std::to_string(integer(*d, "n_total")), csv_number(num(*d, "tau")),
                        ci_bound(*d, "lower"), ci_bound(*d, "upper")});
    }
    sort_rows(t.rows);
    tables.push_back(std::move(t));
  }

  const auto cells = experiments(docs, "matrix");
  {
    std::set<std::string> names;
    std::map<std::pair<std::string, std::string>, std::string> value;
    for (const auto* d : cells) {
      names.insert(str(*d, "source"));
      names.insert(str(*d, "target"));
      value[{str(*d, "source"), str(*d, "target")}] = csv_number(num(*d, "tau"));
    }
    Table t{"transfer_matrix", {"source"}, {}};
    for (const auto& n : names) t.header.push_back(n);
    for (const auto& a : names) {
      CsvRow row{a};
      for (const auto& b : names) {
        const auto it = value.find({a, b});
        row.push_back(a == b ? "" : (it == value.end() ? "" : it->second));
      }
      t.rows.push_back(std::move(row));
    }
    tables.push_back(std::move(t));

    Table l{"transfer_matrix_long", kTransferHeader, {}};
    for (const auto* d : cells) l.rows.push_back(transfer_row(*d));
    sort_rows(l.rows);
    tables.push_back(std::move(l));

    int high = 0, medium = 0, low = 0;
    for (const auto* d : cells) {
      const double v = num(*d, "tau").value_or(0.0);
      if (v >= 0.5) ++high;
      else if (v >= 0.1) ++medium;
      else ++low;
    }
    Table dist{"transfer_distribution", {"bucket", "pairs"}, {}};
    if (!cells.empty()) {
      dist.rows = {{">=0.5", std::to_string(high)},
                   {"0.1-0.5", std::to_string(medium)},
                   {"<0.1", std::to_string(low)},
                   {"total", std::to_string(cells.size())}};
    }
    tables.push_back(std::move(dist));
  }

  {
    Table t{"transfer_similarity",
            {"layer", "scope", "measure", "r", "p", "n_perm", "pairs", "asymmetric_pairs"},
            {}};
    for (const auto* d : of_kind(docs, "matrix_summary")) {
      const json& c = d->value("surface_vs_tau", json());
      std::string asym;
      for (const auto& p : d->value("asymmetric", json::array())) {
        if (!asym.empty()) asym += ";";
        asym += p[0].get<std::string>() + "<->" + p[1].get<std::string>();
      }
      t.rows.push_back({std::to_string(integer(*d, "layer")), str(*d, "scope"), "surface",
                        c.is_object() ? csv_number(num(c, "r")) : "",
                        c.is_object() ? csv_number(num(c, "p")) : "",
                        c.is_object() ? std::to_string(integer(c, "n_perm")) : "",
                        std::to_string(integer(*d, "pairs")), asym});
    }
    tables.push_back(std::move(t));
  }

  for (const std::string axis : {"position_count", "source_demos", "target_demos"}) {
    // One row per grid point: random subsets of the same size are averaged.
    std::map<std::tuple<std::string, std::string, int, std::string, int>, std::vector<double>> points;
    std::map<std::tuple<std::string, std::string, int, std::string, int>, int> undefined;
    for (const auto* d : experiments(docs, "scaling")) {
      if (str(*d, "experiment") != "scaling/" + axis) continue;
      const json cfg = d->value("config", json::object());
      std::string variant = str(cfg, "variant");
      if (const auto dot = variant.find(".s"); dot != std::string::npos) variant = variant.substr(0, dot);
      const auto key = std::make_tuple(str(*d, "source"), str(*d, "target"), first_layer(*d), variant,
                                       integer(cfg, "axis_value"));
      if (const auto tau = num(*d, "tau")) points[key].push_back(*tau);
      else ++undefined[key];
    }
    Table t{axis, {"source", "target", "layer", "point", "value", "runs", "tau_mean", "tau_min", "tau_max"}, {}};
    std::set<std::tuple<std::string, std::string, int, std::string, int>> keys;
    for (const auto& [k, _] : points) keys.insert(k);
    for (const auto& [k, _] : undefined) keys.insert(k);
    for (const auto& k : keys) {
      const auto& v = points[k];
      const int runs = static_cast<int>(v.size()) + undefined[k];
      t.rows.push_back({std::get<0>(k), std::get<1>(k), std::to_string(std::get<2>(k)), std::get<3>(k),
                        std::to_string(std::get<4>(k)), std::to_string(runs),
                        v.empty() ? "" : csv_number(mean(v)),
                        v.empty() ? "" : csv_number(*std::min_element(v.begin(), v.end())),
                        v.empty() ? "" : csv_number(*std::max_element(v.begin(), v.end()))});
    }
    tables.push_back(std::move(t));
  }

  {
    Table sim{"task_similarity", {"task"}, {}};
    Table cl{"task_clustering",
             {"layer", "position", "k", "silhouette", "agreement", "p_value", "n_perm", "labels", "warning"},
             {}};
    for (const auto* d : of_kind(docs, "stats")) {
      const auto tasks = d->value("tasks", std::vector<std::string>{});
      const auto cos = d->value("cosine", std::vector<std::vector<double>>{});
      if (sim.header.size() == 1) {
        for (const auto& n : tasks) sim.header.push_back(n);
        for (std::size_t i = 0; i < tasks.size() && i < cos.size(); ++i) {
          CsvRow row{tasks[i]};
          for (double v : cos[i]) row.push_back(csv_number(v));
          sim.rows.push_back(std::move(row));
        }
      }
      std::string labels;
      const auto lab = d->value("labels", std::vector<int>{});
      for (std::size_t i = 0; i < lab.size() && i < tasks.size(); ++i) {
        if (!labels.empty()) labels += ";";
        labels += tasks[i] + "=" + std::to_string(lab[i]);
      }
      cl.rows.push_back({std::to_string(integer(*d, "layer")), str(*d, "position"),
                         std::to_string(integer(*d, "k")), csv_number(num(*d, "silhouette")),
                         csv_number(num(*d, "agreement")), csv_number(num(*d, "p_value")),
                         std::to_string(integer(*d, "n_perm")), labels, str(*d, "warning")});
    }
    tables.push_back(std::move(sim));
    tables.push_back(std::move(cl));
  }

  {
    Table t{"attention",
            {"task", "layer", "n", "demo_inputs", "demo_outputs", "separators", "query_self", "markers"},
            {}};
    for (const auto* d : of_kind(docs, "attention")) {
      for (const auto& r : d->value("rows", json::array())) {
        t.rows.push_back({str(r, "task"), std::to_string(integer(r, "layer")),
                          std::to_string(integer(r, "n")), csv_number(num(r, "demo_inputs")),
                          csv_number(num(r, "demo_outputs")), csv_number(num(r, "separators")),
                          csv_number(num(r, "query_self")), csv_number(num(r, "markers"))});
      }
    }
    sort_rows(t.rows);
    tables.push_back(std::move(t));
  }

  {
    // Failure categories of non-transfer outputs in multi-position transplants.
    std::map<std::string, int> counts;
    int total = 0;
    for (const auto& d : docs) {
      if (kind_of(d) != "experiment") continue;
      const std::string e = str(d, "experiment");
      if ((e != "transfer" && e != "matrix") || singleton_scope(str(d, "scope"))) continue;
      for (const auto& ex : d.value("examples", json::array())) {
        const std::string f = str(ex, "failure");
        if (f.empty()) continue;
        ++counts[f];
        ++total;
      }
    }
    Table t{"failure_categories", {"category", "count", "share"}, {}};
    for (const auto& [k, v] : counts) {
      t.rows.push_back({k, std::to_string(v), csv_number(static_cast<double>(v) / total)});
    }
    tables.push_back(std::move(t));
  }

  {
    Table t{"layer_ablation", {"task", "ablated_layer", "n", "accuracy"}, {}};
    for (const auto* d : of_kind(docs, "layer_ablation")) {
      for (const auto& r : d->value("rows", json::array())) {
        const int l = integer(r, "layer");
        t.rows.push_back({str(*d, "task"), l < 0 ? "none" : std::to_string(l),
                          std::to_string(integer(*d, "n")), csv_number(num(r, "accuracy"))});
      }
    }
    tables.push_back(std::move(t));
  }

  {
    Table t{"timing", kTransferHeader, {}};
    for (const auto* d : experiments(docs, "timing")) t.rows.push_back(transfer_row(*d));
    tables.push_back(std::move(t));
  }

  return tables;
}

namespace {

const char* verdict(bool ok) { return ok ? "PASS" : "OBSERVED"; }

Claim missing(std::string id, std::string claim, const std::string& needs) {
  return {std::move(id), std::move(claim), "no results; run " + needs, "OBSERVED", json::object()};
}

}  // namespace

std::vector<Claim> evaluate_claims(const std::vector<json>& docs) {
  std::vector<Claim> claims;

  {
    // Headline multi-position transplant: the largest all_demo transfer run.
    const json* best = nullptr;
    for (const auto* d : experiments(docs, "transfer")) {
      if (str(*d, "scope") != "all_demo" || !num(*d, "tau")) continue;
      if (!best || integer(*d, "n_total") > integer(*best, "n_total")) best = d;
    }
    const std::string text = "Replacing every demonstration position transfers the source task";
    if (!best) {
      claims.push_back(missing("headline", text, "transfer --headline"));
    } else {
      Claim c{"headline", text, "", "", json::object()};
      const int n = integer(*best, "n_total") - integer(best->at("counts"), "ambiguous") -
                    integer(best->at("counts"), "skipped");
      const int t = integer(best->at("counts"), "transfer");
      const auto ci = stats::wilson_ci(t, n, best->at("ci").value("z", 1.96));
      c.values = {{"source", str(*best, "source")}, {"target", str(*best, "target")},
                  {"layer", first_layer(*best)},    {"n", n},
                  {"transfer", t},                  {"tau", *num(*best, "tau")},
                  {"ci_lower", ci.lower},           {"ci_upper", ci.upper}};
      c.observation = str(*best, "source") + "->" + str(*best, "target") + " at layer " +
                      std::to_string(first_layer(*best)) + ": tau " + csv_number(*num(*best, "tau")) +
                      " [" + csv_number(ci.lower) + ", " + csv_number(ci.upper) + "] over " +
                      std::to_string(n);
      c.status = verdict(ci.lower > 0.1);
      claims.push_back(std::move(c));
    }
  }

  {
    const std::string text =
        "Single-position transplant at last_demo_token stays <= 0.10 averaged over layers, while a "
        "multi-position scope beats it by >= 0.20 on some pair";
    std::vector<double> single;
    double best_multi = -1;
    std::string where;
    for (const auto* d : experiments(docs, "transfer")) {
      const auto tau = num(*d, "tau");
      if (!tau) continue;
      const std::string s = str(*d, "scope");
      if (s == "last_demo_token") single.push_back(*tau);
      if (!singleton_scope(s) && *tau > best_multi) {
        best_multi = *tau;
        where = str(*d, "source") + "->" + str(*d, "target") + " " + s + " layer " +
                std::to_string(first_layer(*d));
      }
    }
    for (const auto* d : experiments(docs, "matrix")) {
      const auto tau = num(*d, "tau");
      if (tau && *tau > best_multi) {
        best_multi = *tau;
        where = str(*d, "source") + "->" + str(*d, "target") + " " + str(*d, "scope") + " layer " +
                std::to_string(first_layer(*d));
      }
    }
    if (single.empty() || best_multi < 0) {
      claims.push_back(missing("single_vs_multi", text, "transfer at last_demo_token and a multi-position scope"));
    } else {
      const double s = mean(single);
      Claim c{"single_vs_multi", text, "", "", json::object()};
      c.values = {{"single_mean_tau", s}, {"single_runs", single.size()},
                  {"best_multi_tau", best_multi}, {"best_multi", where}};
      c.observation = "single mean " + csv_number(s) + " over " + std::to_string(single.size()) +
                      " runs across layers and pairs; best multi " + csv_number(best_multi) + " (" + where + ")";
      c.status = verdict(s <= 0.10 && best_multi - s >= 0.20);
      claims.push_back(std::move(c));
    }
  }

  {
    const std::string text =
        "Noise at first_query_token in early layers disrupts more than noise at last_demo_token in any layer";
    int max_layer = -1;
    for (const auto* d : experiments(docs, "trace")) max_layer = std::max(max_layer, first_layer(*d));
    std::vector<double> query_early;
    double demo_max = -1;
    for (const auto* d : experiments(docs, "trace")) {
      const auto delta = num(*d, "delta");
      if (!delta) continue;
      const std::string s = str(*d, "scope");
      // Early: the first half of the traced layers.
      if (s == "first_query_token" && first_layer(*d) * 2 < max_layer + 1) query_early.push_back(*delta);
      if (s == "last_demo_token") demo_max = std::max(demo_max, *delta);
    }
    if (query_early.empty() || demo_max < -0.5) {
      claims.push_back(missing("tracing", text, "trace over both positions"));
    } else {
      const double q = mean(query_early);
      Claim c{"tracing", text, "", "", json::object()};
      c.values = {{"query_early_mean_delta", q}, {"demo_max_delta", demo_max}};
      c.observation = "first_query_token early mean delta " + csv_number(q) +
                      "; last_demo_token max delta " + csv_number(demo_max);
      c.status = verdict(q > demo_max);
      claims.push_back(std::move(c));
    }
  }

  {
    const std::string text = "On the best pair the true source transfers at least as often as every control";
    std::map<std::tuple<std::string, std::string, int, std::string>, std::map<std::string, double>> by_pair;
    for (const auto* d : experiments(docs, "controls")) {
      const std::string e = str(*d, "experiment");
      by_pair[{str(*d, "source"), str(*d, "target"), first_layer(*d), str(*d, "scope")}]
             [e.substr(e.find('/') + 1)] = num(*d, "tau").value_or(0.0);
    }
    const std::map<std::string, double>* best = nullptr;
    std::string label;
    for (const auto& [key, row] : by_pair) {
      const auto t = row.find("true_source");
      if (t == row.end()) continue;
      if (!best || t->second > best->at("true_source")) {
        best = &row;
        const auto& [s, tg, layer, scope] = key;
        label = s + "->" + tg + " " + scope + " layer " + std::to_string(layer);
      }
    }
    if (!best) {
      claims.push_back(missing("controls", text, "controls"));
    } else if (best->at("true_source") <= 0.0) {
      // Nothing transfers, so there is no pair to compare the controls against.
      Claim c = missing("controls", text, "controls");
      c.observation = "no pair transfers; best true_source tau is 0 (" + label + ")";
      claims.push_back(std::move(c));
    } else {
      Claim c{"controls", text, "", "", json::object()};
      bool ok = true;
      c.observation = label + ":";
      for (const auto& [name, tau] : *best) {
        c.values[name] = tau;
        c.observation += " " + name + "=" + csv_number(tau);
        if (name != "true_source" && tau > best->at("true_source")) ok = false;
      }
      c.values["pair"] = label;
      c.status = verdict(ok);
      claims.push_back(std::move(c));
    }
  }

  {
    const std::string text = "Probe accuracy at demonstration positions is at least query-position accuracy at every layer";
    std::map<int, std::map<std::string, double>> overall;
    for (const auto* d : of_kind(docs, "probe")) {
      for (const auto& r : d->value("rows", json::array())) {
        if (str(r, "task") == "overall") overall[integer(r, "layer")][str(r, "position")] = num(r, "accuracy").value_or(0);
      }
    }
    int compared = 0, holds = 0;
    json per_layer = json::object();
    for (const auto& [layer, acc] : overall) {
      const auto q = acc.find("first_query_token");
      double demo = -1;
      for (const char* p : {"last_demo_token", "separator"}) {
        if (const auto it = acc.find(p); it != acc.end()) demo = std::max(demo, it->second);
      }
      if (q == acc.end() || demo < 0) continue;
      ++compared;
      holds += demo >= q->second;
      per_layer[std::to_string(layer)] = {{"demo", demo}, {"query", q->second}};
    }
    if (compared == 0) {
      claims.push_back(missing("probe_gap", text, "probe"));
    } else {
      Claim c{"probe_gap", text, "", "", json::object()};
      c.values = {{"layers", per_layer}, {"layers_holding", holds}, {"layers_compared", compared}};
      c.observation = "demo >= query at " + std::to_string(holds) + " of " + std::to_string(compared) + " layers";
      c.status = verdict(holds == compared);
      claims.push_back(std::move(c));
    }
  }

  return claims;
}

json to_json(const Claim& c) {
  return {{"id", c.id}, {"claim", c.claim}, {"observation", c.observation}, {"status", c.status},
          {"values", c.values}};
}

ReportSummary emit_report(const std::filesystem::path& results_dir,
                          const std::filesystem::path& reports_dir) {
  ReportSummary summary;
  std::vector<LoadedDocument> loaded = load_documents(results_dir, summary.warnings);
  std::vector<json> docs;
  for (auto& l : loaded) docs.push_back(std::move(l.doc));
  summary.documents = static_cast<int>(docs.size());
  if (docs.empty()) summary.warnings.push_back("no result documents found; tables are empty");
  for (const auto& t : build_tables(docs)) {
    const auto path = reports_dir / (t.name + ".csv");
    write_csv(path, t.header, t.rows);
    summary.written.push_back(path);
  }
  summary.claims = evaluate_claims(docs);
  json claims = json::array();
  for (const auto& c : summary.claims) claims.push_back(to_json(c));
  const json out = envelope("report", {{"documents", summary.documents},
                                       {"claims", claims},
                                       {"warnings", summary.warnings}});
  const auto path = reports_dir / "summary.json";
  write_text(path, dump(out));
  summary.written.push_back(path);
  return summary;
}

}  // namespace icl
