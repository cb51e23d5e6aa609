#include "icl/config.hpp"

#include <fstream>
#include <functional>

#include "icl/error.hpp"
#include "icl/prompt.hpp"
#include "icl/tasks.hpp"

namespace icl {

using nlohmann::json;

namespace {

struct Field {
  const char* key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename T>
Field member(const char* key, T RunConfig::*ptr) {
  return {key, [ptr](const RunConfig& c) { return json(c.*ptr); },
          [ptr, key](RunConfig& c, const json& v) {
            try {
              if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer()) throw Error(ErrorCode::BadConfig, "");
              } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw Error(ErrorCode::BadConfig, "");
              } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw Error(ErrorCode::BadConfig, "");
              } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw Error(ErrorCode::BadConfig, "");
              } else {
                if (!v.is_array()) throw Error(ErrorCode::BadConfig, "");
              }
              if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                  throw Error(ErrorCode::BadConfig, "");
                }
              }
              c.*ptr = v.get<T>();
            } catch (const std::exception&) {
              throw Error(ErrorCode::BadConfig, std::string("bad value for ") + key + ": " + v.dump());
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f = {
        member("model", &RunConfig::model),
        member("seed", &RunConfig::seed),
        member("k", &RunConfig::k),
        member("n_t", &RunConfig::n_t),
        member("n_t_headline", &RunConfig::n_t_headline),
        member("n_s", &RunConfig::n_s),
        member("alpha", &RunConfig::alpha),
        member("max_new", &RunConfig::max_new),
        member("z", &RunConfig::z),
        member("n_perm", &RunConfig::n_perm),
        member("layer", &RunConfig::layer),
        member("layers", &RunConfig::layers),
        member("scope", &RunConfig::scope),
        member("scopes", &RunConfig::scopes),
        member("positions", &RunConfig::positions),
        member("source", &RunConfig::source),
        member("target", &RunConfig::target),
        member("pairs", &RunConfig::pairs),
        member("tasks", &RunConfig::tasks),
        member("site", &RunConfig::site),
        member("persistence", &RunConfig::persistence),
        member("kind", &RunConfig::kind),
        member("axis", &RunConfig::axis),
        member("grid", &RunConfig::grid),
        member("headline", &RunConfig::headline),
        member("n_fit", &RunConfig::n_fit),
        member("n_eval", &RunConfig::n_eval),
        member("shots", &RunConfig::shots),
        member("out", &RunConfig::out),
        member("reports", &RunConfig::reports),
        member("steps", &RunConfig::steps),
        member("batch", &RunConfig::batch),
        member("lr", &RunConfig::lr),
        member("warmup", &RunConfig::warmup),
        member("eval_every", &RunConfig::eval_every),
        member("max_seconds", &RunConfig::max_seconds),
        member("target_tasks", &RunConfig::target_tasks),
        member("train_log", &RunConfig::train_log),
    };
    f.push_back({"sigma",
                 [](const RunConfig& c) { return c.sigma ? json(*c.sigma) : json(nullptr); },
                 [](RunConfig& c, const json& v) {
                   if (v.is_null()) {
                     c.sigma.reset();
                   } else if (v.is_number()) {
                     c.sigma = v.get<double>();
                   } else {
                     throw Error(ErrorCode::BadConfig, "bad value for sigma: " + v.dump());
                   }
                 }});
    return f;
  }();
  return all;
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(c);
  return j;
}

void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(c, value);
        known = true;
        break;
      }
    }
    if (!known) throw Error(ErrorCode::BadConfig, "unknown config key " + key);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::BadConfig, what);
  };
  require(k >= 1, "k must be >= 1");
  require(n_t >= 1 && n_t_headline >= 1, "n_t must be >= 1");
  require(n_s >= 1, "n_s must be >= 1");
  require(alpha >= 0, "alpha must be >= 0");
  require(max_new >= 1, "max_new must be >= 1");
  require(z > 0, "z must be positive");
  require(n_perm >= 0, "n_perm must be >= 0");
  require(n_fit >= 1 && n_eval >= 1, "n_fit and n_eval must be >= 1");
  require(target_tasks >= 1, "target_tasks must be >= 1");
  require(!sigma || *sigma >= 0, "sigma must be >= 0");
  require(kind == "zero" || kind == "random", "kind must be zero or random");
  require(!model.empty(), "model path is empty");
  parse_site(site);
  parse_persistence(persistence);
  parse_axis(axis);
  try {
    parse_scope(scope);
    for (const auto& s : scopes) parse_scope(s);
    for (const auto& p : positions) parse_scope(p);
    find_task(source);
    find_task(target);
    for (const auto& t : tasks) find_task(t);
    for (const auto& p : pairs) parse_pair(p);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  for (int s : shots) require(s >= 0, "shots must be >= 0");
}

RunOptions run_options(const RunConfig& c) {
  RunOptions o;
  o.k = c.k;
  o.n_t = c.headline ? c.n_t_headline : c.n_t;
  o.n_s = c.n_s;
  o.max_new = c.max_new;
  o.site = {parse_site(c.site), parse_persistence(c.persistence)};
  o.seed = c.seed;
  o.z = c.z;
  return o;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.steps = c.steps;
  t.batch_size = c.batch;
  t.learning_rate = c.lr;
  t.warmup = c.warmup;
  t.seed = c.seed;
  t.eval_every = c.eval_every;
  t.max_seconds = c.max_seconds;
  t.target_tasks = c.target_tasks;
  return t;
}

std::pair<std::string, std::string> parse_pair(const std::string& text) {
  const auto arrow = text.find("->");
  if (arrow == std::string::npos) throw Error(ErrorCode::BadConfig, "pair must be source->target: " + text);
  std::pair<std::string, std::string> p{text.substr(0, arrow), text.substr(arrow + 2)};
  find_task(p.first);
  find_task(p.second);
  return p;
}

}  // namespace icl
