#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icl/commands.hpp"
#include "icl/config.hpp"
#include "icl/tasks.hpp"

using nlohmann::json;

namespace {

std::string flag_name(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

const std::set<std::string> kIntLists = {"layers", "grid", "shots"};

const std::map<std::string, std::string> kAbout = {
    {"train", "Meta-train the model on the task mixture"},
    {"eval", "Few-shot accuracy per task"},
    {"probe", "Nearest-centroid task probes per layer and position"},
    {"transfer", "Transplant source-task activations into target prompts"},
    {"ablate", "Zero or random ablation at a scope"},
    {"trace", "Causal tracing with Gaussian noise"},
    {"controls", "Transfer with shuffled, matched-noise and wrong-task sources"},
    {"scaling", "Transfer against position count or demo counts"},
    {"matrix", "All-pairs transfer matrix and similarity tests"},
    {"layer-ablate", "Accuracy with one layer knocked out"},
    {"timing", "Compare hook sites and edit persistence"},
    {"attention", "Attention mass by prompt region"},
    {"stats", "Task similarity, clustering and permutation tests"},
    {"report", "Rebuild tables and claim summary from result files"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-train a toy transformer and run activation-intervention experiments on it."};
  app.require_subcommand(0, 1);

  std::string config_path;
  bool list_tasks = false;
  app.add_option("--config", config_path, "JSON config file; explicit flags override it");
  app.add_flag("--list-tasks", list_tasks, "Print the task manifest and exit");

  // One flag per config key, registered on every subcommand. Values are
  // collected as strings and converted using the key's JSON type.
  const json defaults = icl::to_json(icl::RunConfig{});
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> raw;
  std::map<std::string, std::map<std::string, bool>> flags;
  for (const auto& name : icl::subcommands()) {
    auto* sub = app.add_subcommand(name, kAbout.at(name));
    sub->fallthrough();
    for (const auto& [key, value] : defaults.items()) {
      const std::string flag = flag_name(key);
      if (value.is_boolean()) {
        options[name][key] = sub->add_flag(flag, flags[name][key]);
      } else if (value.is_array()) {
        options[name][key] = sub->add_option(flag, raw[name][key])->delimiter(',');
      } else {
        options[name][key] = sub->add_option(flag, raw[name][key])->expected(1);
      }
    }
  }

  CLI11_PARSE(app, argc, argv);

  if (list_tasks) {
    std::cout << icl::task_manifest();
    return 0;
  }
  const auto chosen = app.get_subcommands();
  if (chosen.empty()) {
    std::cerr << app.help();
    return 2;
  }
  const std::string name = chosen.front()->get_name();

  icl::RunConfig config;
  try {
    if (!config_path.empty()) config = icl::load_config(config_path);
    json overrides = json::object();
    for (const auto& [key, value] : defaults.items()) {
      if (options[name][key]->count() == 0) continue;
      const auto& vals = raw[name][key];
      if (value.is_boolean()) {
        overrides[key] = flags[name][key];
      } else if (value.is_array()) {
        json arr = json::array();
        for (const auto& v : vals) {
          if (kIntLists.count(key)) arr.push_back(std::stoll(v));
          else arr.push_back(v);
        }
        overrides[key] = arr;
      } else if (value.is_number_unsigned()) {
        overrides[key] = std::stoull(vals.at(0));
      } else if (value.is_number_integer()) {
        overrides[key] = std::stoll(vals.at(0));
      } else if (value.is_number() || value.is_null()) {
        overrides[key] = std::stod(vals.at(0));
      } else {
        overrides[key] = vals.at(0);
      }
    }
    icl::apply_json(config, overrides);
  } catch (const std::logic_error& e) {
    std::cerr << "error: BadConfig: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return icl::run_command(name, config, std::cout, std::cerr);
}
