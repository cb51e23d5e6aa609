#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace icl {

enum class Regime { Procedural, Numeric, Semantic };

std::string_view to_string(Regime r);

// Structural descriptor of a task's outputs. `pattern` is an ECMAScript
// regular expression matched against the whole output string.
struct OutputTemplate {
  std::string name;
  std::string pattern;

  bool matches(std::string_view output) const;
};

struct TaskSpec {
  std::string name;
  std::string domain_description;
  Regime regime = Regime::Procedural;
  bool core = false;
  std::vector<std::string> domain;  // enumerated input pool in a fixed order
  // Returns nullopt for inputs outside the transform's natural domain
  // (e.g. uppercase of "17"). Total on `domain`.
  std::function<std::optional<std::string>(std::string_view)> transform;
  OutputTemplate output_template;

  std::optional<std::string> apply(std::string_view input) const { return transform(input); }
  // Throws UndefinedInput when the transform is undefined on `input`.
  std::string expected(std::string_view input) const;
};

struct TaskInstance {
  std::string task;
  std::string input;
  std::string expected;

  bool operator==(const TaskInstance&) const = default;
};

// Registry of the eight suite tasks and every format/label/length variant.
const std::vector<TaskSpec>& task_registry();
const TaskSpec& find_task(std::string_view name);  // throws UnknownTask
std::vector<std::string> core_task_names();
std::vector<std::string> all_task_names();

// Human-readable manifest: one line per task with name, regime, domain
// size, domain description and template class.
std::string task_manifest();

// n distinct instances drawn without replacement from the domain minus
// `exclude`. The pool is shuffled with Rng(seed) in domain order, so tasks
// sharing a domain draw the same inputs for the same seed.
std::vector<TaskInstance> generate_instances(std::string_view task, std::size_t n,
                                             std::uint64_t seed,
                                             const std::set<std::string>& exclude = {});

enum class OutcomeLabel { Transfer, Preserve, Malformed };
std::string_view to_string(OutcomeLabel label);

struct Outcome {
  OutcomeLabel label = OutcomeLabel::Malformed;
  bool ambiguous = false;  // f_source(x_q) == f_target(x_q); excluded from rates
};

// Transfer: equals f_source(x_q); when f_source is undefined on x_q, the
// output must instead match the source template and differ from f_target(x_q).
// Preserve: equals f_target(x_q). Malformed otherwise.
Outcome classify_output(std::string_view generated, const TaskSpec& source,
                        const TaskSpec& target, const TaskInstance& query);

enum class FailureKind { PreservedTarget, PartialTransfer, FormatMismatch, Malformed };
std::string_view to_string(FailureKind kind);

// Finer categorisation of outputs that are not a transfer.
FailureKind categorize_failure(std::string_view generated, const TaskSpec& source,
                               const TaskSpec& target, const TaskInstance& query);

// Mean character-trigram Jaccard similarity between the i-th sampled
// outputs of a and b (both sampled with the same seed). Trigrams are taken
// over the output padded as "^^" + s + "$".
double surface_similarity(const TaskSpec& a, const TaskSpec& b, std::size_t n,
                          std::uint64_t seed);
double trigram_jaccard(std::string_view a, std::string_view b);

// Mean tokenized length of expected outputs over n sampled instances.
double output_token_stats(const TaskSpec& task, std::size_t n, std::uint64_t seed);

}  // namespace icl
