#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "icl/tasks.hpp"
#include "icl/tokenizer.hpp"

namespace icl {

// Half-open token range [begin, end).
struct Span {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool contains(int p) const { return p >= begin && p < end; }
  bool operator==(const Span&) const = default;
};

enum class TokenRole { Marker, DemoInput, DemoOutput, Separator, Query };
std::string_view to_string(TokenRole role);

struct DemoSpans {
  Span input;
  Span output;
  Span separator;
};

// Token-level map of a prompt
//   In: x_1 Out: y_1\n ... In: x_k Out: y_k\nIn: x_q Out:
// "In:", "Out:" and the single spaces around them are markers; every other
// token belongs to exactly one span.
struct PromptLayout {
  std::string task;
  std::string text;
  std::vector<TokenId> token_ids;
  std::vector<DemoSpans> demos;
  Span query_span;
  int last_demo_token = -1;
  int first_query_token = -1;
  int separator = -1;  // the final demonstration separator
  std::vector<TokenRole> roles;
  std::vector<TaskInstance> demo_instances;
  TaskInstance query;

  int k() const { return static_cast<int>(demos.size()); }
  int size() const { return static_cast<int>(token_ids.size()); }
};

// Formats explicit demonstrations and query. Throws TokenizationMismatch
// if the piecewise token map disagrees with tokenizing the full text.
PromptLayout layout_from_instances(const std::vector<TaskInstance>& demos,
                                   const TaskInstance& query);

// Samples k demonstrations uniformly without replacement from the task
// domain minus the query input and `exclude`.
PromptLayout build_prompt(std::string_view task, int k, const TaskInstance& query,
                          std::uint64_t seed, const std::set<std::string>& exclude = {});

enum class Scope {
  AllDemo,
  InputOnly,
  OutputOnly,
  LastDemo,
  LastDemoToken,
  Separator,
  FirstQueryToken,
};

Scope parse_scope(std::string_view name);  // throws UnknownScope
std::string_view to_string(Scope scope);
bool is_singleton(Scope scope);

// Ordered token indices of a scope. Markers never appear.
std::vector<int> resolve_position_set(const PromptLayout& layout, Scope scope);

// Relative key used to align positions across prompts: "d<i>.<role>.<offset>"
// with a 1-based demo index, or the position name for singleton scopes.
std::string position_key(const PromptLayout& layout, int position, Scope scope);

}  // namespace icl
