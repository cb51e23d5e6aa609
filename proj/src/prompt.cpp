#include "icl/prompt.hpp"

#include "icl/error.hpp"

namespace icl {
namespace {

struct Builder {
  PromptLayout& layout;

  void marker(std::string_view text) { append(text, TokenRole::Marker); }

  Span span(std::string_view text, TokenRole role) {
    const int begin = layout.size();
    append(text, role);
    return {begin, layout.size()};
  }

  void append(std::string_view text, TokenRole role) {
    const auto ids = tokenizer::tokenize(text);
    layout.text += text;
    layout.token_ids.insert(layout.token_ids.end(), ids.begin(), ids.end());
    layout.roles.insert(layout.roles.end(), ids.size(), role);
  }
};

}  // namespace

std::string_view to_string(TokenRole role) {
  switch (role) {
    case TokenRole::Marker: return "marker";
    case TokenRole::DemoInput: return "in";
    case TokenRole::DemoOutput: return "out";
    case TokenRole::Separator: return "sep";
    case TokenRole::Query: return "query";
  }
  return "?";
}

PromptLayout layout_from_instances(const std::vector<TaskInstance>& demos,
                                   const TaskInstance& query) {
  PromptLayout layout;
  layout.task = query.task;
  layout.demo_instances = demos;
  layout.query = query;
  Builder b{layout};
  for (const auto& d : demos) {
    DemoSpans s;
    b.marker("In:");
    b.marker(" ");
    s.input = b.span(d.input, TokenRole::DemoInput);
    b.marker(" ");
    b.marker("Out:");
    b.marker(" ");
    s.output = b.span(d.expected, TokenRole::DemoOutput);
    s.separator = b.span("\n", TokenRole::Separator);
    layout.demos.push_back(s);
  }
  b.marker("In:");
  b.marker(" ");
  layout.query_span = b.span(query.input, TokenRole::Query);
  b.marker(" ");
  b.marker("Out:");

  if (!layout.demos.empty()) {
    layout.last_demo_token = layout.demos.back().output.end - 1;
    layout.separator = layout.demos.back().separator.begin;
  }
  layout.first_query_token = layout.query_span.begin;

  if (tokenizer::tokenize(layout.text) != layout.token_ids ||
      tokenizer::detokenize(layout.token_ids) != layout.text) {
    throw Error(ErrorCode::TokenizationMismatch, "span reconstruction failed for prompt");
  }
  for (const auto& d : layout.demos) {
    if (d.input.size() == 0 || d.output.size() == 0) {
      throw Error(ErrorCode::TokenizationMismatch, "empty demonstration span");
    }
  }
  return layout;
}

PromptLayout build_prompt(std::string_view task, int k, const TaskInstance& query,
                          std::uint64_t seed, const std::set<std::string>& exclude) {
  if (k < 1) throw Error(ErrorCode::InvalidCounts, "k must be at least 1");
  std::set<std::string> ex = exclude;
  ex.insert(query.input);
  auto demos = generate_instances(task, static_cast<std::size_t>(k), seed, ex);
  return layout_from_instances(demos, query);
}

Scope parse_scope(std::string_view name) {
  if (name == "all_demo") return Scope::AllDemo;
  if (name == "input_only") return Scope::InputOnly;
  if (name == "output_only") return Scope::OutputOnly;
  if (name == "last_demo") return Scope::LastDemo;
  if (name == "last_demo_token") return Scope::LastDemoToken;
  if (name == "separator") return Scope::Separator;
  if (name == "first_query_token") return Scope::FirstQueryToken;
  throw Error(ErrorCode::UnknownScope, std::string(name));
}

std::string_view to_string(Scope scope) {
  switch (scope) {
    case Scope::AllDemo: return "all_demo";
    case Scope::InputOnly: return "input_only";
    case Scope::OutputOnly: return "output_only";
    case Scope::LastDemo: return "last_demo";
    case Scope::LastDemoToken: return "last_demo_token";
    case Scope::Separator: return "separator";
    case Scope::FirstQueryToken: return "first_query_token";
  }
  return "?";
}

bool is_singleton(Scope scope) {
  return scope == Scope::LastDemoToken || scope == Scope::Separator ||
         scope == Scope::FirstQueryToken;
}

std::vector<int> resolve_position_set(const PromptLayout& layout, Scope scope) {
  std::vector<int> out;
  auto add = [&](Span s) {
    for (int p = s.begin; p < s.end; ++p) out.push_back(p);
  };
  switch (scope) {
    case Scope::AllDemo:
      for (const auto& d : layout.demos) {
        add(d.input);
        add(d.output);
      }
      break;
    case Scope::InputOnly:
      for (const auto& d : layout.demos) add(d.input);
      break;
    case Scope::OutputOnly:
      for (const auto& d : layout.demos) add(d.output);
      break;
    case Scope::LastDemo:
      if (!layout.demos.empty()) {
        add(layout.demos.back().input);
        add(layout.demos.back().output);
      }
      break;
    case Scope::LastDemoToken:
      out.push_back(layout.last_demo_token);
      break;
    case Scope::Separator:
      out.push_back(layout.separator);
      break;
    case Scope::FirstQueryToken:
      out.push_back(layout.first_query_token);
      break;
  }
  return out;
}

std::string position_key(const PromptLayout& layout, int position, Scope scope) {
  if (is_singleton(scope)) return std::string(to_string(scope));
  for (std::size_t i = 0; i < layout.demos.size(); ++i) {
    const auto& d = layout.demos[i];
    for (auto [span, role] : {std::pair{d.input, "in"}, std::pair{d.output, "out"},
                              std::pair{d.separator, "sep"}}) {
      if (span.contains(position)) {
        return "d" + std::to_string(i + 1) + "." + role + "." +
               std::to_string(position - span.begin);
      }
    }
  }
  if (layout.query_span.contains(position)) {
    return "q." + std::to_string(position - layout.query_span.begin);
  }
  return "m." + std::to_string(position);
}

}  // namespace icl
