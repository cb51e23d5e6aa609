#include "icl/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "icl/error.hpp"
#include "icl/lexicon.hpp"
#include "icl/rng.hpp"
#include "icl/tokenizer.hpp"

namespace icl {
namespace {

using Transform = std::function<std::optional<std::string>(std::string_view)>;

bool is_lower_word(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

std::optional<long> parse_int(std::string_view s) {
  if (s.empty() || s.size() > 6) return std::nullopt;
  if (s.size() > 1 && s[0] == '0') return std::nullopt;
  long v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string repeat(std::string_view w, int n, std::string_view sep) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += sep;
    out += w;
  }
  return out;
}

std::optional<std::string> number_word(long v) {
  const auto words = lexicon::number_words();
  if (v < 0 || v >= static_cast<long>(words.size())) return std::nullopt;
  return std::string(words[static_cast<std::size_t>(v)]);
}

std::string number_word_pattern() {
  std::string p = "^(";
  const auto words = lexicon::number_words();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) p += "|";
    p += words[i];
  }
  return p + ")$";
}

std::vector<std::string> words_between(std::size_t lo, std::size_t hi) {
  std::vector<std::string> out;
  for (auto w : lexicon::common_words()) {
    if (w.size() >= lo && w.size() <= hi) out.emplace_back(w);
  }
  return out;
}

std::vector<std::string> int_range(int lo, int hi) {
  std::vector<std::string> out;
  for (int v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
  return out;
}

// "word N" -> (word, N) with N a single digit 1..9.
std::optional<std::pair<std::string, int>> parse_repeat_input(std::string_view s) {
  const auto sp = s.find(' ');
  if (sp == std::string_view::npos || sp + 2 != s.size()) return std::nullopt;
  const auto word = s.substr(0, sp);
  const char n = s[sp + 1];
  if (!is_lower_word(word) || n < '1' || n > '9') return std::nullopt;
  return std::pair{std::string(word), n - '0'};
}

std::vector<std::string> repeat_domain(const std::vector<int>& counts) {
  std::vector<std::string> out;
  for (const auto& w : words_between(4, 8)) {
    for (int n : counts) out.push_back(w + " " + std::to_string(n));
  }
  return out;
}

Transform word_transform(std::function<std::string(std::string_view)> f) {
  return [f = std::move(f)](std::string_view x) -> std::optional<std::string> {
    if (!is_lower_word(x)) return std::nullopt;
    return f(x);
  };
}

Transform lookup_transform(std::unordered_map<std::string, std::string> table) {
  return [table = std::move(table)](std::string_view x) -> std::optional<std::string> {
    const auto it = table.find(std::string(x));
    if (it == table.end()) return std::nullopt;
    return it->second;
  };
}

std::vector<TaskSpec> build_registry() {
  std::vector<TaskSpec> r;
  const auto words48 = words_between(4, 8);
  const auto words39 = words_between(3, 9);

  std::vector<std::string> sentiment_domain;
  std::unordered_map<std::string, bool> valence;
  for (auto w : lexicon::positive_words()) valence[std::string(w)] = true;
  for (auto w : lexicon::negative_words()) valence[std::string(w)] = false;
  for (const auto& [w, v] : valence) sentiment_domain.push_back(w);
  std::sort(sentiment_domain.begin(), sentiment_domain.end());
  auto sentiment_table = [&](std::string_view pos, std::string_view neg) {
    std::unordered_map<std::string, std::string> t;
    for (const auto& [w, v] : valence) t[w] = std::string(v ? pos : neg);
    return t;
  };

  std::vector<std::string> antonym_domain;
  std::unordered_map<std::string, std::string> antonyms;
  for (const auto& p : lexicon::antonym_pairs()) {
    antonyms[std::string(p.first)] = std::string(p.second);
    antonyms[std::string(p.second)] = std::string(p.first);
  }
  for (const auto& [w, a] : antonyms) antonym_domain.push_back(w);
  std::sort(antonym_domain.begin(), antonym_domain.end());

  std::vector<std::string> pattern_domain;
  for (char a = 'A'; a <= 'E'; ++a) {
    for (char b = 'A'; b <= 'E'; ++b) {
      if (a == b) continue;
      pattern_domain.push_back(std::string{a, ' ', b, ' ', a, ' ', b, ' ', a});
    }
  }

  const Transform repeat_n = [](std::string_view x) -> std::optional<std::string> {
    const auto parsed = parse_repeat_input(x);
    if (!parsed) return std::nullopt;
    return repeat(parsed->first, parsed->second, " ");
  };

  // Core suite.
  r.push_back({"uppercase", "4-8 letter common words", Regime::Procedural, true, words48,
               word_transform([](std::string_view x) { return upper(x); }),
               {"WORD", "^[A-Z]+$"}});
  r.push_back({"first_letter", "4-8 letter common words", Regime::Procedural, true, words48,
               word_transform([](std::string_view x) { return std::string(1, x[0]); }),
               {"letter", "^[a-z]$"}});
  r.push_back({"repeat_word", "4-8 letter common words", Regime::Procedural, true, words48,
               word_transform([](std::string_view x) { return repeat(x, 2, " "); }),
               {"word word", "^([a-z]+) \\1$"}});
  r.push_back({"length", "3-9 letter common words", Regime::Procedural, true, words39,
               word_transform([](std::string_view x) { return std::to_string(x.size()); }),
               {"digit", "^[0-9]$"}});
  r.push_back({"linear_2x", "integers 1-50", Regime::Numeric, true, int_range(1, 50),
               [](std::string_view x) -> std::optional<std::string> {
                 const auto v = parse_int(x);
                 if (!v) return std::nullopt;
                 return std::to_string(2 * *v);
               },
               {"integer", "^[0-9]+$"}});
  r.push_back({"sentiment", "50 positive and 50 negative valence words", Regime::Semantic, true,
               sentiment_domain, lookup_transform(sentiment_table("positive", "negative")),
               {"positive|negative", "^(positive|negative)$"}});
  r.push_back({"antonym", "both sides of 80 adjective pairs", Regime::Semantic, true,
               antonym_domain, lookup_transform(antonyms), {"word", "^[a-z]+$"}});
  r.push_back({"pattern_completion", "\"A B A B A\" with A != B from A-E", Regime::Semantic, true,
               pattern_domain,
               [](std::string_view x) -> std::optional<std::string> {
                 if (x.size() != 9) return std::nullopt;
                 for (std::size_t i = 1; i < 9; i += 2) {
                   if (x[i] != ' ') return std::nullopt;
                 }
                 const char a = x[0], b = x[2];
                 if (a < 'A' || a > 'Z' || b < 'A' || b > 'Z' || a == b) return std::nullopt;
                 if (x[4] != a || x[8] != a || x[6] != b) return std::nullopt;
                 return std::string(1, b);
               },
               {"LETTER", "^[A-Z]$"}});

  // Format, label and length variants.
  r.push_back({"uppercase_period", "4-8 letter common words", Regime::Procedural, false, words48,
               word_transform([](std::string_view x) { return upper(x) + "."; }),
               {"WORD.", "^[A-Z]+\\.$"}});
  r.push_back({"length_word", "3-9 letter common words", Regime::Procedural, false, words39,
               [](std::string_view x) -> std::optional<std::string> {
                 if (!is_lower_word(x)) return std::nullopt;
                 return number_word(static_cast<long>(x.size()));
               },
               {"number word", number_word_pattern()}});
  r.push_back({"repeat_comma", "4-8 letter common words", Regime::Procedural, false, words48,
               word_transform([](std::string_view x) { return repeat(x, 2, ", "); }),
               {"word, word", "^([a-z]+), \\1$"}});
  r.push_back({"reverse", "4-8 letter common words", Regime::Procedural, false, words48,
               word_transform([](std::string_view x) { return std::string(x.rbegin(), x.rend()); }),
               {"word", "^[a-z]+$"}});
  r.push_back({"reverse_spaced", "4-8 letter common words", Regime::Procedural, false, words48,
               word_transform([](std::string_view x) {
                 std::string out;
                 for (auto it = x.rbegin(); it != x.rend(); ++it) {
                   if (!out.empty()) out += ' ';
                   out += *it;
                 }
                 return out;
               }),
               {"l e t t e r s", "^[a-z]( [a-z])*$"}});
  r.push_back({"sentiment_goodbad", "50 positive and 50 negative valence words", Regime::Semantic,
               false, sentiment_domain, lookup_transform(sentiment_table("good", "bad")),
               {"good|bad", "^(good|bad)$"}});
  r.push_back({"sentiment_symbol", "50 positive and 50 negative valence words", Regime::Semantic,
               false, sentiment_domain, lookup_transform(sentiment_table("+", "-")),
               {"+|-", "^[+-]$"}});
  r.push_back({"repeat_n", "\"word N\", 4-8 letter words, N in 2-4", Regime::Procedural, false,
               repeat_domain({2, 3, 4}), repeat_n, {"word (word)+", "^([a-z]+)( \\1)+$"}});
  for (int n = 2; n <= 4; ++n) {
    r.push_back({"repeat_n" + std::to_string(n),
                 "\"word " + std::to_string(n) + "\", 4-8 letter words", Regime::Procedural,
                 false, repeat_domain({n}), repeat_n,
                 {"word x" + std::to_string(n),
                  "^([a-z]+)( \\1){" + std::to_string(n - 1) + "}$"}});
  }
  r.push_back({"spell_out", "integers 0-20", Regime::Numeric, false, int_range(0, 20),
               [](std::string_view x) -> std::optional<std::string> {
                 const auto v = parse_int(x);
                 if (!v) return std::nullopt;
                 return number_word(*v);
               },
               {"number word", number_word_pattern()}});
  return r;
}

std::set<std::string> trigrams(std::string_view s) {
  const std::string padded = "^^" + std::string(s) + "$";
  std::set<std::string> out;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.insert(padded.substr(i, 3));
  return out;
}

}  // namespace

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Procedural: return "procedural";
    case Regime::Numeric: return "numeric";
    case Regime::Semantic: return "semantic";
  }
  return "?";
}

bool OutputTemplate::matches(std::string_view output) const {
  const std::regex re(pattern);
  return std::regex_match(output.begin(), output.end(), re);
}

std::string TaskSpec::expected(std::string_view input) const {
  auto out = transform(input);
  if (!out) throw Error(ErrorCode::UndefinedInput, name + " is undefined on \"" + std::string(input) + "\"");
  return *out;
}

const std::vector<TaskSpec>& task_registry() {
  static const std::vector<TaskSpec> registry = build_registry();
  return registry;
}

const TaskSpec& find_task(std::string_view name) {
  for (const auto& t : task_registry()) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::UnknownTask, std::string(name));
}

std::vector<std::string> core_task_names() {
  std::vector<std::string> out;
  for (const auto& t : task_registry()) {
    if (t.core) out.push_back(t.name);
  }
  return out;
}

std::vector<std::string> all_task_names() {
  std::vector<std::string> out;
  for (const auto& t : task_registry()) out.push_back(t.name);
  return out;
}

std::string task_manifest() {
  std::ostringstream os;
  os << "# name\tregime\tdomain_size\tdomain\ttemplate\n";
  for (const auto& t : task_registry()) {
    os << t.name << '\t' << to_string(t.regime) << '\t' << t.domain.size() << '\t'
       << t.domain_description << '\t' << t.output_template.name << '\n';
  }
  return os.str();
}

std::vector<TaskInstance> generate_instances(std::string_view task, std::size_t n,
                                             std::uint64_t seed,
                                             const std::set<std::string>& exclude) {
  const TaskSpec& spec = find_task(task);
  std::vector<const std::string*> pool;
  pool.reserve(spec.domain.size());
  for (const auto& x : spec.domain) {
    if (!exclude.contains(x)) pool.push_back(&x);
  }
  if (n > pool.size()) {
    throw Error(ErrorCode::DomainExhausted, spec.name + ": requested " + std::to_string(n) +
                                                " of " + std::to_string(pool.size()) + " inputs");
  }
  Rng rng(seed);
  // Partial Fisher-Yates: only the first n slots are needed.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<TaskInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({spec.name, *pool[i], spec.expected(*pool[i])});
  return out;
}

std::string_view to_string(OutcomeLabel label) {
  switch (label) {
    case OutcomeLabel::Transfer: return "transfer";
    case OutcomeLabel::Preserve: return "preserve";
    case OutcomeLabel::Malformed: return "malformed";
  }
  return "?";
}

Outcome classify_output(std::string_view generated, const TaskSpec& source,
                        const TaskSpec& target, const TaskInstance& query) {
  const auto fs = source.apply(query.input);
  const auto ft = target.apply(query.input);
  Outcome out;
  out.ambiguous = fs && ft && *fs == *ft;
  bool transfer;
  if (fs) {
    transfer = generated == *fs;
  } else {
    transfer = source.output_template.matches(generated) && (!ft || generated != *ft);
  }
  if (transfer) {
    out.label = OutcomeLabel::Transfer;
  } else if (ft && generated == *ft) {
    out.label = OutcomeLabel::Preserve;
  } else {
    out.label = OutcomeLabel::Malformed;
  }
  return out;
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::PreservedTarget: return "preserved_target";
    case FailureKind::PartialTransfer: return "partial_transfer";
    case FailureKind::FormatMismatch: return "format_mismatch";
    case FailureKind::Malformed: return "malformed";
  }
  return "?";
}

FailureKind categorize_failure(std::string_view generated, const TaskSpec& source,
                               const TaskSpec& target, const TaskInstance& query) {
  const auto fs = source.apply(query.input);
  const auto ft = target.apply(query.input);
  if (ft && generated == *ft) return FailureKind::PreservedTarget;
  if (generated.empty()) return FailureKind::Malformed;
  const std::string g = lower(generated);
  if (fs) {
    if (g == lower(*fs)) return FailureKind::FormatMismatch;
    const std::string_view s = *fs;
    if (s.size() > generated.size() && s.substr(0, generated.size()) == generated)
      return FailureKind::PartialTransfer;
    if (generated.size() > s.size() && generated.substr(0, s.size()) == s)
      return FailureKind::PartialTransfer;
  } else {
    const std::regex re(source.output_template.pattern, std::regex::ECMAScript | std::regex::icase);
    if (std::regex_match(generated.begin(), generated.end(), re)) return FailureKind::FormatMismatch;
  }
  if (ft && g == lower(*ft)) return FailureKind::FormatMismatch;
  return FailureKind::Malformed;
}

double trigram_jaccard(std::string_view a, std::string_view b) {
  const auto ta = trigrams(a);
  const auto tb = trigrams(b);
  std::size_t inter = 0;
  for (const auto& t : ta) inter += tb.count(t);
  const std::size_t uni = ta.size() + tb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double surface_similarity(const TaskSpec& a, const TaskSpec& b, std::size_t n,
                          std::uint64_t seed) {
  if (n == 0) return 0.0;
  const auto xa = generate_instances(a.name, n, seed);
  const auto xb = generate_instances(b.name, n, seed);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += trigram_jaccard(xa[i].expected, xb[i].expected);
  return sum / static_cast<double>(n);
}

double output_token_stats(const TaskSpec& task, std::size_t n, std::uint64_t seed) {
  if (n == 0) return 0.0;
  const auto xs = generate_instances(task.name, n, seed);
  double sum = 0.0;
  for (const auto& x : xs) sum += static_cast<double>(tokenizer::tokenize(x.expected).size());
  return sum / static_cast<double>(n);
}

}  // namespace icl
