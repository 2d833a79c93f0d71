#include "gift/summarizer.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gift/prompts.hpp"

namespace gift {
namespace {

using AtomSet = std::vector<Atom>;

void add_subsets(const AtomSet& atoms, std::size_t max_arity, std::set<AtomSet>& out) {
  const std::size_t n = atoms.size();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > max_arity) continue;
    AtomSet subset;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) subset.push_back(atoms[i]);
    }
    out.insert(std::move(subset));
  }
}

struct Tally {
  Concept cpt;
  Support support;
};

bool by_support_then_name(const CandidateExplanation& a, const CandidateExplanation& b) {
  if (a.target_class != b.target_class) return a.target_class > b.target_class;
  if (a.support.total() != b.support.total()) return a.support.total() > b.support.total();
  return a.hypothesis.canonical() < b.hypothesis.canonical();
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Returns the bullet body, or nullopt when the line is not a list item.
std::optional<std::string> bullet_body(std::string_view line) {
  std::string t = trim(line);
  if (t.empty()) return std::nullopt;
  static constexpr std::string_view kDot = "\xE2\x80\xA2";
  if (t.front() == '-' || t.front() == '*' || t.front() == '+') return trim(std::string_view(t).substr(1));
  if (t.starts_with(kDot)) return trim(std::string_view(t).substr(kDot.size()));
  std::size_t digits = 0;
  while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
  if (digits > 0 && digits < t.size() && (t[digits] == '.' || t[digits] == ')')) {
    return trim(std::string_view(t).substr(digits + 1));
  }
  return std::nullopt;
}

std::string strip_markup(std::string s) {
  s = replace_all(std::move(s), "**", "");
  s = replace_all(std::move(s), "__", "");
  std::string out;
  int depth = 0;
  for (char c : s) {
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      depth = std::max(0, depth - 1);
    } else if (depth == 0) {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

json CandidateExplanation::to_json() const {
  json origins_json = json::array();
  if (origins & kOriginMiner) origins_json.push_back("miner");
  if (origins & kOriginLlm) origins_json.push_back("llm");
  if (origins & kOriginUser) origins_json.push_back("user");
  return json{{"concept", hypothesis.canonical()},
              {"description", hypothesis.describe()},
              {"origin", std::move(origins_json)},
              {"support", {{"from_0_to_1", support.from_0_to_1}, {"from_1_to_0", support.from_1_to_0}}},
              {"target_class", to_int(target_class)}};
}

CandidateExplanation CandidateExplanation::from_json(const json& j) {
  CandidateExplanation c;
  c.target_class = label_from_int(j.value("target_class", 1));
  const std::string text = j.at("concept").get<std::string>();
  c.hypothesis = parse_concept(text);
  if (j.contains("support")) {
    c.support.from_0_to_1 = j["support"].value("from_0_to_1", std::size_t{0});
    c.support.from_1_to_0 = j["support"].value("from_1_to_0", std::size_t{0});
  }
  c.origins = 0;
  for (const auto& o : j.value("origin", json::array({"user"}))) {
    const auto s = o.get<std::string>();
    if (s == "miner") c.origins |= kOriginMiner;
    if (s == "llm") c.origins |= kOriginLlm;
    if (s == "user") c.origins |= kOriginUser;
  }
  if (c.origins == 0) c.origins = kOriginUser;
  return c;
}

MineResult mine_candidates(std::span<const Evidence> evidence, const MinerOptions& options) {
  if (evidence.empty()) throw std::invalid_argument("miner needs at least one evidence tuple");
  if (options.max_arity < 1 || options.max_arity > kMaxConjuncts) {
    throw std::invalid_argument("max_arity must be between 1 and 3");
  }
  MineResult result;
  // Index 0 / 1: candidates for class 0 / class 1, keyed by canonical form.
  std::array<std::map<std::string, Tally>, 2> tallies;
  std::size_t with_events = 0;
  std::size_t residue_lines = 0;

  for (const auto& ev : evidence) {
    if (ev.from_label == ev.to_label) continue;
    const ParsedCaption parsed = parse_caption(ev.text);
    residue_lines += parsed.residue.size();
    if (parsed.events.empty()) continue;
    ++with_events;
    std::vector<ObjectDescriptor> gained, lost;
    for (const auto& e : parsed.events) {
      if (e.after) gained.push_back(*e.after);
      if (e.before) lost.push_back(*e.before);
    }
    const bool up = ev.to_label == ClassLabel::One;
    const std::array<const std::vector<ObjectDescriptor>*, 2> per_class{up ? &lost : &gained,
                                                                        up ? &gained : &lost};
    for (std::size_t cls = 0; cls < 2; ++cls) {
      std::set<AtomSet> seen;
      for (const auto& d : *per_class[cls]) add_subsets(descriptor_atoms(d), options.max_arity, seen);
      for (const auto& atoms : seen) {
        Concept c = Concept::conjunction(atoms);
        auto [it, inserted] = tallies[cls].try_emplace(c.canonical(), Tally{c, {}});
        (up ? it->second.support.from_0_to_1 : it->second.support.from_1_to_0) += 1;
      }
    }
  }

  if (with_events == 0) {
    result.diagnostics.push_back("no caption contained a recognizable change event (" +
                                 std::to_string(evidence.size()) + " captions, " +
                                 std::to_string(residue_lines) + " unrecognized lines)");
    return result;
  }

  for (std::size_t cls = 0; cls < 2; ++cls) {
    std::vector<std::vector<CandidateExplanation>> by_arity(options.max_arity + 1);
    for (const auto& [key, tally] : tallies[cls]) {
      CandidateExplanation c{label_from_int(static_cast<int>(cls)), tally.cpt, tally.support, kOriginMiner};
      by_arity[tally.cpt.arity()].push_back(std::move(c));
    }
    for (auto& group : by_arity) {
      std::sort(group.begin(), group.end(), by_support_then_name);
      if (group.size() > options.top_k) group.resize(options.top_k);
      for (auto& c : group) result.candidates.push_back(std::move(c));
    }
  }
  std::sort(result.candidates.begin(), result.candidates.end(), by_support_then_name);
  return result;
}

std::vector<CandidateExplanation> dedupe(std::span<const CandidateExplanation> candidates) {
  std::vector<CandidateExplanation> out;
  std::map<std::pair<int, std::string>, std::size_t> index;
  for (const auto& c : candidates) {
    auto key = std::make_pair(to_int(c.target_class), c.hypothesis.canonical());
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(std::move(key), out.size());
      out.push_back(c);
      continue;
    }
    auto& kept = out[it->second];
    kept.support.from_0_to_1 = std::max(kept.support.from_0_to_1, c.support.from_0_to_1);
    kept.support.from_1_to_0 = std::max(kept.support.from_1_to_0, c.support.from_1_to_0);
    kept.origins |= c.origins;
  }
  return out;
}

std::string build_summary_prompt(std::span<const Evidence> evidence) {
  std::string blocks;
  for (const auto& ev : evidence) {
    if (!blocks.empty()) blocks.push_back('\n');
    blocks += "---\nFrom class " + std::to_string(to_int(ev.from_label)) + " to class " +
              std::to_string(to_int(ev.to_label)) + ":";
    std::istringstream in(ev.text);
    std::string line;
    while (std::getline(in, line)) {
      if (!trim(line).empty()) blocks += "\n  " + trim(line);
    }
  }
  return replace_all(std::string(prompts::stage3()), "{EVIDENCE}", blocks);
}

std::string build_independent_prompt(std::span<const Description> descriptions) {
  std::array<std::string, 2> groups;
  for (const auto& d : descriptions) {
    auto& g = groups[static_cast<std::size_t>(to_int(d.label))];
    if (!g.empty()) g.push_back('\n');
    g += "---\n" + trim(d.text);
  }
  std::string text = replace_all(std::string(prompts::stage3_independent()), "{DESCRIPTIONS_0}", groups[0]);
  return replace_all(std::move(text), "{DESCRIPTIONS_1}", groups[1]);
}

std::vector<CandidateExplanation> parse_bullets(std::string_view answer) {
  std::vector<CandidateExplanation> out;
  std::istringstream in{std::string(answer)};
  std::string line;
  while (std::getline(in, line)) {
    auto body = bullet_body(line);
    if (!body || body->empty()) continue;
    const std::string full = lower(*body);
    const bool names_one = full.find("class 1") != std::string::npos;
    const bool names_zero = full.find("class 0") != std::string::npos;
    std::string head = strip_markup(*body);
    if (auto colon = head.find(':'); colon != std::string::npos && colon > 0) head.resize(colon);
    head = trim(head);
    while (!head.empty() && (head.back() == '.' || head.back() == ';')) head.pop_back();
    if (head.empty()) continue;
    CandidateExplanation c;
    c.target_class = names_zero && !names_one ? ClassLabel::Zero : ClassLabel::One;
    c.hypothesis = parse_concept(head);
    c.origins = kOriginLlm;
    out.push_back(std::move(c));
  }
  return dedupe(out);
}

std::vector<CandidateExplanation> llm_summarize(TextGenerator& llm, const std::string& model,
                                                std::span<const Evidence> evidence) {
  if (evidence.empty()) throw std::invalid_argument("llm summarization needs at least one evidence tuple");
  ChatRequest req;
  req.model = model;
  req.messages.push_back(ChatMessage{"user", {ChatPart::of_text(build_summary_prompt(evidence))}});
  return parse_bullets(llm.complete(req));
}

std::vector<CandidateExplanation> llm_summarize_independent(TextGenerator& llm, const std::string& model,
                                                            std::span<const Description> descriptions) {
  if (descriptions.empty()) throw std::invalid_argument("llm summarization needs at least one description");
  ChatRequest req;
  req.model = model;
  req.messages.push_back(ChatMessage{"user", {ChatPart::of_text(build_independent_prompt(descriptions))}});
  return parse_bullets(llm.complete(req));
}

}  // namespace gift
