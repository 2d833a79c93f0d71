// Stage 3: candidate global explanations from captioned counterfactual pairs.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gift/captioning.hpp"
#include "gift/chat.hpp"
#include "gift/classifier.hpp"
#include "gift/concept.hpp"

namespace gift {

// One evidence tuple: caption text and the label change it explains.
struct Evidence {
  std::string text;
  ClassLabel from_label = ClassLabel::Zero;
  ClassLabel to_label = ClassLabel::One;
};

enum Origin : std::uint8_t { kOriginMiner = 1, kOriginLlm = 2, kOriginUser = 4 };

struct Support {
  std::size_t from_0_to_1 = 0;
  std::size_t from_1_to_0 = 0;
  std::size_t total() const { return from_0_to_1 + from_1_to_0; }
};

struct CandidateExplanation {
  ClassLabel target_class = ClassLabel::One;
  Concept hypothesis = Concept::opaque("");
  Support support;
  std::uint8_t origins = kOriginMiner;

  json to_json() const;
  static CandidateExplanation from_json(const json& j);
};

struct MinerOptions {
  std::size_t max_arity = 3;
  std::size_t top_k = 20;  // per class and arity
};

struct MineResult {
  std::vector<CandidateExplanation> candidates;
  std::vector<std::string> diagnostics;
};

// Gained descriptors of a 0->1 pair (lost ones of a 1->0 pair) are evidence
// for class 1, the mirror for class 0. A tuple supports a conjunction when
// one of its evidence descriptors satisfies every conjunct. Output is sorted
// by class (1 first), support descending, then canonical string.
MineResult mine_candidates(std::span<const Evidence> evidence, const MinerOptions& options = {});

// Collapses entries with equal (class, canonical concept): support by max,
// origins united, first occurrence keeps its position.
std::vector<CandidateExplanation> dedupe(std::span<const CandidateExplanation> candidates);

// Stage 3 prompt with one block per evidence tuple.
std::string build_summary_prompt(std::span<const Evidence> evidence);

struct Description {
  std::string text;
  ClassLabel label = ClassLabel::Zero;
};
// Ablation prompt grouping whole-image descriptions by predicted class.
std::string build_independent_prompt(std::span<const Description> descriptions);

// Bulleted lines of an LLM answer turned into candidates. A bullet naming
// "class 0" (and not "class 1") targets class 0, everything else class 1.
// Phrases outside the grammar become opaque candidates.
std::vector<CandidateExplanation> parse_bullets(std::string_view answer);

// Throws std::invalid_argument on empty evidence; endpoint errors propagate.
std::vector<CandidateExplanation> llm_summarize(TextGenerator& llm, const std::string& model,
                                                std::span<const Evidence> evidence);
std::vector<CandidateExplanation> llm_summarize_independent(TextGenerator& llm, const std::string& model,
                                                            std::span<const Description> descriptions);

}  // namespace gift
