// Stage 4: validation set, concept partition, interventions, DI screening,
// causal evaluation and ranking.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gift/classifier.hpp"
#include "gift/editor.hpp"
#include "gift/metrics.hpp"
#include "gift/summarizer.hpp"
#include "gift/world.hpp"

namespace gift {

// Answers "is this concept present in the scene".
class Vqa {
 public:
  virtual ~Vqa() = default;
  virtual bool supports(const Concept& cpt) const = 0;
  virtual bool present(const Scene& scene, const Concept& cpt) const = 0;
};

class OracleVqa final : public Vqa {
 public:
  bool supports(const Concept& cpt) const override { return !cpt.is_opaque(); }
  bool present(const Scene& scene, const Concept& cpt) const override {
    return eval_concept(scene, cpt);
  }
};

// Adds or removes a concept.
class Editor {
 public:
  virtual ~Editor() = default;
  virtual bool supports(const Concept& cpt) const = 0;
  virtual Scene add(const Scene& scene, const Concept& cpt, std::uint64_t seed) const = 0;
  virtual Scene remove(const Scene& scene, const Concept& cpt) const = 0;
};

class OracleEditor final : public Editor {
 public:
  bool supports(const Concept& cpt) const override { return !cpt.is_opaque(); }
  Scene add(const Scene& scene, const Concept& cpt, std::uint64_t seed) const override {
    return edit_add(scene, cpt, seed);
  }
  Scene remove(const Scene& scene, const Concept& cpt) const override {
    return edit_remove(scene, cpt);
  }
};

struct ValidationSet {
  std::vector<Scene> scenes;
  std::vector<ClassLabel> labels;  // model predictions, never ground truth

  std::size_t count(ClassLabel y) const;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejection-samples scenes until n_one are predicted 1 and n_zero predicted
// 0, in draw order. Throws SamplingError after max_draws draws.
ValidationSet sample_validation_set(const Model& model, const WorldConfig& world, std::size_t n_one,
                                    std::size_t n_zero, std::uint64_t seed, std::size_t max_draws = 200000);

struct Partition {
  std::vector<std::uint8_t> presence;  // per validation scene
  std::size_t n_present = 0;
  std::size_t n_absent = 0;
  bool one_sided() const { return n_present == 0 || n_absent == 0; }
};

// Throws ConceptError when the VQA cannot evaluate the concept.
Partition partition(const ValidationSet& vset, const Concept& cpt, const Vqa& vqa);

struct Intervention {
  std::size_t row = 0;  // index into the validation set
  Scene source;
  Scene edited;
  bool presence = false;
  ClassLabel y_base = ClassLabel::Zero;
  ClassLabel y_flipped = ClassLabel::Zero;

  json to_json() const;
  static Intervention from_json(const json& j);
};

struct OutcomeBuild {
  OutcomeTable table;
  std::vector<Intervention> interventions;
  std::size_t dropped = 0;
  std::vector<std::string> errors;  // one per dropped row
};

// Removes the concept where present, adds it where absent. Rows whose edit
// fails are dropped and reported. Row i uses seed derive_seed(seed, i).
OutcomeBuild build_outcome_table(const ValidationSet& vset, const Partition& part, const Concept& cpt,
                                 const Editor& editor, const Model& model, std::uint64_t seed);

inline constexpr double kDefaultDiThreshold = 0.15;

struct Screened {
  CandidateExplanation candidate;
  std::optional<Partition> partition;  // empty when the VQA cannot evaluate it
  DiEstimate di;
  bool passes = false;
};

std::vector<Screened> coarse_filter(std::span<const CandidateExplanation> candidates, const ValidationSet& vset,
                                    const Vqa& vqa, double threshold = kDefaultDiThreshold);

enum class EvalStatus : std::uint8_t { Evaluated, BelowThreshold, Unsupported, Failed };
std::string_view to_string(EvalStatus s);

struct EvaluatedCandidate {
  CandidateExplanation candidate;
  EvalStatus status = EvalStatus::Failed;
  std::string notice;
  DiEstimate di;
  std::optional<MetricReport> report;
  std::vector<Intervention> interventions;

  // Rank-relevant PNS: the one for the candidate's target class.
  double pns() const;
  json to_json() const;  // without interventions
  static EvaluatedCandidate from_json(const json& j);
};

struct EvaluateOptions {
  std::uint64_t seed = 0;
  double di_threshold = kDefaultDiThreshold;
  unsigned threads = 0;
};

// Intervention seed of a candidate, shared by every entry point so the same
// concept always gets the same edits.
std::uint64_t concept_seed(std::uint64_t seed, const Concept& cpt);

std::vector<EvaluatedCandidate> evaluate(std::span<const CandidateExplanation> candidates, const ValidationSet& vset,
                                         const Editor& editor, const Model& model, const Vqa& vqa,
                                         const EvaluateOptions& options);

enum class RankKey : std::uint8_t { Cace, Pns };
std::string_view to_string(RankKey k);
std::optional<RankKey> rank_key_from_string(std::string_view s);

// Evaluated candidates first, by the key (CaCE or PNS) descending, then the
// other metric descending, then canonical concept and class; the rest follow
// by DI descending and canonical concept.
std::vector<EvaluatedCandidate> rank(std::vector<EvaluatedCandidate> evaluated, RankKey key = RankKey::Cace);

}  // namespace gift
