// Run configuration, the four stages, on-disk artifacts and experiment
// suites.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gift/captioning.hpp"
#include "gift/chat.hpp"
#include "gift/counterfactual.hpp"
#include "gift/summarizer.hpp"
#include "gift/verification.hpp"
#include "gift/world.hpp"

namespace gift {

inline constexpr int kSchemaVersion = 1;

enum class CaptionMode : std::uint8_t { Change, Independent };
enum class SummarizerMode : std::uint8_t { Miner, Llm };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a stage cannot run: missing inputs, hash mismatch, empty data.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  WorldConfig world;

  std::string classifier_kind = "rule";  // rule | wire
  std::string rule = "cyan object";
  std::string bias;                      // empty = none
  int presence_label = 1;

  std::size_t pairs = 100;
  std::size_t pool = 0;  // scenes offered to the search; 0 = 4 x pairs
  int budget = 3;
  NeighborMode search = NeighborMode::Vocabulary;

  CaptionMode caption_mode = CaptionMode::Change;
  std::string captioner = "oracle";  // oracle | vlm
  std::string vlm_prompt = "bdd";    // bdd | celeba
  NoiseModel noise;

  SummarizerMode summarizer = SummarizerMode::Miner;
  MinerOptions miner;

  std::size_t n_positive = 100;
  std::size_t n_negative = 100;
  double di_threshold = kDefaultDiThreshold;
  RankKey rank_key = RankKey::Cace;

  std::size_t effective_pool() const { return pool == 0 ? 4 * pairs : pool; }
  void validate() const;

  json to_json() const;
  static RunConfig from_json(const json& j);
  // TOML with the sections world, classifier, stage1..stage4.
  static RunConfig from_toml(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  std::uint64_t stage_seed(std::string_view stage) const;
};

// Stage names in execution order.
inline constexpr std::array<std::string_view, 5> kStages{"gen", "cex", "caption", "summarize", "verify"};

// Hash of every setting that influences stage `stage` and the ones before it.
std::string stage_config_hash(const RunConfig& config, std::string_view stage);

// External collaborators. Null members fall back to the exact oracles.
struct Services {
  TextGenerator* vlm = nullptr;
  std::string vlm_model;
  std::vector<std::string> vlm_example_images;  // the one-shot pair, as image URLs
  std::function<std::string(const Scene&)> encode_image;
  TextGenerator* llm = nullptr;
  std::string llm_model;
  std::shared_ptr<const Model> wire_classifier;
  unsigned threads = 0;
};

std::shared_ptr<const Model> make_model(const RunConfig& config, const Services& services);

struct LabeledScene {
  Scene scene;
  ClassLabel label = ClassLabel::Zero;
};

struct CexRecord {
  std::size_t scene_index = 0;
  std::optional<CounterfactualPair> pair;
  std::string failure;
};

struct CexResult {
  std::vector<CexRecord> records;  // every scene searched, in pool order
  std::vector<CounterfactualPair> pairs;
  std::vector<std::size_t> pair_scene_index;
};

struct CaptionRecord {
  std::size_t pair = 0;
  CaptionMode mode = CaptionMode::Change;
  ClassLabel from_label = ClassLabel::Zero;
  ClassLabel to_label = ClassLabel::One;
  std::string text;         // change caption, or the source description
  std::string target_text;  // independent mode: target description
  std::vector<ChangeEvent> events;

  json to_json() const;
  static CaptionRecord from_json(const json& j);
};

struct Report {
  std::string run_id;
  std::vector<EvaluatedCandidate> ranked;
  ValidationSet vset;
  std::vector<std::string> diagnostics;
};

// Balanced pool, alternating predicted class 1 and class 0.
std::vector<LabeledScene> run_gen(const RunConfig& config, const Model& model);
CexResult run_cex(const RunConfig& config, const Model& model, const std::vector<LabeledScene>& pool,
                  unsigned threads = 0);
std::vector<CaptionRecord> run_caption(const RunConfig& config, const std::vector<CounterfactualPair>& pairs,
                                       const Services& services);
MineResult run_summarize(const RunConfig& config, const std::vector<CaptionRecord>& captions,
                         const Services& services);
// Ranked evaluation of `candidates` on a fresh validation set.
Report run_verify(const RunConfig& config, const Model& model, const std::vector<CandidateExplanation>& candidates,
                  unsigned threads = 0);

// Parses each phrase, combines them and evaluates the result as a user
// candidate for class 1 with the run's stage-4 seed and no DI cut, so the
// CLI and the exploration service return identical reports.
EvaluatedCandidate evaluate_user_concepts(const RunConfig& config, const Model& model, const ValidationSet& vset,
                                          const std::vector<std::string>& phrases);

// Everything one in-memory run produces.
struct PipelineResult {
  std::vector<LabeledScene> pool;
  CexResult cex;
  std::vector<CaptionRecord> captions;
  MineResult mined;
  Report report;
};

PipelineResult run_pipeline(const RunConfig& config, const Services& services = {});

// ---- on-disk runs ----------------------------------------------------------

class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(std::string_view name) const { return root_ / name; }

  bool has_manifest() const;
  json manifest() const;

  // Stage entry points: each checks the previous stage's manifest entry
  // against `config` and records its own.
  void gen(const RunConfig& config, const Services& services);
  void cex(const RunConfig& config, const Services& services);
  void caption(const RunConfig& config, const Services& services);
  void summarize(const RunConfig& config, const Services& services);
  // candidates_file overrides candidates.jsonl and skips the summarize check.
  void verify(const RunConfig& config, const Services& services,
              const std::optional<std::filesystem::path>& candidates_file = std::nullopt);
  void run_all(const RunConfig& config, const Services& services);

  std::vector<LabeledScene> load_pool() const;
  std::vector<CounterfactualPair> load_pairs() const;
  std::vector<CaptionRecord> load_captions() const;
  std::vector<CandidateExplanation> load_candidates() const;
  ValidationSet load_validation() const;
  json load_report() const;
  RunConfig load_config() const;  // from the manifest

 private:
  void require_stage(const RunConfig& config, std::string_view stage) const;
  void record_stage(const RunConfig& config, std::string_view stage, const std::vector<std::string>& files,
                    const json& extra = json::object());

  std::filesystem::path root_;
};

std::vector<CandidateExplanation> read_candidates_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// ---- suites ----------------------------------------------------------------

struct RecoveryOptions {
  std::vector<std::string> rules{"cyan object", "purple object", "metal object", "rubber object",
                                 "red metal object", "yellow rubber object"};
  RunConfig base;
  bool ablation = true;
};

struct RecoveryRow {
  std::string rule;  // canonical
  bool top1 = false;
  std::optional<std::size_t> rank;  // 1-based among evaluated candidates
  std::optional<MetricReport> metrics;
  bool overspecified_unidirectional = true;  // PNS0 = 0 for the rule and its refinements
  std::size_t n_overspecified = 0;
  std::size_t n_candidates = 0;
  std::size_t n_pairs = 0;
  std::optional<bool> ablation_top1;
  std::size_t ablation_candidates = 0;
  std::string top_concept;
};

struct RecoverySummary {
  std::vector<RecoveryRow> rows;
  std::size_t successes() const;
  std::size_t ablation_successes() const;
  json to_json() const;
  std::string to_markdown() const;
};

RecoverySummary run_recovery_suite(const RecoveryOptions& options, const Services& services = {});

struct BiasOptions {
  RunConfig base;  // rule = base concept; bias defaults to "object in left region"
  std::string bias = "object in left region";
  // Scenes of exactly this many objects; 0 keeps base.world. With a variable
  // count, "any object in a region" tracks scene size and hence the label.
  int objects_per_scene = 3;
};

struct RegionDi {
  std::string concept_name;
  double di = 0.0;
  bool degenerate = false;
};

struct BiasSummary {
  std::string bias;
  bool surfaced = false;
  std::optional<std::size_t> rank;
  std::optional<MetricReport> metrics;
  double di = 0.0;
  std::vector<RegionDi> bias_regions;
  std::vector<RegionDi> control_regions;
  bool control_clean = false;
  std::string llm_comparison;

  json to_json() const;
  std::string to_markdown() const;
};

BiasSummary run_bias_suite(const BiasOptions& options, const Services& services = {});

}  // namespace gift
