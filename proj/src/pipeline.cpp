#include "gift/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "gift/prompts.hpp"
#include "gift/render.hpp"
#include "gift/rng.hpp"

namespace gift {
namespace fs = std::filesystem;

namespace {

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ConfigError("unsupported TOML value type (dates are not accepted)");
}

void reject_unknown(const json& section, std::string_view name, std::initializer_list<std::string_view> keys) {
  if (!section.is_object()) throw ConfigError("config section '" + std::string(name) + "' must be a table");
  for (const auto& [k, v] : section.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError("unknown key '" + k + "' in section '" + std::string(name) + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string_view to_string(CaptionMode m) { return m == CaptionMode::Change ? "change" : "independent"; }
std::string_view to_string(SummarizerMode m) { return m == SummarizerMode::Miner ? "miner" : "llm"; }
std::string_view to_string(NeighborMode m) { return m == NeighborMode::Vocabulary ? "vocabulary" : "exhaustive"; }

std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<json> parse_jsonl(const std::string& text, const fs::path& origin) {
  std::vector<json> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw StageError(origin.string() + ":" + std::to_string(n) + ": invalid JSON");
    }
    rows.push_back(std::move(j));
  }
  return rows;
}

std::string content_hash(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

std::string candidates_jsonl(const std::vector<CandidateExplanation>& candidates) {
  std::vector<json> rows;
  for (const auto& c : candidates) rows.push_back(c.to_json());
  return to_jsonl(rows);
}

std::string compute_run_id(const RunConfig& config, const std::vector<CandidateExplanation>& candidates) {
  return content_hash(stage_config_hash(config, "verify") + "\n" + candidates_jsonl(candidates));
}

Concept rule_concept(const std::string& text, const char* what) {
  Concept c = parse_concept(text);
  if (c.is_opaque()) throw ConfigError(std::string(what) + " '" + text + "' is outside the concept grammar");
  return c;
}

std::optional<std::size_t> find_rank(const std::vector<EvaluatedCandidate>& ranked, const Concept& target,
                                     ClassLabel cls) {
  std::size_t pos = 0;
  for (const auto& e : ranked) {
    if (e.status != EvalStatus::Evaluated) break;
    ++pos;
    if (e.candidate.target_class == cls && e.candidate.hypothesis == target) return pos;
  }
  return std::nullopt;
}

const EvaluatedCandidate* find_candidate(const std::vector<EvaluatedCandidate>& ranked, const Concept& target,
                                         ClassLabel cls) {
  for (const auto& e : ranked) {
    if (e.candidate.target_class == cls && e.candidate.hypothesis == target) return &e;
  }
  return nullptr;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  out << v;
  return out.str();
}

}  // namespace

// ---- configuration ---------------------------------------------------------

void RunConfig::validate() const {
  try {
    world.validate();
  } catch (const SceneError& e) {
    throw ConfigError(std::string("world: ") + e.what());
  }
  if (classifier_kind != "rule" && classifier_kind != "wire") {
    throw ConfigError("classifier.kind must be 'rule' or 'wire'");
  }
  if (classifier_kind == "rule") {
    rule_concept(rule, "classifier rule");
    if (!bias.empty()) rule_concept(bias, "bias rule");
  }
  if (presence_label != 0 && presence_label != 1) throw ConfigError("classifier.presence_label must be 0 or 1");
  if (pairs < 1) throw ConfigError("stage1.pairs must be positive");
  if (effective_pool() < pairs) throw ConfigError("stage1.pool must be at least stage1.pairs");
  if (budget < 1) throw ConfigError("stage1.budget must be >= 1");
  if (captioner != "oracle" && captioner != "vlm") throw ConfigError("stage2.captioner must be 'oracle' or 'vlm'");
  if (vlm_prompt != "bdd" && vlm_prompt != "celeba") throw ConfigError("stage2.vlm_prompt must be 'bdd' or 'celeba'");
  try {
    noise.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (miner.max_arity < 1 || miner.max_arity > kMaxConjuncts) throw ConfigError("stage3.max_arity must be 1..3");
  if (miner.top_k < 1) throw ConfigError("stage3.top_k must be positive");
  if (n_positive < 1 || n_negative < 1) throw ConfigError("stage4 validation sizes must be positive");
  if (!(di_threshold >= 0.0 && di_threshold <= 1.0)) throw ConfigError("stage4.di_threshold must lie in [0, 1]");
}

json RunConfig::to_json() const {
  return json{
      {"seed", seed},
      {"world", world.to_json()},
      {"classifier",
       {{"kind", classifier_kind}, {"rule", rule}, {"bias", bias}, {"presence_label", presence_label}}},
      {"stage1", {{"pairs", pairs}, {"pool", pool}, {"budget", budget}, {"search", to_string(search)}}},
      {"stage2",
       {{"mode", to_string(caption_mode)},
        {"captioner", captioner},
        {"vlm_prompt", vlm_prompt},
        {"p_drop", noise.p_drop},
        {"p_swap", noise.p_swap},
        {"p_spurious", noise.p_spurious}}},
      {"stage3", {{"mode", to_string(summarizer)}, {"max_arity", miner.max_arity}, {"top_k", miner.top_k}}},
      {"stage4",
       {{"n_positive", n_positive},
        {"n_negative", n_negative},
        {"di_threshold", di_threshold},
        {"rank_key", to_string(rank_key)}}},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "root", {"seed", "world", "classifier", "stage1", "stage2", "stage3", "stage4"});
  read(j, "seed", c.seed);
  if (j.contains("world")) {
    reject_unknown(j["world"], "world", {"width", "height", "min_objects", "max_objects"});
    read(j["world"], "width", c.world.width);
    read(j["world"], "height", c.world.height);
    read(j["world"], "min_objects", c.world.min_objects);
    read(j["world"], "max_objects", c.world.max_objects);
  }
  if (j.contains("classifier")) {
    const auto& s = j["classifier"];
    reject_unknown(s, "classifier", {"kind", "rule", "bias", "presence_label"});
    read(s, "kind", c.classifier_kind);
    read(s, "rule", c.rule);
    read(s, "bias", c.bias);
    read(s, "presence_label", c.presence_label);
  }
  if (j.contains("stage1")) {
    const auto& s = j["stage1"];
    reject_unknown(s, "stage1", {"pairs", "pool", "budget", "search"});
    read(s, "pairs", c.pairs);
    read(s, "pool", c.pool);
    read(s, "budget", c.budget);
    std::string search = std::string(to_string(c.search));
    read(s, "search", search);
    if (search == "vocabulary") {
      c.search = NeighborMode::Vocabulary;
    } else if (search == "exhaustive") {
      c.search = NeighborMode::Exhaustive;
    } else {
      throw ConfigError("stage1.search must be 'vocabulary' or 'exhaustive'");
    }
  }
  if (j.contains("stage2")) {
    const auto& s = j["stage2"];
    reject_unknown(s, "stage2", {"mode", "captioner", "vlm_prompt", "p_drop", "p_swap", "p_spurious"});
    std::string mode = std::string(to_string(c.caption_mode));
    read(s, "mode", mode);
    if (mode == "change") {
      c.caption_mode = CaptionMode::Change;
    } else if (mode == "independent") {
      c.caption_mode = CaptionMode::Independent;
    } else {
      throw ConfigError("stage2.mode must be 'change' or 'independent'");
    }
    read(s, "captioner", c.captioner);
    read(s, "vlm_prompt", c.vlm_prompt);
    read(s, "p_drop", c.noise.p_drop);
    read(s, "p_swap", c.noise.p_swap);
    read(s, "p_spurious", c.noise.p_spurious);
  }
  if (j.contains("stage3")) {
    const auto& s = j["stage3"];
    reject_unknown(s, "stage3", {"mode", "max_arity", "top_k"});
    std::string mode = std::string(to_string(c.summarizer));
    read(s, "mode", mode);
    if (mode == "miner") {
      c.summarizer = SummarizerMode::Miner;
    } else if (mode == "llm") {
      c.summarizer = SummarizerMode::Llm;
    } else {
      throw ConfigError("stage3.mode must be 'miner' or 'llm'");
    }
    read(s, "max_arity", c.miner.max_arity);
    read(s, "top_k", c.miner.top_k);
  }
  if (j.contains("stage4")) {
    const auto& s = j["stage4"];
    reject_unknown(s, "stage4", {"n_positive", "n_negative", "di_threshold", "rank_key"});
    read(s, "n_positive", c.n_positive);
    read(s, "n_negative", c.n_negative);
    read(s, "di_threshold", c.di_threshold);
    std::string key = std::string(to_string(c.rank_key));
    read(s, "rank_key", key);
    auto parsed = rank_key_from_string(key);
    if (!parsed) throw ConfigError("stage4.rank_key must be 'cace' or 'pns'");
    c.rank_key = *parsed;
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_toml(std::string_view text) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "invalid TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  return from_json(toml_to_json(table));
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_toml(buf.str());
}

std::uint64_t RunConfig::stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

std::string stage_config_hash(const RunConfig& config, std::string_view stage) {
  const json full = config.to_json();
  json scope{{"schema_version", kSchemaVersion},
             {"seed", full["seed"]},
             {"world", full["world"]},
             {"classifier", full["classifier"]},
             {"pool", config.effective_pool()}};
  const auto pos = std::find(kStages.begin(), kStages.end(), stage) - kStages.begin();
  if (pos >= static_cast<long>(kStages.size())) throw std::invalid_argument("unknown stage " + std::string(stage));
  if (pos >= 1) scope["stage1"] = full["stage1"];
  if (pos >= 2) scope["stage2"] = full["stage2"];
  if (pos >= 3) scope["stage3"] = full["stage3"];
  if (pos >= 4) scope["stage4"] = full["stage4"];
  return content_hash(scope.dump());
}

std::shared_ptr<const Model> make_model(const RunConfig& config, const Services& services) {
  if (config.classifier_kind == "wire") {
    if (!services.wire_classifier) throw ConfigError("classifier.kind = 'wire' needs a classifier endpoint");
    return services.wire_classifier;
  }
  std::optional<Concept> bias;
  if (!config.bias.empty()) bias = rule_concept(config.bias, "bias rule");
  return std::make_shared<RuleClassifier>(rule_concept(config.rule, "classifier rule"), bias,
                                          label_from_int(config.presence_label));
}

// ---- records ---------------------------------------------------------------

json CaptionRecord::to_json() const {
  json events_json = json::array();
  for (const auto& e : events) events_json.push_back(gift::to_json(e));
  json j{{"events", std::move(events_json)},
         {"from_label", to_int(from_label)},
         {"mode", to_string(mode)},
         {"pair", "cf-" + std::to_string(pair)},
         {"text", text},
         {"to_label", to_int(to_label)}};
  if (mode == CaptionMode::Independent) j["target_text"] = target_text;
  return j;
}

CaptionRecord CaptionRecord::from_json(const json& j) {
  CaptionRecord r;
  const std::string id = j.at("pair").get<std::string>();
  r.pair = std::stoul(id.substr(id.find('-') + 1));
  r.mode = j.at("mode").get<std::string>() == "independent" ? CaptionMode::Independent : CaptionMode::Change;
  r.from_label = label_from_int(j.at("from_label").get<int>());
  r.to_label = label_from_int(j.at("to_label").get<int>());
  r.text = j.at("text").get<std::string>();
  r.target_text = j.value("target_text", "");
  r.events = parse_caption(r.text).events;
  return r;
}

// ---- stages ----------------------------------------------------------------

std::vector<LabeledScene> run_gen(const RunConfig& config, const Model& model) {
  const std::size_t total = config.effective_pool();
  ValidationSet drawn;
  try {
    drawn = sample_validation_set(model, config.world, (total + 1) / 2, total / 2, config.stage_seed("gen"),
                                  2000 * total);
  } catch (const SamplingError& e) {
    throw StageError(std::string("scene pool: ") + e.what());
  }
  std::array<std::vector<Scene>, 2> by_label;
  for (std::size_t i = 0; i < drawn.scenes.size(); ++i) {
    by_label[static_cast<std::size_t>(to_int(drawn.labels[i]))].push_back(drawn.scenes[i]);
  }
  std::vector<LabeledScene> pool;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t cls = i % 2 == 0 ? 1 : 0;
    pool.push_back(LabeledScene{by_label[cls][i / 2], label_from_int(static_cast<int>(cls))});
  }
  return pool;
}

CexResult run_cex(const RunConfig& config, const Model& model, const std::vector<LabeledScene>& pool,
                  unsigned threads) {
  CexResult result;
  SearchOptions options{config.budget, config.stage_seed("cex"), config.search};
  std::size_t next = 0;
  while (result.pairs.size() < config.pairs && next < pool.size()) {
    const std::size_t chunk = std::min(config.pairs - result.pairs.size(), pool.size() - next);
    std::vector<Scene> scenes;
    for (std::size_t i = next; i < next + chunk; ++i) scenes.push_back(pool[i].scene);
    auto outcomes = build_pair_set(scenes, model, options, threads);
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      CexRecord rec{next + k, std::move(outcomes[k].pair), std::move(outcomes[k].failure)};
      if (rec.pair) {
        result.pairs.push_back(*rec.pair);
        result.pair_scene_index.push_back(rec.scene_index);
      }
      result.records.push_back(std::move(rec));
    }
    next += chunk;
  }
  return result;
}

std::vector<CaptionRecord> run_caption(const RunConfig& config, const std::vector<CounterfactualPair>& pairs,
                                       const Services& services) {
  std::vector<CaptionRecord> out;
  const std::uint64_t seed = config.stage_seed("caption");
  const bool vlm = config.caption_mode == CaptionMode::Change && config.captioner == "vlm";
  if (vlm && (services.vlm == nullptr || !services.encode_image)) {
    throw ConfigError("stage2.captioner = 'vlm' needs a VLM endpoint");
  }
  if (vlm && services.vlm_example_images.size() != 2) {
    throw ConfigError("the VLM prompt needs the one-shot example pair (two images)");
  }
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& p = pairs[j];
    CaptionRecord r;
    r.pair = j;
    r.mode = config.caption_mode;
    r.from_label = p.from_label;
    r.to_label = p.to_label;
    if (config.caption_mode == CaptionMode::Independent) {
      r.text = independent_caption(p.source);
      r.target_text = independent_caption(p.target);
    } else if (vlm) {
      const std::string_view prompt = config.vlm_prompt == "celeba" ? prompts::stage2_celeba() : prompts::stage2_bdd();
      ChatRequest req;
      req.model = services.vlm_model;
      req.messages.push_back(interleave_images(
          prompt, {services.vlm_example_images[0], services.vlm_example_images[1], services.encode_image(p.source),
                   services.encode_image(p.target)}));
      r.text = services.vlm->complete(req);
      r.events = parse_caption(r.text).events;
    } else {
      ChangeCaption cap = caption_changes(diff_scenes(p.source, p.target), p.from_label, p.to_label);
      cap = corrupt_caption(cap, config.noise, derive_seed(seed, static_cast<std::uint64_t>(j)));
      r.text = cap.rendered;
      r.events = cap.events;
    }
    out.push_back(std::move(r));
  }
  return out;
}

MineResult run_summarize(const RunConfig& config, const std::vector<CaptionRecord>& captions,
                         const Services& services) {
  if (captions.empty()) throw StageError("no captions to summarize");
  MineResult result;
  if (config.summarizer == SummarizerMode::Miner) {
    std::vector<Evidence> evidence;
    for (const auto& c : captions) {
      std::string text = c.text;
      if (c.mode == CaptionMode::Independent) text += "\n" + c.target_text;
      evidence.push_back(Evidence{std::move(text), c.from_label, c.to_label});
    }
    result = mine_candidates(evidence, config.miner);
  } else {
    if (services.llm == nullptr) throw ConfigError("stage3.mode = 'llm' needs an LLM endpoint");
    if (captions.front().mode == CaptionMode::Independent) {
      std::vector<Description> descriptions;
      for (const auto& c : captions) {
        descriptions.push_back(Description{c.text, c.from_label});
        descriptions.push_back(Description{c.target_text, c.to_label});
      }
      result.candidates = llm_summarize_independent(*services.llm, services.llm_model, descriptions);
    } else {
      std::vector<Evidence> evidence;
      for (const auto& c : captions) evidence.push_back(Evidence{c.text, c.from_label, c.to_label});
      result.candidates = llm_summarize(*services.llm, services.llm_model, evidence);
    }
    if (result.candidates.empty()) result.diagnostics.push_back("the LLM answer contained no bulleted factors");
  }
  result.candidates = dedupe(result.candidates);
  return result;
}

Report run_verify(const RunConfig& config, const Model& model, const std::vector<CandidateExplanation>& candidates,
                  unsigned threads) {
  Report report;
  try {
    report.vset = sample_validation_set(model, config.world, config.n_positive, config.n_negative,
                                        config.stage_seed("verify"));
  } catch (const SamplingError& e) {
    throw StageError(std::string("validation set: ") + e.what());
  }
  const EvaluateOptions options{config.stage_seed("verify"), config.di_threshold, threads};
  auto evaluated = evaluate(candidates, report.vset, OracleEditor{}, model, OracleVqa{}, options);
  report.ranked = rank(std::move(evaluated), config.rank_key);
  report.run_id = compute_run_id(config, candidates);
  return report;
}

EvaluatedCandidate evaluate_user_concepts(const RunConfig& config, const Model& model, const ValidationSet& vset,
                                          const std::vector<std::string>& phrases) {
  if (phrases.empty()) throw ConceptError("no concepts given");
  std::vector<Concept> parts;
  for (const auto& p : phrases) {
    Concept c = parse_concept(p);
    if (c.is_opaque()) {
      throw ConceptError("'" + p + "' is outside the concept grammar and needs an external VQA and editor");
    }
    parts.push_back(std::move(c));
  }
  CandidateExplanation candidate;
  candidate.target_class = ClassLabel::One;
  candidate.hypothesis = combine(parts);
  candidate.origins = kOriginUser;
  const EvaluateOptions options{config.stage_seed("verify"), 0.0, 1};
  auto out = evaluate(std::span<const CandidateExplanation>(&candidate, 1), vset, OracleEditor{}, model,
                      OracleVqa{}, options);
  return std::move(out.front());
}

PipelineResult run_pipeline(const RunConfig& config, const Services& services) {
  config.validate();
  auto model = make_model(config, services);
  PipelineResult r;
  r.pool = run_gen(config, *model);
  r.cex = run_cex(config, *model, r.pool, services.threads);
  if (r.cex.pairs.empty()) throw StageError("no counterfactual pair found within the edit budget");
  r.captions = run_caption(config, r.cex.pairs, services);
  r.mined = run_summarize(config, r.captions, services);
  r.report = run_verify(config, *model, r.mined.candidates, services.threads);
  r.report.diagnostics = r.mined.diagnostics;
  return r;
}

// ---- files -----------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("missing artifact " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StageError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw StageError("short write to " + path.string());
}

std::vector<CandidateExplanation> read_candidates_file(const fs::path& path) {
  std::vector<CandidateExplanation> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      out.push_back(CandidateExplanation::from_json(j));
    } else {
      // A bare phrase per line is accepted for hand-written files.
      CandidateExplanation c;
      c.hypothesis = parse_concept(line);
      c.origins = kOriginUser;
      out.push_back(std::move(c));
    }
  }
  return dedupe(out);
}

RunDirectory::RunDirectory(fs::path root) : root_(std::move(root)) {}

bool RunDirectory::has_manifest() const { return fs::exists(path("manifest.json")); }

json RunDirectory::manifest() const {
  if (!has_manifest()) throw StageError("no manifest.json in " + root_.string());
  json j = json::parse(read_file(path("manifest.json")), nullptr, false);
  if (j.is_discarded()) throw StageError("manifest.json is not valid JSON");
  return j;
}

void RunDirectory::require_stage(const RunConfig& config, std::string_view stage) const {
  const json m = manifest();
  const std::string name(stage);
  if (!m.contains("stages") || !m["stages"].contains(name)) {
    throw StageError("stage '" + name + "' has not been run in " + root_.string());
  }
  const auto& entry = m["stages"][name];
  if (entry.at("config_hash").get<std::string>() != stage_config_hash(config, stage)) {
    throw StageError("config mismatch: stage '" + name + "' artifacts were produced with a different config");
  }
  for (const auto& [file, hash] : entry.at("files").items()) {
    if (!fs::exists(path(file))) throw StageError("missing artifact " + path(file).string());
    if (content_hash(read_file(path(file))) != hash.get<std::string>()) {
      throw StageError("artifact " + file + " changed since stage '" + name + "' wrote it");
    }
  }
}

void RunDirectory::record_stage(const RunConfig& config, std::string_view stage,
                                const std::vector<std::string>& files, const json& extra) {
  json m = has_manifest() ? manifest() : json::object();
  m["schema_version"] = kSchemaVersion;
  m["config"] = config.to_json();
  json& stages = m["stages"];
  if (!stages.is_object()) stages = json::object();
  const auto pos = std::find(kStages.begin(), kStages.end(), stage) - kStages.begin();
  for (std::size_t i = static_cast<std::size_t>(pos); i < kStages.size(); ++i) stages.erase(std::string(kStages[i]));
  json entry = extra;
  entry["config_hash"] = stage_config_hash(config, stage);
  entry["seed"] = config.stage_seed(stage);
  json file_hashes = json::object();
  for (const auto& f : files) file_hashes[f] = content_hash(read_file(path(f)));
  entry["files"] = std::move(file_hashes);
  stages[std::string(stage)] = std::move(entry);
  if (stage != "verify") m.erase("run_id");
  if (extra.contains("run_id")) m["run_id"] = extra["run_id"];
  write_file(path("manifest.json"), m.dump(2) + "\n");
}

void RunDirectory::gen(const RunConfig& config, const Services& services) {
  config.validate();
  auto model = make_model(config, services);
  const auto pool = run_gen(config, *model);
  std::vector<json> rows;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    rows.push_back({{"index", i}, {"label", to_int(pool[i].label)}, {"scene", pool[i].scene.to_json()}});
  }
  fs::create_directories(root_);
  write_file(path("scenes.jsonl"), to_jsonl(rows));
  record_stage(config, "gen", {"scenes.jsonl"}, {{"scenes", pool.size()}});
}

void RunDirectory::cex(const RunConfig& config, const Services& services) {
  require_stage(config, "gen");
  auto model = make_model(config, services);
  const auto result = run_cex(config, *model, load_pool(), services.threads);
  std::vector<json> pair_rows, failure_rows;
  for (std::size_t j = 0; j < result.pairs.size(); ++j) {
    json row = result.pairs[j].to_json();
    row["id"] = "cf-" + std::to_string(j);
    row["scene_index"] = result.pair_scene_index[j];
    pair_rows.push_back(std::move(row));
    write_file(path("gallery/cf-" + std::to_string(j) + "-source.svg"), render_svg(result.pairs[j].source));
    write_file(path("gallery/cf-" + std::to_string(j) + "-target.svg"), render_svg(result.pairs[j].target));
  }
  for (const auto& rec : result.records) {
    if (!rec.pair) failure_rows.push_back({{"reason", rec.failure}, {"scene_index", rec.scene_index}});
  }
  write_file(path("pairs.jsonl"), to_jsonl(pair_rows));
  write_file(path("cex_failures.jsonl"), to_jsonl(failure_rows));
  if (result.pairs.empty()) throw StageError("no counterfactual pair found within the edit budget");
  record_stage(config, "cex", {"pairs.jsonl", "cex_failures.jsonl"},
               {{"pairs", result.pairs.size()}, {"failures", failure_rows.size()}, {"requested", config.pairs}});
}

void RunDirectory::caption(const RunConfig& config, const Services& services) {
  require_stage(config, "cex");
  const auto captions = run_caption(config, load_pairs(), services);
  std::vector<json> rows;
  for (const auto& c : captions) rows.push_back(c.to_json());
  fs::create_directories(path("transcripts"));
  write_file(path("captions.jsonl"), to_jsonl(rows));
  record_stage(config, "caption", {"captions.jsonl"}, {{"captions", captions.size()}});
}

void RunDirectory::summarize(const RunConfig& config, const Services& services) {
  require_stage(config, "caption");
  const auto mined = run_summarize(config, load_captions(), services);
  write_file(path("candidates.jsonl"), candidates_jsonl(mined.candidates));
  record_stage(config, "summarize", {"candidates.jsonl"},
               {{"candidates", mined.candidates.size()}, {"diagnostics", mined.diagnostics}});
}

void RunDirectory::verify(const RunConfig& config, const Services& services,
                          const std::optional<fs::path>& candidates_file) {
  config.validate();
  std::vector<CandidateExplanation> candidates;
  std::vector<std::string> diagnostics;
  if (candidates_file) {
    candidates = read_candidates_file(*candidates_file);
  } else {
    require_stage(config, "summarize");
    candidates = load_candidates();
    for (const auto& d : manifest()["stages"]["summarize"].value("diagnostics", json::array())) {
      diagnostics.push_back(d.get<std::string>());
    }
  }
  auto model = make_model(config, services);
  Report report = run_verify(config, *model, candidates, services.threads);

  std::vector<json> validation_rows;
  for (std::size_t i = 0; i < report.vset.scenes.size(); ++i) {
    validation_rows.push_back(
        {{"label", to_int(report.vset.labels[i])}, {"row", i}, {"scene", report.vset.scenes[i].to_json()}});
  }
  std::vector<json> intervention_rows;
  json ranked = json::array();
  std::size_t position = 0;
  std::array<std::size_t, 4> status_counts{};
  for (const auto& e : report.ranked) {
    ++status_counts[static_cast<std::size_t>(e.status)];
    json row = e.to_json();
    row["rank"] = e.status == EvalStatus::Evaluated ? json(++position) : json(nullptr);
    if (!e.interventions.empty()) {
      row["interventions"] = {{"count", e.interventions.size()},
                              {"first", "iv-" + std::to_string(intervention_rows.size())}};
      for (const auto& iv : e.interventions) {
        json ij = iv.to_json();
        ij["concept"] = e.candidate.hypothesis.canonical();
        ij["id"] = "iv-" + std::to_string(intervention_rows.size());
        ij["target_class"] = to_int(e.candidate.target_class);
        intervention_rows.push_back(std::move(ij));
      }
    } else {
      row["interventions"] = nullptr;
    }
    ranked.push_back(std::move(row));
  }
  json seeds{{"master", config.seed}};
  for (auto s : kStages) seeds[std::string(s)] = config.stage_seed(s);
  json doc{
      {"artifacts",
       {{"candidates", candidates_file ? candidates_file->filename().string() : std::string("candidates.jsonl")},
        {"captions", "captions.jsonl"},
        {"gallery", "gallery/"},
        {"interventions", "interventions.jsonl"},
        {"pairs", "pairs.jsonl"},
        {"transcripts", "transcripts/"},
        {"validation", "validation.jsonl"}}},
      {"candidates", std::move(ranked)},
      {"classifier", model->describe()},
      {"config_hash", stage_config_hash(config, "verify")},
      {"di_threshold", config.di_threshold},
      {"diagnostics", diagnostics},
      {"ranking_key", to_string(config.rank_key)},
      {"run_id", report.run_id},
      {"schema_version", kSchemaVersion},
      {"seeds", std::move(seeds)},
      {"summary",
       {{"below_di_threshold", status_counts[static_cast<std::size_t>(EvalStatus::BelowThreshold)]},
        {"candidates", report.ranked.size()},
        {"evaluated", status_counts[static_cast<std::size_t>(EvalStatus::Evaluated)]},
        {"failed", status_counts[static_cast<std::size_t>(EvalStatus::Failed)]},
        {"unsupported", status_counts[static_cast<std::size_t>(EvalStatus::Unsupported)]}}},
      {"validation",
       {{"class_0", report.vset.count(ClassLabel::Zero)}, {"class_1", report.vset.count(ClassLabel::One)}}},
  };
  fs::create_directories(root_);
  write_file(path("validation.jsonl"), to_jsonl(validation_rows));
  write_file(path("interventions.jsonl"), to_jsonl(intervention_rows));
  write_file(path("report.json"), doc.dump(2) + "\n");
  record_stage(config, "verify", {"validation.jsonl", "interventions.jsonl", "report.json"},
               {{"run_id", report.run_id}, {"candidates_source", candidates_file ? "external" : "candidates.jsonl"}});
}

void RunDirectory::run_all(const RunConfig& config, const Services& services) {
  gen(config, services);
  cex(config, services);
  caption(config, services);
  summarize(config, services);
  verify(config, services);
}

std::vector<LabeledScene> RunDirectory::load_pool() const {
  std::vector<LabeledScene> pool;
  for (const auto& j : parse_jsonl(read_file(path("scenes.jsonl")), path("scenes.jsonl"))) {
    pool.push_back(LabeledScene{Scene::from_json(j.at("scene")), label_from_int(j.at("label").get<int>())});
  }
  return pool;
}

std::vector<CounterfactualPair> RunDirectory::load_pairs() const {
  std::vector<CounterfactualPair> pairs;
  for (const auto& j : parse_jsonl(read_file(path("pairs.jsonl")), path("pairs.jsonl"))) {
    pairs.push_back(CounterfactualPair::from_json(j));
  }
  return pairs;
}

std::vector<CaptionRecord> RunDirectory::load_captions() const {
  std::vector<CaptionRecord> captions;
  for (const auto& j : parse_jsonl(read_file(path("captions.jsonl")), path("captions.jsonl"))) {
    captions.push_back(CaptionRecord::from_json(j));
  }
  return captions;
}

std::vector<CandidateExplanation> RunDirectory::load_candidates() const {
  std::vector<CandidateExplanation> out;
  for (const auto& j : parse_jsonl(read_file(path("candidates.jsonl")), path("candidates.jsonl"))) {
    out.push_back(CandidateExplanation::from_json(j));
  }
  return out;
}

ValidationSet RunDirectory::load_validation() const {
  ValidationSet v;
  for (const auto& j : parse_jsonl(read_file(path("validation.jsonl")), path("validation.jsonl"))) {
    v.scenes.push_back(Scene::from_json(j.at("scene")));
    v.labels.push_back(label_from_int(j.at("label").get<int>()));
  }
  return v;
}

json RunDirectory::load_report() const {
  json j = json::parse(read_file(path("report.json")), nullptr, false);
  if (j.is_discarded()) throw StageError("report.json is not valid JSON");
  return j;
}

RunConfig RunDirectory::load_config() const { return RunConfig::from_json(manifest().at("config")); }

// ---- suites ----------------------------------------------------------------

std::size_t RecoverySummary::successes() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.top1; }));
}

std::size_t RecoverySummary::ablation_successes() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.ablation_top1.value_or(false); }));
}

json RecoverySummary::to_json() const {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"ablation_candidates", r.ablation_candidates},
                   {"ablation_top1", r.ablation_top1 ? json(*r.ablation_top1) : json(nullptr)},
                   {"candidates", r.n_candidates},
                   {"metrics", r.metrics ? r.metrics->to_json() : json(nullptr)},
                   {"overspecified", r.n_overspecified},
                   {"overspecified_unidirectional", r.overspecified_unidirectional},
                   {"pairs", r.n_pairs},
                   {"rank", r.rank ? json(*r.rank) : json(nullptr)},
                   {"rule", r.rule},
                   {"top1", r.top1},
                   {"top_concept", r.top_concept}});
  }
  return json{{"ablation_successes", ablation_successes()}, {"rows", std::move(out)}, {"successes", successes()}};
}

std::string RecoverySummary::to_markdown() const {
  std::ostringstream md;
  md << "| Rule | Top-1 | Rank | CaCE | PNS1 | PNS0 | abs(PNS1-CaCE) | Candidates | Pairs | Ablation top-1 |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    md << "| " << r.rule << " | " << (r.top1 ? "yes" : "no") << " | " << (r.rank ? std::to_string(*r.rank) : "-");
    if (r.metrics) {
      md << " | " << fmt(r.metrics->cace) << " | " << fmt(r.metrics->pns_y1) << " | " << fmt(r.metrics->pns_y0)
         << " | " << fmt(std::abs(r.metrics->pns_y1 - r.metrics->cace));
    } else {
      md << " | - | - | - | -";
    }
    md << " | " << r.n_candidates << " | " << r.n_pairs << " | "
       << (r.ablation_top1 ? (*r.ablation_top1 ? "yes" : "no") : "-") << " |\n";
  }
  md << "\nRecovered " << successes() << "/" << rows.size() << " rules";
  if (std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.ablation_top1.has_value(); })) {
    md << " (independent captions: " << ablation_successes() << "/" << rows.size() << ")";
  }
  md << ".\n";
  return md.str();
}

RecoverySummary run_recovery_suite(const RecoveryOptions& options, const Services& services) {
  RecoverySummary summary;
  for (const auto& rule_text : options.rules) {
    RunConfig cfg = options.base;
    cfg.rule = rule_text;
    cfg.bias.clear();
    cfg.classifier_kind = "rule";
    cfg.caption_mode = CaptionMode::Change;
    const Concept truth = rule_concept(rule_text, "planted rule");
    const ClassLabel cls = label_from_int(cfg.presence_label);

    RecoveryRow row;
    row.rule = truth.canonical();
    const PipelineResult res = run_pipeline(cfg, services);
    const auto& ranked = res.report.ranked;
    row.n_pairs = res.cex.pairs.size();
    row.n_candidates = ranked.size();
    row.rank = find_rank(ranked, truth, cls);
    row.top1 = row.rank == std::size_t{1};
    if (!ranked.empty() && ranked.front().status == EvalStatus::Evaluated) {
      row.top_concept = ranked.front().candidate.hypothesis.canonical();
    }
    if (const auto* e = find_candidate(ranked, truth, cls); e != nullptr && e->report) row.metrics = e->report;
    for (const auto& e : ranked) {
      if (e.status != EvalStatus::Evaluated || e.candidate.target_class != cls) continue;
      if (!truth.implied_by(e.candidate.hypothesis)) continue;
      ++row.n_overspecified;
      const double opposite = cls == ClassLabel::One ? e.report->pns_y0 : e.report->pns_y1;
      if (opposite != 0.0) row.overspecified_unidirectional = false;
    }
    if (options.ablation) {
      cfg.caption_mode = CaptionMode::Independent;
      const PipelineResult abl = run_pipeline(cfg, services);
      row.ablation_top1 = find_rank(abl.report.ranked, truth, cls) == std::size_t{1};
      row.ablation_candidates = abl.report.ranked.size();
    }
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

json BiasSummary::to_json() const {
  auto regions = [](const std::vector<RegionDi>& v) {
    json out = json::array();
    for (const auto& r : v) out.push_back({{"concept", r.concept_name}, {"degenerate", r.degenerate}, {"di", r.di}});
    return out;
  };
  return json{{"bias", bias},
              {"bias_regions", regions(bias_regions)},
              {"control_clean", control_clean},
              {"control_regions", regions(control_regions)},
              {"di", di},
              {"llm_comparison", llm_comparison},
              {"metrics", metrics ? metrics->to_json() : json(nullptr)},
              {"rank", rank ? json(*rank) : json(nullptr)},
              {"surfaced", surfaced}};
}

std::string BiasSummary::to_markdown() const {
  std::ostringstream md;
  md << "Bias concept: `" << bias << "`\n\n";
  md << "| Run | Concept | DI | CaCE | Rank |\n|---|---|---|---|---|\n";
  md << "| biased | " << bias << " | " << fmt(di) << " | " << (metrics ? fmt(metrics->cace) : "-") << " | "
     << (rank ? std::to_string(*rank) : "-") << " |\n";
  for (const auto& r : bias_regions) md << "| biased | " << r.concept_name << " | " << fmt(r.di) << " | | |\n";
  for (const auto& r : control_regions) md << "| control | " << r.concept_name << " | " << fmt(r.di) << " | | |\n";
  md << "\nBias surfaced: " << (surfaced ? "yes" : "no") << ". Control region concepts below DI threshold: "
     << (control_clean ? "yes" : "no") << ".\n";
  md << "LLM mode: " << llm_comparison << "\n";
  return md.str();
}

BiasSummary run_bias_suite(const BiasOptions& options, const Services& services) {
  BiasSummary s;
  const Concept bias = rule_concept(options.bias, "bias rule");
  s.bias = bias.canonical();
  const std::array<Concept, 3> regions{Concept::conjunction({Atom::region(Region::Left)}),
                                       Concept::conjunction({Atom::region(Region::Right)}),
                                       Concept::conjunction({Atom::region(Region::Near)})};
  auto region_dis = [&](const ValidationSet& vset) {
    std::vector<RegionDi> out;
    for (const auto& r : regions) {
      const auto di = directed_information(partition(vset, r, OracleVqa{}).presence, vset.labels);
      out.push_back(RegionDi{r.canonical(), di.value, di.degenerate});
    }
    return out;
  };

  RunConfig cfg = options.base;
  cfg.classifier_kind = "rule";
  cfg.bias = options.bias;
  if (options.objects_per_scene > 0) cfg.world.min_objects = cfg.world.max_objects = options.objects_per_scene;
  const PipelineResult biased = run_pipeline(cfg, services);
  const ClassLabel cls = label_from_int(cfg.presence_label);
  s.rank = find_rank(biased.report.ranked, bias, cls);
  if (const auto* e = find_candidate(biased.report.ranked, bias, cls)) {
    s.di = e->di.value;
    if (e->report) s.metrics = e->report;
    s.surfaced = e->status == EvalStatus::Evaluated && e->report->cace > 0.2 && e->di.value >= cfg.di_threshold;
  }
  s.bias_regions = region_dis(biased.report.vset);

  RunConfig control = cfg;
  control.bias.clear();
  const PipelineResult clean = run_pipeline(control, services);
  s.control_regions = region_dis(clean.report.vset);
  s.control_clean = std::all_of(s.control_regions.begin(), s.control_regions.end(),
                                [&](const RegionDi& r) { return r.di < cfg.di_threshold; });

  if (services.llm != nullptr) {
    RunConfig llm_cfg = cfg;
    llm_cfg.summarizer = SummarizerMode::Llm;
    const PipelineResult llm_run = run_pipeline(llm_cfg, services);
    const auto* e = find_candidate(llm_run.report.ranked, bias, cls);
    const bool found = e != nullptr && e->status == EvalStatus::Evaluated && e->report->cace > 0.2;
    s.llm_comparison = std::string("bias ") + (found ? "surfaced" : "not surfaced") + " with " +
                       std::to_string(llm_run.report.ranked.size()) + " LLM candidates";
  } else {
    s.llm_comparison = "not run (no LLM endpoint configured); miner only";
  }
  return s;
}

}  // namespace gift
