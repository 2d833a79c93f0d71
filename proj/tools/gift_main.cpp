// Command-line driver for the staged pipeline, the experiment suites and
// the exploration service.
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gift/explore.hpp"
#include "gift/net.hpp"
#include "gift/pipeline.hpp"
#include "gift/render.hpp"

namespace fs = std::filesystem;
using namespace gift;

namespace {

enum Exit { kOk = 0, kUsage = 1, kStage = 2, kEndpoint = 3 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  unsigned threads = 0;

  std::optional<std::string> rule, bias, caption_mode, summarizer, rank_key;
  std::optional<std::size_t> pairs, top_k, n_validation;
  std::optional<double> di_threshold;
};

// Config from --config, else the run directory's manifest, else defaults;
// command-line overrides apply last.
RunConfig resolve_config(const Globals& g, bool use_manifest) {
  RunConfig c;
  if (!g.config_path.empty()) {
    c = RunConfig::load(g.config_path);
  } else if (use_manifest && RunDirectory(g.out).has_manifest()) {
    c = RunDirectory(g.out).load_config();
  }
  if (g.seed) c.seed = *g.seed;
  if (g.rule) c.rule = *g.rule;
  if (g.bias) c.bias = *g.bias;
  if (g.pairs) c.pairs = *g.pairs;
  if (g.top_k) c.miner.top_k = *g.top_k;
  if (g.n_validation) c.n_positive = c.n_negative = *g.n_validation;
  if (g.di_threshold) c.di_threshold = *g.di_threshold;
  if (g.caption_mode) {
    if (*g.caption_mode != "change" && *g.caption_mode != "independent") {
      throw ConfigError("--caption-mode must be 'change' or 'independent'");
    }
    c.caption_mode = *g.caption_mode == "change" ? CaptionMode::Change : CaptionMode::Independent;
  }
  if (g.summarizer) {
    if (*g.summarizer != "miner" && *g.summarizer != "llm") throw ConfigError("--summarizer must be 'miner' or 'llm'");
    c.summarizer = *g.summarizer == "miner" ? SummarizerMode::Miner : SummarizerMode::Llm;
  }
  if (g.rank_key) {
    auto k = rank_key_from_string(*g.rank_key);
    if (!k) throw ConfigError("--rank-key must be 'cace' or 'pns'");
    c.rank_key = *k;
  }
  c.validate();
  return c;
}

std::string image_data_url(const fs::path& file) {
  const std::string bytes = read_file(file);
  const std::string ext = file.extension().string();
  if (ext == ".svg") return svg_data_url(bytes);
  const std::string mime = ext == ".png" ? "image/png" : (ext == ".jpg" || ext == ".jpeg") ? "image/jpeg" : "";
  if (mime.empty()) throw ConfigError("unsupported example image type: " + file.string());
  return "data:" + mime + ";base64," + base64_encode(bytes);
}

// Owns the generators referenced by Services.
struct Endpoints {
  std::unique_ptr<TextGenerator> vlm, llm;
  Services services;
};

std::unique_ptr<TextGenerator> make_generator(const std::string& prefix, const fs::path& transcript,
                                              std::string& model) {
  if (const char* replay = std::getenv((prefix + "_REPLAY").c_str()); replay != nullptr && *replay != '\0') {
    return std::make_unique<ReplayGenerator>(ReplayGenerator::from_jsonl(read_file(replay)));
  }
  auto ep = Endpoint::from_env(prefix);
  if (!ep) return nullptr;
  model = ep->model;
  return std::make_unique<HttpChatClient>(*ep, transcript);
}

Endpoints endpoints_from_env(const Globals& g) {
  Endpoints e;
  const fs::path transcripts = fs::path(g.out) / "transcripts";
  e.vlm = make_generator("GIFT_VLM", transcripts / "vlm.jsonl", e.services.vlm_model);
  e.llm = make_generator("GIFT_LLM", transcripts / "llm.jsonl", e.services.llm_model);
  e.services.vlm = e.vlm.get();
  e.services.llm = e.llm.get();
  e.services.encode_image = [](const Scene& s) { return svg_data_url(render_svg(s)); };
  const char* before = std::getenv("GIFT_VLM_EXAMPLE_BEFORE");
  const char* after = std::getenv("GIFT_VLM_EXAMPLE_AFTER");
  if (before != nullptr && after != nullptr) {
    e.services.vlm_example_images = {image_data_url(before), image_data_url(after)};
  }
  if (const char* url = std::getenv("GIFT_CLASSIFIER_URL"); url != nullptr && *url != '\0') {
    e.services.wire_classifier = std::make_shared<WireClassifier>(url);
  }
  e.services.threads = g.threads;
  return e;
}

void write_outputs(const fs::path& dir, const std::string& stem, const json& j, const std::string& md) {
  write_file(dir / (stem + ".json"), j.dump(2) + "\n");
  write_file(dir / (stem + ".md"), md);
}

ExploreService* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual-driven global explanations for classifiers over a synthetic scene world"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "run directory (suites: output directory)")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads, 0 = hardware concurrency");
  app.add_option("--rule", g.rule, "planted classifier rule");
  app.add_option("--bias", g.bias, "planted bias rule");
  app.add_option("--pairs", g.pairs, "counterfactual pairs to collect");
  app.add_option("--top-k", g.top_k, "miner candidates kept per class and arity");
  app.add_option("--validation", g.n_validation, "validation scenes per class");
  app.add_option("--di-threshold", g.di_threshold, "coarse filter threshold");
  app.add_option("--caption-mode", g.caption_mode, "change | independent");
  app.add_option("--summarizer", g.summarizer, "miner | llm");
  app.add_option("--rank-key", g.rank_key, "cace | pns");

  auto* gen = app.add_subcommand("gen", "sample the scene pool");
  auto* cex = app.add_subcommand("cex", "search counterfactual pairs");
  auto* caption = app.add_subcommand("caption", "caption the pairs");
  auto* summarize = app.add_subcommand("summarize", "propose candidate explanations");
  auto* verify = app.add_subcommand("verify", "evaluate and rank candidates");
  std::string candidates_file;
  std::vector<std::string> user_concepts;
  verify->add_option("--candidates", candidates_file, "JSONL or one phrase per line")->check(CLI::ExistingFile);
  verify->add_option("--concept", user_concepts, "evaluate the combination of these concepts on the run");
  auto* run = app.add_subcommand("run", "all four stages");

  auto* suite = app.add_subcommand("suite", "experiment suites");
  suite->require_subcommand(1);
  auto* recover = suite->add_subcommand("recover", "planted-rule recovery table");
  std::vector<std::string> rules;
  bool no_ablation = false;
  recover->add_option("--rules", rules, "rules to plant (default: the six-rule suite)")->delimiter(',');
  recover->add_flag("--no-ablation", no_ablation, "skip the independent-caption column");
  auto* bias = suite->add_subcommand("bias", "planted-bias discovery");
  int objects_per_scene = 3;
  bias->add_option("--objects-per-scene", objects_per_scene, "fixed scene size, 0 keeps the configured world")
      ->capture_default_str();

  auto* serve = app.add_subcommand("serve", "exploration HTTP API over completed runs");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    Endpoints ep = endpoints_from_env(g);
    const Services& services = ep.services;
    RunDirectory dir(g.out);

    if (*gen) {
      dir.gen(resolve_config(g, false), services);
    } else if (*cex) {
      dir.cex(resolve_config(g, true), services);
    } else if (*caption) {
      dir.caption(resolve_config(g, true), services);
    } else if (*summarize) {
      dir.summarize(resolve_config(g, true), services);
    } else if (*verify) {
      const RunConfig config = resolve_config(g, true);
      if (!user_concepts.empty()) {
        const auto model = make_model(config, services);
        const auto result = evaluate_user_concepts(config, *model, dir.load_validation(), user_concepts);
        std::cout << result.to_json().dump(2) << "\n";
        return kOk;
      }
      dir.verify(config, services,
                 candidates_file.empty() ? std::nullopt : std::optional<fs::path>(candidates_file));
      std::cout << "run " << dir.load_report().at("run_id").get<std::string>() << " -> "
                << dir.path("report.json").string() << "\n";
    } else if (*run) {
      dir.run_all(resolve_config(g, false), services);
      std::cout << "run " << dir.load_report().at("run_id").get<std::string>() << " -> "
                << dir.path("report.json").string() << "\n";
    } else if (*recover) {
      RecoveryOptions options;
      options.base = resolve_config(g, false);
      if (!rules.empty()) options.rules = rules;
      options.ablation = !no_ablation;
      const auto summary = run_recovery_suite(options, services);
      write_outputs(g.out, "recovery", summary.to_json(), summary.to_markdown());
      std::cout << summary.to_markdown();
    } else if (*bias) {
      BiasOptions options;
      options.base = resolve_config(g, false);
      if (!g.rule) options.base.rule = "green object";
      if (g.bias) options.bias = *g.bias;
      options.base.bias.clear();
      options.objects_per_scene = objects_per_scene;
      const auto summary = run_bias_suite(options, services);
      write_outputs(g.out, "bias", summary.to_json(), summary.to_markdown());
      std::cout << summary.to_markdown();
    } else if (*serve) {
      ExploreService service(g.out, services);
      const std::size_t n = service.scan();
      const int bound = service.bind(host, port);
      if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return kUsage;
      }
      std::cout << "serving " << n << " run(s) on http://" << host << ":" << bound << "\n" << std::flush;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.serve();
      g_service = nullptr;
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConceptError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << "\n";
    return kEndpoint;
  } catch (const std::exception& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return kStage;
  }
}
