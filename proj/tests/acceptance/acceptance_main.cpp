// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <map>
#include <string>

#include <unistd.h>

#include "../oracles.hpp"
#include "gift/counterfactual.hpp"
#include "gift/metrics.hpp"
#include "gift/pipeline.hpp"
#include "gift/rng.hpp"
#include "gift/world.hpp"

namespace fs = std::filesystem;
using namespace gift;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Verdict()>& check) {
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

ClassLabel label_of(int v) { return v ? ClassLabel::One : ClassLabel::Zero; }

// Random tables with sizes 1..500. Every fourth table is drawn from a skewed
// distribution so zero-denominator cases appear regularly.
std::vector<OutcomeTable> random_tables(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<OutcomeTable> tables;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
    const bool skewed = k % 4 == 3;
    const double p_presence = skewed ? (k % 8 == 3 ? 1.0 : 0.0) : std::uniform_real_distribution<>(0, 1)(rng);
    const double p_base = skewed && k % 16 == 7 ? 1.0 : std::uniform_real_distribution<>(0, 1)(rng);
    const double p_flip = std::uniform_real_distribution<>(0, 1)(rng);
    OutcomeTable t;
    for (std::size_t i = 0; i < n; ++i) {
      std::bernoulli_distribution pr(p_presence), pb(p_base), pf(p_flip);
      const bool presence = pr(rng);
      const int base = pb(rng) ? 1 : 0;
      const int flipped = pf(rng) ? 1 - base : base;
      t.push_back(OutcomeRow{presence, label_of(base), label_of(flipped)});
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Verdict metric_identity(const std::vector<OutcomeTable>& tables) {
  const auto t0 = Clock::now();
  double worst = 0, worst_oracle = 0;
  for (const auto& t : tables) {
    const double c = cace(t);
    const double p1 = pns_hat(t, ClassLabel::One);
    const double p0 = pns_hat(t, ClassLabel::Zero);
    worst = std::max(worst, std::abs(c - (p1 - p0)));
    worst_oracle = std::max({worst_oracle, std::abs(c - oracle::cace(t)), std::abs(p1 - oracle::pns(t, 1)),
                             std::abs(p0 - oracle::pns(t, 0))});
  }
  const double elapsed = seconds_since(t0);
  const bool ok = worst <= 1e-12 && worst_oracle <= 1e-12 && elapsed < 5.0;
  std::ostringstream d;
  d << tables.size() << " tables, max |cace-(pns1-pns0)| = " << worst << ", max deviation from oracle = " << worst_oracle
    << ", " << fmt("%.3f s", elapsed);
  return {ok, d.str()};
}

Verdict interventional_bound_holds(const std::vector<OutcomeTable>& tables) {
  std::size_t violations = 0, checks = 0;
  double worst_oracle = 0;
  for (const auto& t : tables) {
    for (int yv : {0, 1}) {
      ++checks;
      const double b = interventional_bound(t, label_of(yv));
      if (!(pns_hat(t, label_of(yv)) >= b)) ++violations;
      worst_oracle = std::max(worst_oracle, std::abs(b - oracle::bound(t, yv)));
    }
  }
  std::ostringstream d;
  d << checks << " (table, y) checks, " << violations << " violations, max deviation from oracle bound = "
    << worst_oracle;
  return {violations == 0 && worst_oracle <= 1e-12, d.str()};
}

Verdict di_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  std::size_t degenerate = 0, flag_mismatch = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
    double pc = std::uniform_real_distribution<>(0, 1)(rng);
    if (k % 10 == 0) pc = 0.0;
    if (k % 10 == 5) pc = 1.0;
    const double agree = std::uniform_real_distribution<>(0, 1)(rng);
    std::vector<std::uint8_t> c(n);
    std::vector<ClassLabel> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = std::bernoulli_distribution(pc)(rng) ? 1 : 0;
      const bool same = std::bernoulli_distribution(agree)(rng);
      y[i] = label_of(same ? c[i] : 1 - c[i]);
    }
    const auto got = directed_information(c, y);
    const auto want = oracle::directed_information(c, y, 2.0);
    degenerate += want.degenerate;
    flag_mismatch += got.degenerate != want.degenerate;
    worst = std::max(worst, std::abs(got.value - want.value));
  }
  // Fixed point: presence [1,1,1,0] vs labels [1,1,0,0].
  const std::vector<std::uint8_t> c{1, 1, 1, 0};
  const std::vector<ClassLabel> y{ClassLabel::One, ClassLabel::One, ClassLabel::Zero, ClassLabel::Zero};
  const double fixed = directed_information(c, y).value;
  std::ostringstream d;
  d << "1000 inputs (" << degenerate << " with H(c)=0), max |DI - oracle| = " << worst << ", flag mismatches "
    << flag_mismatch << ", DI([1,1,1,0],[1,1,0,0]) = " << fmt("%.4f", fixed);
  return {worst <= 1e-12 && flag_mismatch == 0 && degenerate > 0 && std::abs(fixed - 0.3837) < 5e-5, d.str()};
}

Verdict pn_ps_decomposition(const std::vector<OutcomeTable>& tables) {
  double worst = 0;
  std::size_t guards = 0, mismatches = 0;
  for (const auto& t : tables) {
    for (int yv : {0, 1}) {
      const auto yl = label_of(yv);
      const auto pn = pn_hat(t, yl);
      const auto ps = ps_hat(t, yl);
      const auto w = pns_weights(t, yl);
      const auto [w1, w0] = oracle::pns_weights(t, yv);
      const auto opn = oracle::pn(t, yv);
      const auto ops = oracle::ps(t, yv);
      guards += pn.zero_denominator + ps.zero_denominator;
      mismatches += (pn.zero_denominator != opn.zero) + (ps.zero_denominator != ops.zero);
      worst = std::max({worst, std::abs(pns_hat(t, yl) - (w1 * opn.value + w0 * ops.value)),
                        std::abs(pns_hat(t, yl) - (w.w_pn * pn.value + w.w_ps * ps.value)),
                        std::abs(pn.value - opn.value), std::abs(ps.value - ops.value)});
    }
  }
  std::ostringstream d;
  d << "max deviation " << worst << " over " << 2 * tables.size() << " (table, y) pairs, " << guards
    << " zero-denominator guards exercised, " << mismatches << " flag mismatches";
  return {worst <= 1e-12 && guards > 0 && mismatches == 0, d.str()};
}

RunConfig suite_base(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.pairs = 100;
  c.summarizer = SummarizerMode::Miner;
  c.noise = NoiseModel{};
  return c;
}

std::optional<RecoverySummary> recovery;
double recovery_seconds = 0;

Verdict rule_recovery() {
  RecoveryOptions o;
  o.base = suite_base(1);
  const auto t0 = Clock::now();
  recovery = run_recovery_suite(o);
  recovery_seconds = seconds_since(t0);
  bool unidirectional = true;
  std::size_t checked = 0;
  for (const auto& r : recovery->rows) {
    if (!r.metrics || r.metrics->pns_y0 != 0.0 || std::abs(r.metrics->pns_y1 - r.metrics->cace) != 0.0) {
      unidirectional = false;
    }
    unidirectional = unidirectional && r.overspecified_unidirectional;
    checked += r.n_overspecified;
  }
  std::ostringstream d;
  d << recovery->successes() << "/6 rules top-1 by CaCE; PNS0 = 0 and |PNS-CaCE| = 0 for the true rules and "
    << checked << " overspecified candidates: " << (unidirectional ? "yes" : "no") << "; "
    << fmt("%.1f s (both caption modes)", recovery_seconds);
  return {recovery->successes() >= 5 && unidirectional && recovery_seconds < 120.0, d.str()};
}

Verdict ablation() {
  if (!recovery) return {false, "recovery suite did not run"};
  std::ostringstream d;
  d << "independent captions recover " << recovery->ablation_successes() << "/6, change captions "
    << recovery->successes() << "/6";
  return {recovery->ablation_successes() < recovery->successes(), d.str()};
}

Verdict bias_discovery() {
  BiasOptions o;
  o.base = suite_base(3);
  o.base.rule = "green object";
  o.bias = "object in left region";
  const auto s = run_bias_suite(o);
  std::ostringstream d;
  d << "bias " << s.bias << ": CaCE " << (s.metrics ? fmt("%.3f", s.metrics->cace) : "n/a") << ", DI "
    << fmt("%.3f", s.di) << ", rank " << (s.rank ? std::to_string(*s.rank) : "-") << "; control DI";
  double control_max = 0;
  for (const auto& r : s.control_regions) {
    d << " " << r.concept_name << "=" << fmt("%.3f", r.di);
    control_max = std::max(control_max, r.di);
  }
  const bool ok = s.metrics && s.metrics->cace > 0.2 && s.di >= 0.15 && s.control_clean && control_max < 0.15;
  return {ok, d.str()};
}

Verdict noise_robustness() {
  RecoveryOptions o;
  o.base = suite_base(5);
  o.base.pairs = 150;
  o.base.noise = NoiseModel{0.2, 0.1, 0.2};
  o.rules = {"cyan object", "purple object", "metal object", "rubber object"};
  o.ablation = false;
  const auto s = run_recovery_suite(o);
  std::ostringstream d;
  d << s.successes() << "/4 single-attribute rules top-1 with noise (0.2, 0.1, 0.2), N=150 (";
  for (const auto& r : s.rows) d << " " << r.rule << "->" << (r.top_concept.empty() ? "-" : r.top_concept);
  d << " )";
  return {s.successes() == 4, d.str()};
}

Verdict counterfactual_minimality() {
  const WorldConfig world{8, 6, 3, 6};
  const std::vector<oracle::ObjectPredicate> rules{
      {Color::Cyan},
      {Color::Red, Material::Metal},
      {std::nullopt, Material::Rubber},
      {std::nullopt, std::nullopt, Shape::Sphere},
      {std::nullopt, std::nullopt, std::nullopt, Size::Large},
      {Color::Yellow, Material::Rubber},
      {Color::Purple},
      {std::nullopt, std::nullopt, std::nullopt, std::nullopt, true},
      {Color::Blue, std::nullopt, std::nullopt, std::nullopt, false, true},
      {std::nullopt, Material::Metal, Shape::Cube},
  };
  const std::vector<std::string> texts{"cyan object",        "red metal object",     "rubber object",
                                       "sphere",             "large object",         "yellow rubber object",
                                       "purple object",      "object in left region", "blue object in right region",
                                       "metal cube"};
  std::size_t agree = 0, exhausted = 0, by_depth[3] = {0, 0, 0};
  std::string first_mismatch;
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t r = i % rules.size();
    const Concept cpt = parse_concept(texts[r]);
    const RuleClassifier model(cpt);
    const Scene scene = sample_scene(derive_seed(77, i), world);
    const auto& pred = rules[r];
    auto label = [&](const std::vector<SceneObject>& objs) {
      for (const auto& o : objs) {
        if (pred(o, world.width, world.height)) return 1;
      }
      return 0;
    };
    std::vector<SceneObject> objs(scene.objects().begin(), scene.objects().end());
    const auto want = oracle::min_flip_depth(objs, world.width, world.height, label, 2);
    std::optional<int> got;
    bool valid = label(objs) == to_int(model.classify(scene));
    try {
      const auto pair = find_counterfactual(scene, model, SearchOptions{2, derive_seed(78, i)});
      got = static_cast<int>(pair.trace.size());
      valid = valid && apply_trace(scene, pair.trace) == pair.target && model.classify(pair.target) != pair.from_label;
    } catch (const BudgetExhausted&) {
    }
    if (got == want && valid) {
      ++agree;
    } else if (first_mismatch.empty()) {
      first_mismatch = " first mismatch: instance " + std::to_string(i) + " rule '" + texts[r] + "'";
    }
    if (want) {
      ++by_depth[*want];
    } else {
      ++exhausted;
    }
  }
  std::ostringstream d;
  d << agree << "/200 instances match the exhaustive minimum (depth 1: " << by_depth[1] << ", depth 2: " << by_depth[2]
    << ", none within 2: " << exhausted << "), " << fmt("%.1f s", seconds_since(t0)) << first_mismatch;
  return {agree == 200, d.str()};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

Verdict determinism() {
  const fs::path base = fs::temp_directory_path() / ("gift-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(base);
  RunConfig cfg = suite_base(11);
  cfg.rule = "red metal object";
  cfg.noise = NoiseModel{0.1, 0.05, 0.1};
  Services services;
  services.threads = 4;
  RunDirectory(base / "a").run_all(cfg, services);
  services.threads = 1;
  RunDirectory(base / "b").run_all(cfg, services);
  const auto a = snapshot(base / "a");
  const auto b = snapshot(base / "b");
  std::size_t json_files = 0;
  for (const auto& [name, _] : a) json_files += name.ends_with(".json") || name.ends_with(".jsonl");
  fs::remove_all(base);
  std::ostringstream d;
  d << a.size() << " files (" << json_files << " JSON/JSONL) compared across two runs with 4 and 1 threads: "
    << (a == b ? "byte-identical" : "DIFFERENT");
  return {a == b && json_files >= 9, d.str()};
}

}  // namespace

int main() {
  const auto tables = random_tables(42, 1000);
  report("metric-identity", [&] { return metric_identity(tables); });
  report("interventional-bound", [&] { return interventional_bound_holds(tables); });
  report("di-oracle-equivalence", di_oracle);
  report("pn-ps-decomposition", [&] { return pn_ps_decomposition(tables); });
  report("rule-recovery", rule_recovery);
  report("ablation-regression", ablation);
  report("bias-discovery", bias_discovery);
  report("noise-robustness", noise_robustness);
  report("counterfactual-minimality", counterfactual_minimality);
  report("determinism", determinism);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
