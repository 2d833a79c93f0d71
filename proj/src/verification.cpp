#include "gift/verification.hpp"

#include <algorithm>
#include <tuple>

#include "gift/editor.hpp"
#include "gift/parallel.hpp"
#include "gift/rng.hpp"

namespace gift {

std::size_t ValidationSet::count(ClassLabel y) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), y));
}

ValidationSet sample_validation_set(const Model& model, const WorldConfig& world, std::size_t n_one,
                                    std::size_t n_zero, std::uint64_t seed, std::size_t max_draws) {
  world.validate();
  ValidationSet vset;
  std::size_t ones = 0, zeros = 0;
  for (std::size_t draw = 0; ones < n_one || zeros < n_zero; ++draw) {
    if (draw == max_draws) {
      throw SamplingError("validation sampling gave up after " + std::to_string(max_draws) + " draws (" +
                          std::to_string(ones) + "/" + std::to_string(n_one) + " of class 1, " +
                          std::to_string(zeros) + "/" + std::to_string(n_zero) + " of class 0)");
    }
    Scene s = sample_scene(derive_seed(seed, static_cast<std::uint64_t>(draw)), world);
    const ClassLabel y = model.classify(s);
    std::size_t& have = y == ClassLabel::One ? ones : zeros;
    if (have >= (y == ClassLabel::One ? n_one : n_zero)) continue;
    ++have;
    vset.scenes.push_back(std::move(s));
    vset.labels.push_back(y);
  }
  return vset;
}

Partition partition(const ValidationSet& vset, const Concept& cpt, const Vqa& vqa) {
  if (!vqa.supports(cpt)) {
    throw ConceptError("concept '" + cpt.canonical() + "' cannot be evaluated by this VQA");
  }
  Partition p;
  p.presence.reserve(vset.scenes.size());
  for (const auto& s : vset.scenes) {
    const bool present = vqa.present(s, cpt);
    p.presence.push_back(present ? 1 : 0);
    (present ? p.n_present : p.n_absent) += 1;
  }
  return p;
}

json Intervention::to_json() const {
  return json{{"edited", edited.to_json()}, {"presence", presence},  {"row", row},
              {"source", source.to_json()}, {"y_base", to_int(y_base)}, {"y_flipped", to_int(y_flipped)}};
}

Intervention Intervention::from_json(const json& j) {
  return Intervention{j.at("row").get<std::size_t>(),           Scene::from_json(j.at("source")),
                      Scene::from_json(j.at("edited")),         j.at("presence").get<bool>(),
                      label_from_int(j.at("y_base").get<int>()), label_from_int(j.at("y_flipped").get<int>())};
}

OutcomeBuild build_outcome_table(const ValidationSet& vset, const Partition& part, const Concept& cpt,
                                 const Editor& editor, const Model& model, std::uint64_t seed) {
  if (part.presence.size() != vset.scenes.size()) {
    throw std::invalid_argument("partition does not match the validation set");
  }
  OutcomeBuild out;
  for (std::size_t i = 0; i < vset.scenes.size(); ++i) {
    const Scene& x = vset.scenes[i];
    const bool present = part.presence[i] != 0;
    try {
      Scene edited = present ? editor.remove(x, cpt)
                             : editor.add(x, cpt, derive_seed(seed, static_cast<std::uint64_t>(i)));
      const ClassLabel y_flipped = model.classify(edited);
      out.table.push_back(OutcomeRow{present, vset.labels[i], y_flipped});
      out.interventions.push_back(Intervention{i, x, std::move(edited), present, vset.labels[i], y_flipped});
    } catch (const EditError& e) {
      ++out.dropped;
      out.errors.push_back("row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Screened> coarse_filter(std::span<const CandidateExplanation> candidates, const ValidationSet& vset,
                                    const Vqa& vqa, double threshold) {
  std::vector<Screened> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    Screened s{c, std::nullopt, {}, false};
    if (vqa.supports(c.hypothesis)) {
      s.partition = partition(vset, c.hypothesis, vqa);
      s.di = directed_information(s.partition->presence, vset.labels);
      s.passes = s.di.value >= threshold;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view to_string(EvalStatus s) {
  switch (s) {
    case EvalStatus::Evaluated: return "evaluated";
    case EvalStatus::BelowThreshold: return "below_di_threshold";
    case EvalStatus::Unsupported: return "unsupported";
    case EvalStatus::Failed: return "failed";
  }
  return "failed";
}

double EvaluatedCandidate::pns() const {
  if (!report) return 0.0;
  return candidate.target_class == ClassLabel::One ? report->pns_y1 : report->pns_y0;
}

json EvaluatedCandidate::to_json() const {
  json j = candidate.to_json();
  j["status"] = to_string(status);
  j["di"] = di.value;
  j["di_degenerate"] = di.degenerate;
  j["metrics"] = report ? report->to_json() : json(nullptr);
  if (!notice.empty()) j["notice"] = notice;
  return j;
}

EvaluatedCandidate EvaluatedCandidate::from_json(const json& j) {
  EvaluatedCandidate e;
  e.candidate = CandidateExplanation::from_json(j);
  const auto status = j.at("status").get<std::string>();
  for (auto s : {EvalStatus::Evaluated, EvalStatus::BelowThreshold, EvalStatus::Unsupported, EvalStatus::Failed}) {
    if (to_string(s) == status) e.status = s;
  }
  e.di = DiEstimate{j.at("di").get<double>(), j.at("di_degenerate").get<bool>()};
  if (!j.at("metrics").is_null()) e.report = MetricReport::from_json(j.at("metrics"));
  e.notice = j.value("notice", "");
  return e;
}

std::uint64_t concept_seed(std::uint64_t seed, const Concept& cpt) {
  return derive_seed(seed, cpt.canonical());
}

std::vector<EvaluatedCandidate> evaluate(std::span<const CandidateExplanation> candidates, const ValidationSet& vset,
                                         const Editor& editor, const Model& model, const Vqa& vqa,
                                         const EvaluateOptions& options) {
  std::vector<EvaluatedCandidate> out(candidates.size());
  parallel_for(
      candidates.size(),
      [&](std::size_t i) {
        EvaluatedCandidate& e = out[i];
        e.candidate = candidates[i];
        const Concept& c = e.candidate.hypothesis;
        if (!vqa.supports(c) || !editor.supports(c)) {
          e.status = EvalStatus::Unsupported;
          e.notice = "concept '" + c.canonical() + "' needs an external VQA and editor; skipped in oracle mode";
          return;
        }
        const Partition part = partition(vset, c, vqa);
        e.di = directed_information(part.presence, vset.labels);
        if (e.di.value < options.di_threshold) {
          e.status = EvalStatus::BelowThreshold;
          return;
        }
        OutcomeBuild built = build_outcome_table(vset, part, c, editor, model, concept_seed(options.seed, c));
        if (built.table.empty()) {
          e.status = EvalStatus::Failed;
          e.notice = "every intervention failed";
          if (!built.errors.empty()) e.notice += ": " + built.errors.front();
          return;
        }
        MetricReport r = causal_report(built.table);
        r.di = e.di.value;
        r.di_degenerate = e.di.degenerate;
        r.n_dropped = built.dropped;
        if (built.dropped > 0) {
          e.notice = std::to_string(built.dropped) + " interventions dropped; first: " + built.errors.front();
        }
        e.report = r;
        e.interventions = std::move(built.interventions);
        e.status = EvalStatus::Evaluated;
      },
      options.threads);
  return out;
}

std::string_view to_string(RankKey k) { return k == RankKey::Cace ? "cace" : "pns"; }

std::optional<RankKey> rank_key_from_string(std::string_view s) {
  if (s == "cace") return RankKey::Cace;
  if (s == "pns") return RankKey::Pns;
  return std::nullopt;
}

std::vector<EvaluatedCandidate> rank(std::vector<EvaluatedCandidate> evaluated, RankKey key) {
  auto sort_key = [key](const EvaluatedCandidate& e) {
    const bool ok = e.status == EvalStatus::Evaluated;
    const double cace = ok ? e.report->cace : 0.0;
    const double primary = key == RankKey::Cace ? cace : e.pns();
    const double secondary = key == RankKey::Cace ? e.pns() : cace;
    // Negated so that ascending tuple order means descending metrics.
    return std::make_tuple(!ok, ok ? -primary : 0.0, ok ? -secondary : 0.0, ok ? 0.0 : -e.di.value,
                           e.candidate.hypothesis.canonical(), -to_int(e.candidate.target_class));
  };
  std::stable_sort(evaluated.begin(), evaluated.end(),
                   [&](const EvaluatedCandidate& a, const EvaluatedCandidate& b) { return sort_key(a) < sort_key(b); });
  return evaluated;
}

}  // namespace gift
