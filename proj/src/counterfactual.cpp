#include "gift/counterfactual.hpp"

#include <algorithm>
#include <array>

#include "gift/parallel.hpp"
#include "gift/rng.hpp"

namespace gift {
namespace {

template <typename E, std::size_t N>
std::vector<E> candidate_values(const std::array<E, N>& all, const std::vector<bool>& mentioned,
                                Rng& rng) {
  std::vector<E> values;
  std::vector<E> others;
  for (E v : all) {
    (mentioned[static_cast<std::size_t>(v)] ? values : others).push_back(v);
  }
  // One representative stands in for every value no rule mentions.
  if (!others.empty()) values.push_back(others[uniform_index(rng, others.size())]);
  std::sort(values.begin(), values.end());
  return values;
}

template <typename E, std::size_t N>
std::vector<E> all_values(const std::array<E, N>& all) {
  return {all.begin(), all.end()};
}

int cell_class(const NeighborPlan& plan, Cell c, int width, int height) {
  int cls = 0;
  if (plan.split_side && in_region(Region::Left, c, width, height)) cls |= 1;
  if (plan.split_depth && in_region(Region::Near, c, width, height)) cls |= 2;
  return cls;
}

// Destination cells for moves and adds, in canonical cell order.
std::vector<Cell> destination_cells(const Scene& scene, const NeighborPlan& plan) {
  std::vector<Cell> free = scene.free_cells();
  if (plan.all_cells) return free;
  std::array<std::optional<Cell>, 4> reps;
  for (Cell c : plan.cell_preference) {
    if (scene.at(c) != nullptr) continue;
    auto& slot = reps[static_cast<std::size_t>(cell_class(plan, c, scene.width(), scene.height()))];
    if (!slot) slot = c;
  }
  std::vector<Cell> cells;
  for (const auto& r : reps) {
    if (r) cells.push_back(*r);
  }
  std::sort(cells.begin(), cells.end());
  return cells;
}

bool dfs(const Scene& scene, int depth_left, const Model& model, ClassLabel from,
         const NeighborPlan& plan, EditTrace& trace, std::optional<Scene>& found) {
  if (depth_left == 0) {
    if (model.classify(scene) != from) {
      found = scene;
      return true;
    }
    return false;
  }
  for (const auto& edit : enumerate_neighbors(scene, plan)) {
    Scene next = apply_edit(scene, edit);
    trace.push_back(edit);
    if (dfs(next, depth_left - 1, model, from, plan, trace, found)) return true;
    trace.pop_back();
  }
  return false;
}

}  // namespace

json CounterfactualPair::to_json() const {
  return json{{"from_label", to_int(from_label)},
              {"source", source.to_json()},
              {"target", target.to_json()},
              {"to_label", to_int(to_label)},
              {"trace", gift::to_json(trace)}};
}

CounterfactualPair CounterfactualPair::from_json(const json& j) {
  CounterfactualPair p{Scene::from_json(j.at("source")), Scene::from_json(j.at("target")),
                       trace_from_json(j.at("trace")), label_from_int(j.at("from_label").get<int>()),
                       label_from_int(j.at("to_label").get<int>())};
  if (!(apply_trace(p.source, p.trace) == p.target)) {
    throw EditError("pair trace does not reproduce the target scene");
  }
  return p;
}

NeighborPlan NeighborPlan::make(const Scene& scene, const Model& model, NeighborMode mode,
                                std::uint64_t seed) {
  NeighborPlan plan;
  const auto rules = model.known_rules();
  if (mode == NeighborMode::Exhaustive || rules.empty()) {
    plan.colors = all_values(kColors);
    plan.materials = all_values(kMaterials);
    plan.shapes = all_values(kShapes);
    plan.sizes = all_values(kSizes);
    plan.all_cells = true;
    return plan;
  }
  std::vector<bool> colors(kColors.size()), materials(kMaterials.size()), shapes(kShapes.size()),
      sizes(kSizes.size());
  for (const auto& rule : rules) {
    for (const auto& a : rule.atoms()) {
      switch (a.field) {
        case Field::Color: colors[a.value] = true; break;
        case Field::Material: materials[a.value] = true; break;
        case Field::Shape: shapes[a.value] = true; break;
        case Field::Size: sizes[a.value] = true; break;
        case Field::Region:
          if (a.value == static_cast<std::uint8_t>(Region::Near)) {
            plan.split_depth = true;
          } else {
            plan.split_side = true;
          }
          break;
      }
    }
  }
  Rng rng(seed);
  plan.colors = candidate_values(kColors, colors, rng);
  plan.materials = candidate_values(kMaterials, materials, rng);
  plan.shapes = candidate_values(kShapes, shapes, rng);
  plan.sizes = candidate_values(kSizes, sizes, rng);
  plan.all_cells = false;
  for (int row = 0; row < scene.height(); ++row) {
    for (int col = 0; col < scene.width(); ++col) plan.cell_preference.push_back(Cell{col, row});
  }
  shuffle(rng, plan.cell_preference);
  return plan;
}

std::vector<Edit> enumerate_neighbors(const Scene& scene, const NeighborPlan& plan) {
  std::vector<Edit> out;
  const auto objects = scene.objects();
  for (const auto& o : objects) {
    for (Color c : plan.colors) {
      if (c != o.color) out.push_back(Edit::recolor(o, c));
    }
  }
  for (const auto& o : objects) {
    for (Material m : plan.materials) {
      if (m != o.material) out.push_back(Edit::rematerial(o, m));
    }
  }
  for (const auto& o : objects) {
    for (Size s : plan.sizes) {
      if (s != o.size) out.push_back(Edit::resize(o, s));
    }
  }
  for (const auto& o : objects) {
    for (Shape s : plan.shapes) {
      if (s != o.shape) out.push_back(Edit::reshape(o, s));
    }
  }
  const auto cells = destination_cells(scene, plan);
  for (const auto& o : objects) {
    const int own = cell_class(plan, o.cell, scene.width(), scene.height());
    for (Cell c : cells) {
      if (!plan.all_cells && cell_class(plan, c, scene.width(), scene.height()) == own) continue;
      out.push_back(Edit::move(o, c));
    }
  }
  for (Cell c : cells) {
    for (Shape shape : plan.shapes) {
      for (Color color : plan.colors) {
        for (Material material : plan.materials) {
          for (Size size : plan.sizes) {
            out.push_back(Edit::add(SceneObject{shape, color, material, size, c}));
          }
        }
      }
    }
  }
  for (const auto& o : objects) out.push_back(Edit::remove(o));
  return out;
}

CounterfactualPair find_counterfactual(const Scene& scene, const Model& model,
                                       const SearchOptions& options) {
  if (options.budget < 1) throw std::invalid_argument("counterfactual budget must be >= 1");
  const ClassLabel from = model.classify(scene);
  const NeighborPlan plan = NeighborPlan::make(scene, model, options.mode, options.seed);
  for (int depth = 1; depth <= options.budget; ++depth) {
    EditTrace trace;
    std::optional<Scene> found;
    if (dfs(scene, depth, model, from, plan, trace, found)) {
      return CounterfactualPair{scene, *found, std::move(trace), from, flip(from)};
    }
  }
  throw BudgetExhausted("no label flip within " + std::to_string(options.budget) +
                        " edits (model locally constant)");
}

std::vector<PairOutcome> build_pair_set(std::span<const Scene> scenes, const Model& model,
                                        const SearchOptions& options, unsigned threads) {
  std::vector<PairOutcome> outcomes(scenes.size());
  parallel_for(
      scenes.size(),
      [&](std::size_t i) {
        outcomes[i].index = i;
        SearchOptions local = options;
        local.seed = derive_seed(options.seed, scenes[i].id());
        try {
          outcomes[i].pair = find_counterfactual(scenes[i], model, local);
        } catch (const BudgetExhausted& e) {
          outcomes[i].failure = std::string("budget_exhausted: ") + e.what();
        }
      },
      threads);
  return outcomes;
}

}  // namespace gift
