// Stage 1: minimal-edit counterfactual search.
//
// Iterative deepening over primitive edits. Within a depth, sequences are
// visited in lexicographic order of (edit kind, object index, new value), so
// the first flipping sequence found is both minimal and tie-broken.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gift/classifier.hpp"
#include "gift/editor.hpp"

namespace gift {

struct CounterfactualPair {
  Scene source;
  Scene target;
  EditTrace trace;
  ClassLabel from_label = ClassLabel::Zero;
  ClassLabel to_label = ClassLabel::One;

  json to_json() const;
  static CounterfactualPair from_json(const json& j);
};

enum class NeighborMode : std::uint8_t {
  // Attribute values and cells restricted to one representative per
  // equivalence class of the model's known rules. Falls back to Exhaustive
  // for black-box models.
  Vocabulary,
  Exhaustive,
};

struct SearchOptions {
  int budget = 3;
  std::uint64_t seed = 0;
  NeighborMode mode = NeighborMode::Vocabulary;
};

class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Candidate values for one search. Built once per search so representative
// choices stay fixed while the tree is explored.
struct NeighborPlan {
  std::vector<Color> colors;
  std::vector<Material> materials;
  std::vector<Shape> shapes;
  std::vector<Size> sizes;
  bool all_cells = true;
  bool split_side = false;
  bool split_depth = false;
  std::vector<Cell> cell_preference;  // seeded permutation of the grid

  static NeighborPlan make(const Scene& scene, const Model& model, NeighborMode mode,
                           std::uint64_t seed);
};

std::vector<Edit> enumerate_neighbors(const Scene& scene, const NeighborPlan& plan);

// Throws BudgetExhausted when no trace of length <= budget flips the label.
CounterfactualPair find_counterfactual(const Scene& scene, const Model& model,
                                       const SearchOptions& options);

struct PairOutcome {
  std::size_t index = 0;
  std::optional<CounterfactualPair> pair;
  std::string failure;
};

// One outcome per input scene, in input order. The per-scene seed is derived
// from the options seed and the scene id.
std::vector<PairOutcome> build_pair_set(std::span<const Scene> scenes, const Model& model,
                                        const SearchOptions& options, unsigned threads = 0);

}  // namespace gift
