// Primitive scene edits, edit traces, and the concept-level intervention
// editor (add / remove a concept).
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "gift/concept.hpp"
#include "gift/scene.hpp"

namespace gift {

// Declaration order is the tie-break order used by the counterfactual search.
enum class EditKind : std::uint8_t { Recolor, Rematerial, Resize, Reshape, Move, Add, Remove };

std::string_view to_string(EditKind k);
std::optional<EditKind> edit_kind_from_string(std::string_view s);

// An edit carries full before/after object descriptors; `before` is empty for
// Add and `after` is empty for Remove.
struct Edit {
  EditKind kind = EditKind::Recolor;
  std::optional<SceneObject> before;
  std::optional<SceneObject> after;

  static Edit recolor(const SceneObject& obj, Color c);
  static Edit rematerial(const SceneObject& obj, Material m);
  static Edit resize(const SceneObject& obj, Size s);
  static Edit reshape(const SceneObject& obj, Shape s);
  static Edit move(const SceneObject& obj, Cell to);
  static Edit add(const SceneObject& obj);
  static Edit remove(const SceneObject& obj);

  friend bool operator==(const Edit&, const Edit&) = default;
};

using EditTrace = std::vector<Edit>;

json to_json(const Edit& e);
Edit edit_from_json(const json& j);
json to_json(const EditTrace& trace);
EditTrace trace_from_json(const json& j);

class EditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws EditError when the edit does not apply (missing or mismatched source
// object, occupied destination, out of bounds).
Scene apply_edit(const Scene& scene, const Edit& edit);
Scene apply_trace(const Scene& scene, const EditTrace& trace);

// Adds one object satisfying `concept` on a uniformly drawn free cell that
// satisfies the concept's region conjuncts. Unconstrained attributes are drawn
// uniformly. Throws EditError when no admissible cell is free.
Edit plan_add(const Scene& scene, const Concept& cpt, std::uint64_t seed);
Scene edit_add(const Scene& scene, const Concept& cpt, std::uint64_t seed);

// Removes every object satisfying `concept`.
Scene edit_remove(const Scene& scene, const Concept& cpt);

}  // namespace gift
