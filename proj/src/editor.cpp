#include "gift/editor.hpp"

#include <algorithm>
#include <array>

#include "gift/rng.hpp"

namespace gift {
namespace {

constexpr std::array<std::string_view, 7> kEditNames{"recolor", "rematerial", "resize", "reshape",
                                                     "move",    "add",        "remove"};

std::vector<SceneObject> copy_objects(const Scene& s) {
  return {s.objects().begin(), s.objects().end()};
}

std::string describe_cell(Cell c) {
  return "(" + std::to_string(c.col) + ", " + std::to_string(c.row) + ")";
}

template <typename E, std::size_t N>
E draw_or_fixed(Rng& rng, const std::array<E, N>& all, std::optional<std::uint8_t> fixed) {
  // The draw happens even when the value is fixed so the stream layout does
  // not depend on which fields the concept constrains.
  E drawn = all[uniform_index(rng, N)];
  return fixed ? static_cast<E>(*fixed) : drawn;
}

}  // namespace

std::string_view to_string(EditKind k) { return kEditNames[static_cast<std::size_t>(k)]; }

std::optional<EditKind> edit_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kEditNames.size(); ++i) {
    if (kEditNames[i] == s) return static_cast<EditKind>(i);
  }
  return std::nullopt;
}

Edit Edit::recolor(const SceneObject& obj, Color c) {
  SceneObject after = obj;
  after.color = c;
  return {EditKind::Recolor, obj, after};
}
Edit Edit::rematerial(const SceneObject& obj, Material m) {
  SceneObject after = obj;
  after.material = m;
  return {EditKind::Rematerial, obj, after};
}
Edit Edit::resize(const SceneObject& obj, Size s) {
  SceneObject after = obj;
  after.size = s;
  return {EditKind::Resize, obj, after};
}
Edit Edit::reshape(const SceneObject& obj, Shape s) {
  SceneObject after = obj;
  after.shape = s;
  return {EditKind::Reshape, obj, after};
}
Edit Edit::move(const SceneObject& obj, Cell to) {
  SceneObject after = obj;
  after.cell = to;
  return {EditKind::Move, obj, after};
}
Edit Edit::add(const SceneObject& obj) { return {EditKind::Add, std::nullopt, obj}; }
Edit Edit::remove(const SceneObject& obj) { return {EditKind::Remove, obj, std::nullopt}; }

json to_json(const Edit& e) {
  return json{{"after", e.after ? to_json(*e.after) : json(nullptr)},
              {"before", e.before ? to_json(*e.before) : json(nullptr)},
              {"kind", to_string(e.kind)}};
}

Edit edit_from_json(const json& j) {
  Edit e;
  auto kind = edit_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw EditError("unknown edit kind: " + j.at("kind").dump());
  e.kind = *kind;
  if (!j.at("before").is_null()) e.before = object_from_json(j.at("before"));
  if (!j.at("after").is_null()) e.after = object_from_json(j.at("after"));
  return e;
}

json to_json(const EditTrace& trace) {
  json arr = json::array();
  for (const auto& e : trace) arr.push_back(to_json(e));
  return arr;
}

EditTrace trace_from_json(const json& j) {
  EditTrace trace;
  for (const auto& e : j) trace.push_back(edit_from_json(e));
  return trace;
}

Scene apply_edit(const Scene& scene, const Edit& edit) {
  const bool needs_before = edit.kind != EditKind::Add;
  const bool needs_after = edit.kind != EditKind::Remove;
  if (needs_before != edit.before.has_value() || needs_after != edit.after.has_value()) {
    throw EditError(std::string("malformed ") + std::string(to_string(edit.kind)) + " edit");
  }
  auto objects = copy_objects(scene);
  if (edit.before) {
    auto it = std::find_if(objects.begin(), objects.end(),
                           [&](const SceneObject& o) { return o.cell == edit.before->cell; });
    if (it == objects.end() || !(*it == *edit.before)) {
      throw EditError("edit source object not found at " + describe_cell(edit.before->cell));
    }
    objects.erase(it);
  }
  if (edit.after) {
    if (!scene.in_bounds(edit.after->cell)) {
      throw EditError("edit target outside grid at " + describe_cell(edit.after->cell));
    }
    for (const auto& o : objects) {
      if (o.cell == edit.after->cell) {
        throw EditError("edit target cell occupied at " + describe_cell(o.cell));
      }
    }
    objects.push_back(*edit.after);
  }
  return Scene(scene.width(), scene.height(), std::move(objects));
}

Scene apply_trace(const Scene& scene, const EditTrace& trace) {
  Scene current = scene;
  for (const auto& e : trace) current = apply_edit(current, e);
  return current;
}

Edit plan_add(const Scene& scene, const Concept& cpt, std::uint64_t seed) {
  if (cpt.is_opaque()) {
    throw EditError("opaque concept '" + cpt.text() + "' needs an external editor");
  }
  std::vector<Cell> admissible;
  for (Cell c : scene.free_cells()) {
    bool ok = true;
    for (const auto& a : cpt.atoms()) {
      if (a.field == Field::Region &&
          !in_region(static_cast<Region>(a.value), c, scene.width(), scene.height())) {
        ok = false;
      }
    }
    if (ok) admissible.push_back(c);
  }
  if (admissible.empty()) {
    throw EditError("no free cell admits concept '" + cpt.describe() + "'");
  }
  auto fixed = [&](Field f) -> std::optional<std::uint8_t> {
    for (const auto& a : cpt.atoms()) {
      if (a.field == f) return a.value;
    }
    return std::nullopt;
  };
  Rng rng(seed);
  SceneObject obj;
  obj.cell = admissible[uniform_index(rng, admissible.size())];
  obj.shape = draw_or_fixed(rng, kShapes, fixed(Field::Shape));
  obj.color = draw_or_fixed(rng, kColors, fixed(Field::Color));
  obj.material = draw_or_fixed(rng, kMaterials, fixed(Field::Material));
  obj.size = draw_or_fixed(rng, kSizes, fixed(Field::Size));
  return Edit::add(obj);
}

Scene edit_add(const Scene& scene, const Concept& cpt, std::uint64_t seed) {
  return apply_edit(scene, plan_add(scene, cpt, seed));
}

Scene edit_remove(const Scene& scene, const Concept& cpt) {
  if (cpt.is_opaque()) {
    throw EditError("opaque concept '" + cpt.text() + "' needs an external editor");
  }
  std::vector<SceneObject> kept;
  for (const auto& o : scene.objects()) {
    if (!cpt.matches(o, scene.width(), scene.height())) kept.push_back(o);
  }
  return Scene(scene.width(), scene.height(), std::move(kept));
}

}  // namespace gift
