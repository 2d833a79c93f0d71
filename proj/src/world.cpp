#include "gift/world.hpp"

#include "gift/rng.hpp"

namespace gift {

void WorldConfig::validate() const {
  if (min_objects < 3 || max_objects > 10 || min_objects > max_objects) {
    throw SceneError("object counts must satisfy 3 <= min <= max <= 10 (got " +
                     std::to_string(min_objects) + ".." + std::to_string(max_objects) + ")");
  }
  if (width <= 0 || height <= 0) throw SceneError("grid dimensions must be positive");
  if (width * height < max_objects + 3) {
    throw SceneError("grid needs at least 3 free cells beyond max_objects");
  }
}

json WorldConfig::to_json() const {
  return json{{"height", height},
              {"max_objects", max_objects},
              {"min_objects", min_objects},
              {"width", width}};
}

WorldConfig WorldConfig::from_json(const json& j) {
  WorldConfig w;
  w.width = j.value("width", w.width);
  w.height = j.value("height", w.height);
  w.min_objects = j.value("min_objects", w.min_objects);
  w.max_objects = j.value("max_objects", w.max_objects);
  return w;
}

Scene sample_scene(std::uint64_t seed, const WorldConfig& world) {
  world.validate();
  Rng rng(seed);
  const auto span = static_cast<std::size_t>(world.max_objects - world.min_objects + 1);
  const auto count = static_cast<std::size_t>(world.min_objects) + uniform_index(rng, span);

  // Partial Fisher-Yates over all cells.
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(world.width * world.height));
  for (int row = 0; row < world.height; ++row) {
    for (int col = 0; col < world.width; ++col) cells.push_back(Cell{col, row});
  }
  std::vector<SceneObject> objects;
  objects.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + uniform_index(rng, cells.size() - i);
    std::swap(cells[i], cells[j]);
    SceneObject obj;
    obj.cell = cells[i];
    obj.shape = kShapes[uniform_index(rng, kShapes.size())];
    obj.color = kColors[uniform_index(rng, kColors.size())];
    obj.material = kMaterials[uniform_index(rng, kMaterials.size())];
    obj.size = kSizes[uniform_index(rng, kSizes.size())];
    objects.push_back(obj);
  }
  return Scene(world.width, world.height, std::move(objects));
}

}  // namespace gift
