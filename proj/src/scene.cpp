#include "gift/scene.hpp"

#include <algorithm>

#include "gift/rng.hpp"

namespace gift {
namespace {

constexpr std::array<std::string_view, 3> kShapeNames{"cube", "sphere", "cylinder"};
constexpr std::array<std::string_view, 8> kColorNames{"gray",   "red",    "blue", "green",
                                                      "brown",  "purple", "cyan", "yellow"};
constexpr std::array<std::string_view, 2> kMaterialNames{"metal", "rubber"};
constexpr std::array<std::string_view, 2> kSizeNames{"small", "large"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

template <typename E>
E require(std::optional<E> v, std::string_view what, const json& j) {
  if (!v) throw SceneError(std::string("unknown ") + std::string(what) + ": " + j.dump());
  return *v;
}

}  // namespace

std::string_view to_string(Shape v) { return kShapeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Color v) { return kColorNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Material v) { return kMaterialNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Size v) { return kSizeNames[static_cast<std::size_t>(v)]; }

std::optional<Shape> shape_from_string(std::string_view s) { return lookup<Shape>(kShapeNames, s); }
std::optional<Color> color_from_string(std::string_view s) { return lookup<Color>(kColorNames, s); }
std::optional<Material> material_from_string(std::string_view s) {
  return lookup<Material>(kMaterialNames, s);
}
std::optional<Size> size_from_string(std::string_view s) { return lookup<Size>(kSizeNames, s); }

json to_json(const SceneObject& obj) {
  return json{{"cell", json::array({obj.cell.col, obj.cell.row})},
              {"color", to_string(obj.color)},
              {"material", to_string(obj.material)},
              {"shape", to_string(obj.shape)},
              {"size", to_string(obj.size)}};
}

SceneObject object_from_json(const json& j) {
  SceneObject obj;
  obj.shape = require(shape_from_string(j.at("shape").get<std::string>()), "shape", j);
  obj.color = require(color_from_string(j.at("color").get<std::string>()), "color", j);
  obj.material = require(material_from_string(j.at("material").get<std::string>()), "material", j);
  obj.size = require(size_from_string(j.at("size").get<std::string>()), "size", j);
  const auto& cell = j.at("cell");
  if (!cell.is_array() || cell.size() != 2) throw SceneError("cell must be [col, row]");
  obj.cell = Cell{cell[0].get<int>(), cell[1].get<int>()};
  return obj;
}

Scene::Scene(int width, int height, std::vector<SceneObject> objects)
    : width_(width), height_(height), objects_(std::move(objects)) {
  if (width_ <= 0 || height_ <= 0) throw SceneError("grid dimensions must be positive");
  std::sort(objects_.begin(), objects_.end(),
            [](const SceneObject& a, const SceneObject& b) { return a.cell < b.cell; });
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!in_bounds(objects_[i].cell)) {
      throw SceneError("object outside grid at (" + std::to_string(objects_[i].cell.col) + ", " +
                       std::to_string(objects_[i].cell.row) + ")");
    }
    if (i > 0 && objects_[i - 1].cell == objects_[i].cell) {
      throw SceneError("two objects share cell (" + std::to_string(objects_[i].cell.col) + ", " +
                       std::to_string(objects_[i].cell.row) + ")");
    }
  }
}

const SceneObject* Scene::at(Cell cell) const {
  auto it = std::lower_bound(objects_.begin(), objects_.end(), cell,
                             [](const SceneObject& o, const Cell& c) { return o.cell < c; });
  if (it != objects_.end() && it->cell == cell) return &*it;
  return nullptr;
}

bool Scene::in_bounds(Cell cell) const {
  return cell.col >= 0 && cell.col < width_ && cell.row >= 0 && cell.row < height_;
}

std::vector<Cell> Scene::free_cells() const {
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(width_ * height_) - objects_.size());
  auto it = objects_.begin();
  for (int row = 0; row < height_; ++row) {
    for (int col = 0; col < width_; ++col) {
      Cell c{col, row};
      if (it != objects_.end() && it->cell == c) {
        ++it;
        continue;
      }
      cells.push_back(c);
    }
  }
  return cells;
}

json Scene::body_json() const {
  json objs = json::array();
  for (const auto& o : objects_) objs.push_back(gift::to_json(o));
  return json{{"height", height_}, {"objects", std::move(objs)}, {"width", width_}};
}

std::string Scene::canonical_json() const { return body_json().dump(); }

std::string Scene::id() const { return hex64(fnv1a64(canonical_json())); }

json Scene::to_json() const {
  json j = body_json();
  j["id"] = hex64(fnv1a64(j.dump()));
  return j;
}

Scene Scene::from_json(const json& j) {
  std::vector<SceneObject> objs;
  for (const auto& o : j.at("objects")) objs.push_back(object_from_json(o));
  Scene s(j.at("width").get<int>(), j.at("height").get<int>(), std::move(objs));
  if (j.contains("id") && j.at("id").get<std::string>() != s.id()) {
    throw SceneError("scene id does not match content");
  }
  return s;
}

}  // namespace gift
