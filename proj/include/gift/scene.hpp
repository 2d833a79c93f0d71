// Symbolic scene world: attributed objects on an integer grid.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace gift {

using json = nlohmann::json;

enum class Shape : std::uint8_t { Cube, Sphere, Cylinder };
enum class Color : std::uint8_t { Gray, Red, Blue, Green, Brown, Purple, Cyan, Yellow };
enum class Material : std::uint8_t { Metal, Rubber };
enum class Size : std::uint8_t { Small, Large };

inline constexpr std::array<Shape, 3> kShapes{Shape::Cube, Shape::Sphere, Shape::Cylinder};
inline constexpr std::array<Color, 8> kColors{Color::Gray,   Color::Red,    Color::Blue, Color::Green,
                                              Color::Brown,  Color::Purple, Color::Cyan, Color::Yellow};
inline constexpr std::array<Material, 2> kMaterials{Material::Metal, Material::Rubber};
inline constexpr std::array<Size, 2> kSizes{Size::Small, Size::Large};

std::string_view to_string(Shape v);
std::string_view to_string(Color v);
std::string_view to_string(Material v);
std::string_view to_string(Size v);

std::optional<Shape> shape_from_string(std::string_view s);
std::optional<Color> color_from_string(std::string_view s);
std::optional<Material> material_from_string(std::string_view s);
std::optional<Size> size_from_string(std::string_view s);

// Grid position. Canonical order is row-major.
struct Cell {
  int col = 0;
  int row = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend std::strong_ordering operator<=>(const Cell& a, const Cell& b) {
    if (auto c = a.row <=> b.row; c != 0) return c;
    return a.col <=> b.col;
  }
};

struct SceneObject {
  Shape shape = Shape::Cube;
  Color color = Color::Gray;
  Material material = Material::Metal;
  Size size = Size::Small;
  Cell cell;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

json to_json(const SceneObject& obj);
SceneObject object_from_json(const json& j);

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Immutable value. Objects are kept sorted by cell, which is the canonical
// order used for hashing, serialization and edit tie-breaking.
class Scene {
 public:
  Scene(int width, int height, std::vector<SceneObject> objects);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const SceneObject> objects() const { return objects_; }
  std::size_t size() const { return objects_.size(); }
  bool empty() const { return objects_.empty(); }

  const SceneObject* at(Cell cell) const;
  bool in_bounds(Cell cell) const;
  std::vector<Cell> free_cells() const;

  // Stable content hash (16 hex digits) of the canonical serialization.
  std::string id() const;

  json to_json() const;  // includes "id"
  std::string canonical_json() const;
  static Scene from_json(const json& j);

  friend bool operator==(const Scene& a, const Scene& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.objects_ == b.objects_;
  }

 private:
  json body_json() const;

  int width_;
  int height_;
  std::vector<SceneObject> objects_;
};

}  // namespace gift
