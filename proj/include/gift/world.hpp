// Seeded scene sampling.
#pragma once

#include <cstdint>

#include "gift/scene.hpp"

namespace gift {

struct WorldConfig {
  int width = 8;
  int height = 6;
  int min_objects = 3;
  int max_objects = 10;

  // Throws SceneError on counts outside [3, 10] or a grid without room.
  void validate() const;

  json to_json() const;
  static WorldConfig from_json(const json& j);
};

// Object count, cells and attributes are all drawn uniformly.
Scene sample_scene(std::uint64_t seed, const WorldConfig& world);

}  // namespace gift
