#pragma once

#include <string>

#include "gift/scene.hpp"

namespace gift {

// Deterministic SVG: a grid plus one `class="glyph"` element per object.
// Shape picks the element (rect / circle / rounded rect), size its extent,
// color its fill, and material its stroke (solid for metal, dashed for rubber).
std::string render_svg(const Scene& scene, int cell_px = 48);

}  // namespace gift
