#include "gift/render.hpp"

#include <sstream>

namespace gift {
namespace {

std::string_view fill_for(Color c) {
  switch (c) {
    case Color::Gray: return "#8a8a8a";
    case Color::Red: return "#ad2323";
    case Color::Blue: return "#2a4bd7";
    case Color::Green: return "#1d6914";
    case Color::Brown: return "#814a19";
    case Color::Purple: return "#8126c0";
    case Color::Cyan: return "#29d0d0";
    case Color::Yellow: return "#ffee33";
  }
  return "#000000";
}

}  // namespace

std::string render_svg(const Scene& scene, int cell_px) {
  const int w = scene.width() * cell_px;
  const int h = scene.height() * cell_px;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"#f4f4f0\"/>\n";
  out << "<g class=\"grid\" stroke=\"#d0d0c8\" stroke-width=\"1\">\n";
  for (int col = 1; col < scene.width(); ++col) {
    out << "<line x1=\"" << col * cell_px << "\" y1=\"0\" x2=\"" << col * cell_px << "\" y2=\""
        << h << "\"/>\n";
  }
  for (int row = 1; row < scene.height(); ++row) {
    out << "<line x1=\"0\" y1=\"" << row * cell_px << "\" x2=\"" << w << "\" y2=\""
        << row * cell_px << "\"/>\n";
  }
  out << "</g>\n<g class=\"objects\">\n";
  for (const auto& o : scene.objects()) {
    const int cx = o.cell.col * cell_px + cell_px / 2;
    const int cy = o.cell.row * cell_px + cell_px / 2;
    const int half = o.size == Size::Large ? cell_px * 2 / 5 : cell_px / 4;
    std::ostringstream style;
    style << "fill=\"" << fill_for(o.color) << "\" stroke=\"#222222\" stroke-width=\"2\"";
    if (o.material == Material::Rubber) style << " stroke-dasharray=\"4 3\"";
    const std::string meta = std::string(" data-shape=\"") + std::string(to_string(o.shape)) +
                             "\" data-color=\"" + std::string(to_string(o.color)) +
                             "\" data-material=\"" + std::string(to_string(o.material)) +
                             "\" data-size=\"" + std::string(to_string(o.size)) + "\" ";
    switch (o.shape) {
      case Shape::Cube:
        out << "<rect class=\"glyph\"" << meta << "x=\"" << cx - half << "\" y=\"" << cy - half
            << "\" width=\"" << 2 * half << "\" height=\"" << 2 * half << "\" " << style.str()
            << "/>\n";
        break;
      case Shape::Sphere:
        out << "<circle class=\"glyph\"" << meta << "cx=\"" << cx << "\" cy=\"" << cy << "\" r=\""
            << half << "\" " << style.str() << "/>\n";
        break;
      case Shape::Cylinder:
        out << "<rect class=\"glyph\"" << meta << "x=\"" << cx - half * 3 / 4 << "\" y=\""
            << cy - half << "\" width=\"" << half * 3 / 2 << "\" height=\"" << 2 * half
            << "\" rx=\"" << half * 3 / 4 << "\" ry=\"" << half / 3 << "\" " << style.str()
            << "/>\n";
        break;
    }
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace gift
