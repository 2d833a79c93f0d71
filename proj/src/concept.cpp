#include "gift/concept.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace gift {
namespace {

constexpr std::array<std::string_view, 5> kFieldNames{"color", "material", "shape", "size", "region"};
constexpr std::array<std::string_view, 3> kRegionNames{"left", "right", "near"};

std::string value_name(const Atom& a) {
  switch (a.field) {
    case Field::Color: return std::string(to_string(static_cast<Color>(a.value)));
    case Field::Material: return std::string(to_string(static_cast<Material>(a.value)));
    case Field::Shape: return std::string(to_string(static_cast<Shape>(a.value)));
    case Field::Size: return std::string(to_string(static_cast<Size>(a.value)));
    case Field::Region: return std::string(to_string(static_cast<Region>(a.value)));
  }
  return {};
}

std::optional<Atom> atom_from_pair(std::string_view field, std::string_view value) {
  if (field == "color") {
    if (auto v = color_from_string(value)) return Atom::color(*v);
  } else if (field == "material") {
    if (auto v = material_from_string(value)) return Atom::material(*v);
  } else if (field == "shape") {
    if (auto v = shape_from_string(value)) return Atom::shape(*v);
  } else if (field == "size") {
    if (auto v = size_from_string(value)) return Atom::size(*v);
  } else if (field == "region") {
    for (std::size_t i = 0; i < kRegionNames.size(); ++i) {
      if (kRegionNames[i] == value) return Atom::region(static_cast<Region>(i));
    }
  }
  return std::nullopt;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// Controlled vocabulary. A token maps to an atom, to filler, or is unknown.
const std::unordered_map<std::string_view, Atom>& vocabulary() {
  static const std::unordered_map<std::string_view, Atom> vocab = [] {
    std::unordered_map<std::string_view, Atom> v;
    for (Color c : kColors) v.emplace(to_string(c), Atom::color(c));
    v.emplace("grey", Atom::color(Color::Gray));
    v.emplace("metal", Atom::material(Material::Metal));
    v.emplace("metallic", Atom::material(Material::Metal));
    v.emplace("shiny", Atom::material(Material::Metal));
    v.emplace("rubber", Atom::material(Material::Rubber));
    v.emplace("matte", Atom::material(Material::Rubber));
    for (auto [word, shape] : {std::pair{"cube", Shape::Cube}, {"cubes", Shape::Cube},
                               {"block", Shape::Cube}, {"blocks", Shape::Cube},
                               {"sphere", Shape::Sphere}, {"spheres", Shape::Sphere},
                               {"ball", Shape::Sphere}, {"balls", Shape::Sphere},
                               {"cylinder", Shape::Cylinder}, {"cylinders", Shape::Cylinder}}) {
      v.emplace(word, Atom::shape(shape));
    }
    for (auto [word, size] : {std::pair{"small", Size::Small}, {"tiny", Size::Small},
                              {"little", Size::Small}, {"large", Size::Large},
                              {"big", Size::Large}}) {
      v.emplace(word, Atom::size(size));
    }
    v.emplace("left", Atom::region(Region::Left));
    v.emplace("leftmost", Atom::region(Region::Left));
    v.emplace("right", Atom::region(Region::Right));
    v.emplace("rightmost", Atom::region(Region::Right));
    v.emplace("near", Atom::region(Region::Near));
    v.emplace("front", Atom::region(Region::Near));
    v.emplace("foreground", Atom::region(Region::Near));
    return v;
  }();
  return vocab;
}

const std::unordered_set<std::string_view>& fillers() {
  static const std::unordered_set<std::string_view> words{
      "a",        "an",      "the",    "object", "objects", "thing",  "things",   "item",
      "items",    "vehicle", "vehicles", "car",  "cars",    "in",     "on",       "at",
      "of",       "presence", "present", "with", "containing", "contains", "there",
      "is",       "are",     "any",    "some",   "region",  "lane",   "side",     "half",
      "area",     "part",    "colored", "coloured", "made", "one",    "least"};
  return words;
}

std::optional<Concept> parse_canonical_form(std::string_view text) {
  std::vector<Atom> atoms;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t amp = text.find('&', start);
    std::string_view part = text.substr(start, amp == std::string_view::npos ? amp : amp - start);
    std::size_t eq = part.find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    auto atom = atom_from_pair(part.substr(0, eq), part.substr(eq + 1));
    if (!atom) return std::nullopt;
    atoms.push_back(*atom);
    if (amp == std::string_view::npos) break;
    start = amp + 1;
  }
  try {
    return Concept::conjunction(std::move(atoms));
  } catch (const ConceptError&) {
    return std::nullopt;
  }
}

}  // namespace

std::string_view to_string(Field f) { return kFieldNames[static_cast<std::size_t>(f)]; }
std::string_view to_string(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }

std::string Atom::canonical() const {
  return std::string(to_string(field)) + "=" + value_name(*this);
}

bool in_region(Region r, Cell cell, int width, int height) {
  switch (r) {
    case Region::Left: return cell.col < width / 2;
    case Region::Right: return cell.col >= width / 2;
    case Region::Near: return cell.row >= height / 2;
  }
  return false;
}

bool contradicts(const Atom& a, const Atom& b) {
  if (a.field != b.field || a.value == b.value) return false;
  if (a.field != Field::Region) return true;
  auto left_right = [](const Atom& x, const Atom& y) {
    return x.value == static_cast<std::uint8_t>(Region::Left) &&
           y.value == static_cast<std::uint8_t>(Region::Right);
  };
  return left_right(a, b) || left_right(b, a);
}

Concept Concept::conjunction(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  if (atoms.empty()) throw ConceptError("concept needs at least one conjunct");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    for (std::size_t j = i + 1; j < atoms.size(); ++j) {
      if (contradicts(atoms[i], atoms[j])) {
        throw ConceptError("contradictory conjuncts: " + atoms[i].canonical() + " and " +
                           atoms[j].canonical());
      }
    }
  }
  if (atoms.size() > kMaxConjuncts) {
    throw ConceptError("at most " + std::to_string(kMaxConjuncts) + " conjuncts allowed, got " +
                       std::to_string(atoms.size()));
  }
  Concept c;
  c.atoms_ = std::move(atoms);
  return c;
}

Concept Concept::opaque(std::string text) {
  Concept c;
  c.opaque_ = true;
  c.text_ = normalize_text(text);
  return c;
}

std::string Concept::canonical() const {
  if (opaque_) return "text:" + text_;
  std::string out;
  for (const auto& a : atoms_) {
    if (!out.empty()) out.push_back('&');
    out += a.canonical();
  }
  return out;
}

std::string Concept::describe() const {
  if (opaque_) return text_;
  std::string words;
  auto append = [&words](std::string_view w) {
    if (!words.empty()) words.push_back(' ');
    words += w;
  };
  auto find = [this](Field f) -> const Atom* {
    for (const auto& a : atoms_) {
      if (a.field == f) return &a;
    }
    return nullptr;
  };
  if (auto a = find(Field::Size)) append(value_name(*a));
  if (auto a = find(Field::Color)) append(value_name(*a));
  if (auto a = find(Field::Material)) append(value_name(*a));
  if (auto a = find(Field::Shape)) {
    append(value_name(*a));
  } else {
    append("object");
  }
  std::string regions;
  for (const auto& a : atoms_) {
    if (a.field != Field::Region) continue;
    // "near" reads before "left"/"right"; atoms are sorted left, right, near.
    regions = a.value == static_cast<std::uint8_t>(Region::Near)
                  ? value_name(a) + (regions.empty() ? "" : " " + regions)
                  : (regions.empty() ? value_name(a) : regions + " " + value_name(a));
  }
  if (!regions.empty()) append("in the " + regions + " region");
  return words;
}

bool Concept::matches(const SceneObject& obj, int width, int height) const {
  if (opaque_) throw ConceptError("opaque concept cannot be evaluated symbolically");
  for (const auto& a : atoms_) {
    bool ok = false;
    switch (a.field) {
      case Field::Color: ok = static_cast<std::uint8_t>(obj.color) == a.value; break;
      case Field::Material: ok = static_cast<std::uint8_t>(obj.material) == a.value; break;
      case Field::Shape: ok = static_cast<std::uint8_t>(obj.shape) == a.value; break;
      case Field::Size: ok = static_cast<std::uint8_t>(obj.size) == a.value; break;
      case Field::Region: ok = in_region(static_cast<Region>(a.value), obj.cell, width, height); break;
    }
    if (!ok) return false;
  }
  return true;
}

bool Concept::implied_by(const Concept& other) const {
  if (opaque_ || other.opaque_) return false;
  return std::includes(other.atoms_.begin(), other.atoms_.end(), atoms_.begin(), atoms_.end());
}

Concept parse_concept(std::string_view text) {
  const std::string norm = normalize_text(text);
  if (norm.find('=') != std::string::npos && norm.find(' ') == std::string::npos) {
    if (auto c = parse_canonical_form(norm)) return *c;
    return Concept::opaque(std::string(text));
  }
  if (norm.rfind("text:", 0) == 0) return Concept::opaque(norm.substr(5));

  std::string cleaned;
  for (char ch : norm) {
    cleaned.push_back(std::isalnum(static_cast<unsigned char>(ch)) ? ch : ' ');
  }
  std::vector<Atom> atoms;
  const auto& vocab = vocabulary();
  const auto& filler = fillers();
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j > i) {
      std::string_view token(cleaned.data() + i, j - i);
      if (auto it = vocab.find(token); it != vocab.end()) {
        atoms.push_back(it->second);
      } else if (!filler.contains(token)) {
        return Concept::opaque(std::string(text));
      }
    }
    i = j;
  }
  try {
    return Concept::conjunction(std::move(atoms));
  } catch (const ConceptError&) {
    return Concept::opaque(std::string(text));
  }
}

Concept combine(std::span<const Concept> concepts) {
  std::vector<Atom> atoms;
  for (const auto& c : concepts) {
    if (c.is_opaque()) throw ConceptError("cannot combine opaque concept '" + c.text() + "'");
    atoms.insert(atoms.end(), c.atoms().begin(), c.atoms().end());
  }
  return Concept::conjunction(std::move(atoms));
}

bool eval_concept(const Scene& scene, const Concept& cpt) {
  if (cpt.is_opaque()) {
    throw ConceptError("opaque concept '" + cpt.text() + "' needs an external VQA model");
  }
  for (const auto& obj : scene.objects()) {
    if (cpt.matches(obj, scene.width(), scene.height())) return true;
  }
  return false;
}

}  // namespace gift
