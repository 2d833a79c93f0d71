// Concept grammar: conjunctions of attribute/region predicates over a single
// object, plus an opaque free-text variant for phrases outside the vocabulary.
#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gift/scene.hpp"

namespace gift {

enum class Field : std::uint8_t { Color, Material, Shape, Size, Region };
enum class Region : std::uint8_t { Left, Right, Near };

inline constexpr std::size_t kMaxConjuncts = 3;

std::string_view to_string(Field f);
std::string_view to_string(Region r);

struct Atom {
  Field field = Field::Color;
  std::uint8_t value = 0;

  static Atom color(Color c) { return {Field::Color, static_cast<std::uint8_t>(c)}; }
  static Atom material(Material m) { return {Field::Material, static_cast<std::uint8_t>(m)}; }
  static Atom shape(Shape s) { return {Field::Shape, static_cast<std::uint8_t>(s)}; }
  static Atom size(Size s) { return {Field::Size, static_cast<std::uint8_t>(s)}; }
  static Atom region(Region r) { return {Field::Region, static_cast<std::uint8_t>(r)}; }

  // "color=red"
  std::string canonical() const;

  friend auto operator<=>(const Atom&, const Atom&) = default;
};

// Region predicates on a W x H grid: left is col < W/2, right is col >= W/2,
// near is row >= H/2 (the half closest to the viewer).
bool in_region(Region r, Cell cell, int width, int height);

class ConceptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Concept {
 public:
  // Validates 1..3 atoms without contradictions and canonicalizes the order.
  static Concept conjunction(std::vector<Atom> atoms);
  static Concept opaque(std::string text);

  bool is_opaque() const { return opaque_; }
  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t arity() const { return atoms_.size(); }
  const std::string& text() const { return text_; }

  // Serialized form: "color=red&material=metal", or "text:<phrase>" for opaque.
  std::string canonical() const;
  // English phrase accepted by parse_concept, e.g. "red metal object".
  std::string describe() const;

  bool matches(const SceneObject& obj, int width, int height) const;
  // True when every conjunct of this concept is also a conjunct of other.
  bool implied_by(const Concept& other) const;

  friend bool operator==(const Concept& a, const Concept& b) {
    return a.opaque_ == b.opaque_ && a.atoms_ == b.atoms_ && a.text_ == b.text_;
  }
  friend bool operator<(const Concept& a, const Concept& b) {
    return a.canonical() < b.canonical();
  }

 private:
  Concept() = default;

  bool opaque_ = false;
  std::vector<Atom> atoms_;
  std::string text_;
};

bool contradicts(const Atom& a, const Atom& b);

// Total: phrases outside the controlled vocabulary become opaque concepts.
Concept parse_concept(std::string_view text);

// Canonical conjunction of all inputs. Throws ConceptError on opaque inputs,
// contradictions or more than three distinct conjuncts.
Concept combine(std::span<const Concept> concepts);

// Exact VQA oracle: some object satisfies every conjunct.
bool eval_concept(const Scene& scene, const Concept& cpt);

}  // namespace gift
