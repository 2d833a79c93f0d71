// Target models: the decision function under audit.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gift/concept.hpp"
#include "gift/scene.hpp"

namespace gift {

enum class ClassLabel : std::uint8_t { Zero = 0, One = 1 };

constexpr int to_int(ClassLabel y) { return static_cast<int>(y); }
constexpr ClassLabel flip(ClassLabel y) { return y == ClassLabel::One ? ClassLabel::Zero : ClassLabel::One; }
ClassLabel label_from_int(int v);

class Model {
 public:
  virtual ~Model() = default;
  virtual ClassLabel classify(const Scene& scene) const = 0;
  virtual std::string describe() const = 0;
  // Concepts the decision depends on, when known. Empty for black-box models.
  virtual std::vector<Concept> known_rules() const { return {}; }
};

inline ClassLabel classify(const Model& model, const Scene& scene) { return model.classify(scene); }

// M(x) = 1 iff base holds, or the bias rule holds; inverted when presence of
// the rule maps to class 0.
class RuleClassifier final : public Model {
 public:
  RuleClassifier(Concept base, std::optional<Concept> bias = std::nullopt,
                 ClassLabel presence_label = ClassLabel::One);

  ClassLabel classify(const Scene& scene) const override;
  std::string describe() const override;
  std::vector<Concept> known_rules() const override;

  const Concept& base() const { return base_; }
  const std::optional<Concept>& bias() const { return bias_; }
  ClassLabel presence_label() const { return presence_label_; }
  RuleClassifier with_flipped_polarity() const;

  json to_json() const;
  static RuleClassifier from_json(const json& j);

 private:
  Concept base_;
  std::optional<Concept> bias_;
  ClassLabel presence_label_;
};

class ConstantClassifier final : public Model {
 public:
  explicit ConstantClassifier(ClassLabel label) : label_(label) {}
  ClassLabel classify(const Scene&) const override { return label_; }
  std::string describe() const override;

 private:
  ClassLabel label_;
};

}  // namespace gift
