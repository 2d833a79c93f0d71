#include "gift/classifier.hpp"

#include <stdexcept>

namespace gift {

ClassLabel label_from_int(int v) {
  if (v == 0) return ClassLabel::Zero;
  if (v == 1) return ClassLabel::One;
  throw std::invalid_argument("class label must be 0 or 1, got " + std::to_string(v));
}

RuleClassifier::RuleClassifier(Concept base, std::optional<Concept> bias, ClassLabel presence_label)
    : base_(std::move(base)), bias_(std::move(bias)), presence_label_(presence_label) {
  if (base_.is_opaque() || (bias_ && bias_->is_opaque())) {
    throw ConceptError("rule classifiers need symbolic concepts");
  }
}

ClassLabel RuleClassifier::classify(const Scene& scene) const {
  const bool fires = eval_concept(scene, base_) || (bias_ && eval_concept(scene, *bias_));
  return fires ? presence_label_ : flip(presence_label_);
}

std::string RuleClassifier::describe() const {
  std::string s = "class " + std::to_string(to_int(presence_label_)) + " iff " + base_.describe();
  if (bias_) s += " or " + bias_->describe();
  return s;
}

std::vector<Concept> RuleClassifier::known_rules() const {
  std::vector<Concept> rules{base_};
  if (bias_) rules.push_back(*bias_);
  return rules;
}

RuleClassifier RuleClassifier::with_flipped_polarity() const {
  return RuleClassifier(base_, bias_, flip(presence_label_));
}

json RuleClassifier::to_json() const {
  return json{{"base", base_.canonical()},
              {"bias", bias_ ? json(bias_->canonical()) : json(nullptr)},
              {"presence_label", to_int(presence_label_)}};
}

RuleClassifier RuleClassifier::from_json(const json& j) {
  std::optional<Concept> bias;
  if (j.contains("bias") && !j.at("bias").is_null()) bias = parse_concept(j.at("bias").get<std::string>());
  return RuleClassifier(parse_concept(j.at("base").get<std::string>()), bias,
                        label_from_int(j.value("presence_label", 1)));
}

std::string ConstantClassifier::describe() const {
  return "constant class " + std::to_string(to_int(label_));
}

}  // namespace gift
