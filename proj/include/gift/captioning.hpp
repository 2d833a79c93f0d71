// Stage 2: change captions between a scene and its counterfactual.
//
// Objects are described at caption granularity: the four attributes plus a
// coarse placement (left/right half, near/far half). Moves that stay inside
// the same placement are not visible in captions.
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gift/classifier.hpp"
#include "gift/concept.hpp"
#include "gift/scene.hpp"

namespace gift {

enum class Side : std::uint8_t { Left, Right };
enum class Depth : std::uint8_t { Far, Near };

struct Placement {
  Side side = Side::Left;
  Depth depth = Depth::Far;
  friend auto operator<=>(const Placement&, const Placement&) = default;
};

struct ObjectDescriptor {
  Shape shape = Shape::Cube;
  Color color = Color::Gray;
  Material material = Material::Metal;
  Size size = Size::Small;
  std::optional<Placement> placement;

  friend auto operator<=>(const ObjectDescriptor&, const ObjectDescriptor&) = default;
  friend bool operator==(const ObjectDescriptor&, const ObjectDescriptor&) = default;
};

ObjectDescriptor describe_object(const SceneObject& obj, int width, int height);
// Region atoms the descriptor satisfies (left/right from side, near from depth).
std::vector<Atom> descriptor_atoms(const ObjectDescriptor& d);
// "large red metal cube at the near left"
std::string phrase(const ObjectDescriptor& d);

enum class EventKind : std::uint8_t { Appeared, Disappeared, AttributeChanged, Moved };

struct ChangeEvent {
  EventKind kind = EventKind::Appeared;
  std::optional<ObjectDescriptor> before;
  std::optional<ObjectDescriptor> after;
  std::optional<Field> changed_field;  // AttributeChanged only

  static ChangeEvent appeared(ObjectDescriptor d);
  static ChangeEvent disappeared(ObjectDescriptor d);
  static ChangeEvent changed(ObjectDescriptor before, Field field, ObjectDescriptor after);
  static ChangeEvent moved(ObjectDescriptor before, Placement to);

  friend bool operator==(const ChangeEvent&, const ChangeEvent&) = default;
  friend auto operator<=>(const ChangeEvent&, const ChangeEvent&) = default;
};

json to_json(const ChangeEvent& e);

// Two descriptors are matched as the same object when they share at least
// this many of the five fields (four attributes + placement).
inline constexpr int kMatchOverlapThreshold = 2;

// Multiset delta from source to target. Unchanged descriptors are cancelled,
// the rest matched greedily by overlap; matched pairs differing in several
// fields become a chain of single-field events.
std::vector<ChangeEvent> diff_scenes(const Scene& source, const Scene& target);

// Applies events to a descriptor multiset. Throws std::invalid_argument when
// an event's `before` is not present.
std::vector<ObjectDescriptor> replay_events(std::vector<ObjectDescriptor> objects,
                                            const std::vector<ChangeEvent>& events);
std::vector<ObjectDescriptor> describe_scene(const Scene& scene);

inline constexpr std::string_view kNoChangeLine = "no visible change";
inline constexpr std::string_view kEmptySceneLine = "an empty scene";

struct ChangeCaption {
  std::vector<ChangeEvent> events;
  std::string rendered;
  ClassLabel from_label = ClassLabel::Zero;
  ClassLabel to_label = ClassLabel::One;
};

std::string render_event(const ChangeEvent& e);
ChangeCaption caption_changes(std::vector<ChangeEvent> events, ClassLabel from, ClassLabel to);

struct ParsedCaption {
  std::vector<ChangeEvent> events;
  std::vector<std::string> residue;  // lines outside the caption grammar
};

// Never throws; "no visible change" lines parse to nothing.
ParsedCaption parse_caption(std::string_view text);

struct NoiseModel {
  double p_drop = 0.0;
  double p_swap = 0.0;
  double p_spurious = 0.0;

  bool is_zero() const { return p_drop == 0.0 && p_swap == 0.0 && p_spurious == 0.0; }
  void validate() const;
  json to_json() const;
  static NoiseModel from_json(const json& j);
};

// Each line is dropped with p_drop; then, with p_swap, one attribute token of
// one remaining line is replaced by another value of the same field; then,
// with p_spurious, one random template line is appended.
ChangeCaption corrupt_caption(const ChangeCaption& caption, const NoiseModel& noise,
                              std::uint64_t seed);

// Whole-scene description, one line per object, no pairwise information.
std::string independent_caption(const Scene& scene);

}  // namespace gift
