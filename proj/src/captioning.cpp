#include "gift/captioning.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "gift/rng.hpp"

namespace gift {
namespace {

std::string_view to_string(Side s) { return s == Side::Left ? "left" : "right"; }
std::string_view to_string(Depth d) { return d == Depth::Near ? "near" : "far"; }

std::string attribute_words(const ObjectDescriptor& d) {
  std::string s;
  s += gift::to_string(d.size);
  s += ' ';
  s += gift::to_string(d.color);
  s += ' ';
  s += gift::to_string(d.material);
  s += ' ';
  s += gift::to_string(d.shape);
  return s;
}

std::string placement_words(const Placement& p) {
  return "the " + std::string(to_string(p.depth)) + " " + std::string(to_string(p.side));
}

int overlap(const ObjectDescriptor& a, const ObjectDescriptor& b) {
  return (a.shape == b.shape) + (a.color == b.color) + (a.material == b.material) +
         (a.size == b.size) + (a.placement == b.placement);
}

// Field order for chained single-field events; Region stands for placement.
constexpr std::array<Field, 5> kChainFields{Field::Color, Field::Material, Field::Shape, Field::Size,
                                            Field::Region};

bool differs(const ObjectDescriptor& a, const ObjectDescriptor& b, Field f) {
  switch (f) {
    case Field::Color: return a.color != b.color;
    case Field::Material: return a.material != b.material;
    case Field::Shape: return a.shape != b.shape;
    case Field::Size: return a.size != b.size;
    case Field::Region: return a.placement != b.placement;
  }
  return false;
}

void assign(ObjectDescriptor& dst, const ObjectDescriptor& src, Field f) {
  switch (f) {
    case Field::Color: dst.color = src.color; break;
    case Field::Material: dst.material = src.material; break;
    case Field::Shape: dst.shape = src.shape; break;
    case Field::Size: dst.size = src.size; break;
    case Field::Region: dst.placement = src.placement; break;
  }
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> words;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Cursor over the words of one caption line.
class LineParser {
 public:
  explicit LineParser(std::vector<std::string> words) : words_(std::move(words)) {}

  bool done() const { return pos_ == words_.size(); }
  bool accept(std::string_view w) {
    if (pos_ < words_.size() && words_[pos_] == w) {
      ++pos_;
      return true;
    }
    return false;
  }
  std::optional<std::string> peek() const {
    if (pos_ < words_.size()) return words_[pos_];
    return std::nullopt;
  }
  std::optional<std::string> next() {
    if (pos_ < words_.size()) return words_[pos_++];
    return std::nullopt;
  }

  std::optional<ObjectDescriptor> attributes() {
    if (pos_ + 4 > words_.size()) return std::nullopt;
    auto size = size_from_string(words_[pos_]);
    auto color = color_from_string(words_[pos_ + 1]);
    auto material = material_from_string(words_[pos_ + 2]);
    auto shape = shape_from_string(words_[pos_ + 3]);
    if (!size || !color || !material || !shape) return std::nullopt;
    pos_ += 4;
    return ObjectDescriptor{*shape, *color, *material, *size, std::nullopt};
  }

  // "the near left" (the article is consumed here).
  std::optional<Placement> placement() {
    if (pos_ + 3 > words_.size() || words_[pos_] != "the") return std::nullopt;
    Placement p;
    if (words_[pos_ + 1] == "near") {
      p.depth = Depth::Near;
    } else if (words_[pos_ + 1] == "far") {
      p.depth = Depth::Far;
    } else {
      return std::nullopt;
    }
    if (words_[pos_ + 2] == "left") {
      p.side = Side::Left;
    } else if (words_[pos_ + 2] == "right") {
      p.side = Side::Right;
    } else {
      return std::nullopt;
    }
    pos_ += 3;
    return p;
  }

  // Optional "at the <depth> <side>" suffix; false on a malformed suffix.
  bool optional_at(ObjectDescriptor& d) {
    if (peek() != std::optional<std::string>("at")) return true;
    ++pos_;
    auto p = placement();
    if (!p) return false;
    d.placement = *p;
    return true;
  }

 private:
  std::vector<std::string> words_;
  std::size_t pos_ = 0;
};

std::optional<ChangeEvent> parse_line(std::string_view line) {
  LineParser p(split_words(line));
  if (p.accept("a")) {
    auto d = p.attributes();
    if (!d || !p.accept("appeared") || !p.optional_at(*d) || !p.done()) return std::nullopt;
    return ChangeEvent::appeared(*d);
  }
  if (!p.accept("the")) return std::nullopt;
  auto d = p.attributes();
  if (!d) return std::nullopt;
  if (p.accept("moved")) {
    if (!p.accept("from")) return std::nullopt;
    auto from = p.placement();
    if (!from || !p.accept("to")) return std::nullopt;
    auto to = p.placement();
    if (!to || !p.done()) return std::nullopt;
    d->placement = *from;
    return ChangeEvent::moved(*d, *to);
  }
  if (!p.optional_at(*d)) return std::nullopt;
  if (p.accept("disappeared")) {
    if (!p.done()) return std::nullopt;
    return ChangeEvent::disappeared(*d);
  }
  if (p.accept("turned")) {
    auto word = p.next();
    auto color = word ? color_from_string(*word) : std::nullopt;
    if (!color || !p.done()) return std::nullopt;
    ObjectDescriptor after = *d;
    after.color = *color;
    return ChangeEvent::changed(*d, Field::Color, after);
  }
  if (p.accept("became")) {
    ObjectDescriptor after = *d;
    if (p.accept("a")) {
      auto word = p.next();
      auto shape = word ? shape_from_string(*word) : std::nullopt;
      if (!shape || !p.done()) return std::nullopt;
      after.shape = *shape;
      return ChangeEvent::changed(*d, Field::Shape, after);
    }
    auto word = p.next();
    if (!word || !p.done()) return std::nullopt;
    if (auto m = material_from_string(*word)) {
      after.material = *m;
      return ChangeEvent::changed(*d, Field::Material, after);
    }
    if (auto s = size_from_string(*word)) {
      after.size = *s;
      return ChangeEvent::changed(*d, Field::Size, after);
    }
  }
  return std::nullopt;
}

std::string join_lines(const std::vector<ChangeEvent>& events) {
  if (events.empty()) return std::string(kNoChangeLine);
  std::string out;
  for (const auto& e : events) {
    if (!out.empty()) out.push_back('\n');
    out += render_event(e);
  }
  return out;
}

ObjectDescriptor random_descriptor(Rng& rng) {
  ObjectDescriptor d;
  d.shape = kShapes[uniform_index(rng, kShapes.size())];
  d.color = kColors[uniform_index(rng, kColors.size())];
  d.material = kMaterials[uniform_index(rng, kMaterials.size())];
  d.size = kSizes[uniform_index(rng, kSizes.size())];
  d.placement = Placement{uniform_index(rng, 2) == 0 ? Side::Left : Side::Right,
                          uniform_index(rng, 2) == 0 ? Depth::Far : Depth::Near};
  return d;
}

template <typename E, std::size_t N>
E other_value(Rng& rng, const std::array<E, N>& all, E current) {
  std::vector<E> others;
  for (E v : all) {
    if (v != current) others.push_back(v);
  }
  return others[uniform_index(rng, others.size())];
}

void swap_field(Rng& rng, ObjectDescriptor& d, Field f) {
  switch (f) {
    case Field::Color: d.color = other_value(rng, kColors, d.color); break;
    case Field::Material: d.material = other_value(rng, kMaterials, d.material); break;
    case Field::Shape: d.shape = other_value(rng, kShapes, d.shape); break;
    case Field::Size: d.size = other_value(rng, kSizes, d.size); break;
    case Field::Region: break;
  }
}

constexpr std::array<Field, 4> kAttributeFields{Field::Color, Field::Material, Field::Shape,
                                                Field::Size};

}  // namespace

ObjectDescriptor describe_object(const SceneObject& obj, int width, int height) {
  return ObjectDescriptor{
      obj.shape, obj.color, obj.material, obj.size,
      Placement{in_region(Region::Left, obj.cell, width, height) ? Side::Left : Side::Right,
                in_region(Region::Near, obj.cell, width, height) ? Depth::Near : Depth::Far}};
}

std::vector<Atom> descriptor_atoms(const ObjectDescriptor& d) {
  std::vector<Atom> atoms{Atom::color(d.color), Atom::material(d.material), Atom::shape(d.shape),
                          Atom::size(d.size)};
  if (d.placement) {
    atoms.push_back(Atom::region(d.placement->side == Side::Left ? Region::Left : Region::Right));
    if (d.placement->depth == Depth::Near) atoms.push_back(Atom::region(Region::Near));
  }
  std::sort(atoms.begin(), atoms.end());
  return atoms;
}

std::string phrase(const ObjectDescriptor& d) {
  std::string s = attribute_words(d);
  if (d.placement) s += " at " + placement_words(*d.placement);
  return s;
}

ChangeEvent ChangeEvent::appeared(ObjectDescriptor d) {
  return {EventKind::Appeared, std::nullopt, d, std::nullopt};
}
ChangeEvent ChangeEvent::disappeared(ObjectDescriptor d) {
  return {EventKind::Disappeared, d, std::nullopt, std::nullopt};
}
ChangeEvent ChangeEvent::changed(ObjectDescriptor before, Field field, ObjectDescriptor after) {
  return {EventKind::AttributeChanged, before, after, field};
}
ChangeEvent ChangeEvent::moved(ObjectDescriptor before, Placement to) {
  ObjectDescriptor after = before;
  after.placement = to;
  return {EventKind::Moved, before, after, std::nullopt};
}

json to_json(const ChangeEvent& e) {
  static constexpr std::array<std::string_view, 4> kKinds{"appeared", "disappeared",
                                                          "attribute_changed", "moved"};
  return json{{"after", e.after ? json(phrase(*e.after)) : json(nullptr)},
              {"before", e.before ? json(phrase(*e.before)) : json(nullptr)},
              {"changed_field", e.changed_field ? json(to_string(*e.changed_field)) : json(nullptr)},
              {"kind", kKinds[static_cast<std::size_t>(e.kind)]}};
}

std::vector<ObjectDescriptor> describe_scene(const Scene& scene) {
  std::vector<ObjectDescriptor> out;
  for (const auto& o : scene.objects()) out.push_back(describe_object(o, scene.width(), scene.height()));
  return out;
}

std::vector<ChangeEvent> diff_scenes(const Scene& source, const Scene& target) {
  auto src = describe_scene(source);
  auto dst = describe_scene(target);
  std::sort(src.begin(), src.end());
  std::sort(dst.begin(), dst.end());
  std::vector<ObjectDescriptor> removed;
  std::vector<ObjectDescriptor> added;
  std::set_difference(src.begin(), src.end(), dst.begin(), dst.end(), std::back_inserter(removed));
  std::set_difference(dst.begin(), dst.end(), src.begin(), src.end(), std::back_inserter(added));

  struct Candidate {
    int overlap;
    ObjectDescriptor lo, hi;  // unordered pair, so matching is argument-symmetric
    std::size_t i, j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < removed.size(); ++i) {
    for (std::size_t j = 0; j < added.size(); ++j) {
      int ov = overlap(removed[i], added[j]);
      if (ov < kMatchOverlapThreshold) continue;
      candidates.push_back({ov, std::min(removed[i], added[j]), std::max(removed[i], added[j]), i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.lo != b.lo) return a.lo < b.lo;
    if (a.hi != b.hi) return a.hi < b.hi;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  std::vector<bool> used_src(removed.size()), used_dst(added.size());
  std::vector<ChangeEvent> events;
  for (const auto& c : candidates) {
    if (used_src[c.i] || used_dst[c.j]) continue;
    used_src[c.i] = used_dst[c.j] = true;
    const ObjectDescriptor& from = removed[c.i];
    const ObjectDescriptor& to = added[c.j];
    std::vector<Field> fields;
    for (Field f : kChainFields) {
      if (differs(from, to, f)) fields.push_back(f);
    }
    // Walking fields in reverse when from > to makes diff(b, a) the exact
    // mirror of diff(a, b).
    if (to < from) std::reverse(fields.begin(), fields.end());
    ObjectDescriptor cur = from;
    for (Field f : fields) {
      ObjectDescriptor next = cur;
      assign(next, to, f);
      events.push_back(f == Field::Region ? ChangeEvent::moved(cur, *next.placement)
                                          : ChangeEvent::changed(cur, f, next));
      cur = next;
    }
  }
  for (std::size_t i = 0; i < removed.size(); ++i) {
    if (!used_src[i]) events.push_back(ChangeEvent::disappeared(removed[i]));
  }
  for (std::size_t j = 0; j < added.size(); ++j) {
    if (!used_dst[j]) events.push_back(ChangeEvent::appeared(added[j]));
  }
  return events;
}

std::vector<ObjectDescriptor> replay_events(std::vector<ObjectDescriptor> objects,
                                            const std::vector<ChangeEvent>& events) {
  for (const auto& e : events) {
    if (e.before) {
      auto it = std::find(objects.begin(), objects.end(), *e.before);
      if (it == objects.end()) throw std::invalid_argument("event source not present: " + phrase(*e.before));
      objects.erase(it);
    }
    if (e.after) objects.push_back(*e.after);
  }
  std::sort(objects.begin(), objects.end());
  return objects;
}

std::string render_event(const ChangeEvent& e) {
  switch (e.kind) {
    case EventKind::Appeared: {
      std::string s = "a " + attribute_words(*e.after) + " appeared";
      if (e.after->placement) s += " at " + placement_words(*e.after->placement);
      return s;
    }
    case EventKind::Disappeared:
      return "the " + phrase(*e.before) + " disappeared";
    case EventKind::Moved:
      return "the " + attribute_words(*e.before) + " moved from " +
             placement_words(*e.before->placement) + " to " + placement_words(*e.after->placement);
    case EventKind::AttributeChanged: {
      const std::string subject = "the " + phrase(*e.before);
      switch (*e.changed_field) {
        case Field::Color: return subject + " turned " + std::string(to_string(e.after->color));
        case Field::Material: return subject + " became " + std::string(to_string(e.after->material));
        case Field::Size: return subject + " became " + std::string(to_string(e.after->size));
        case Field::Shape: return subject + " became a " + std::string(to_string(e.after->shape));
        case Field::Region: break;
      }
      break;
    }
  }
  throw std::logic_error("unrenderable change event");
}

ChangeCaption caption_changes(std::vector<ChangeEvent> events, ClassLabel from, ClassLabel to) {
  ChangeCaption c;
  c.rendered = join_lines(events);
  c.events = std::move(events);
  c.from_label = from;
  c.to_label = to;
  return c;
}

ParsedCaption parse_caption(std::string_view text) {
  ParsedCaption out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = trim(text.substr(start, nl == std::string_view::npos ? nl : nl - start));
    if (!line.empty() && line != kNoChangeLine) {
      if (auto e = parse_line(line)) {
        out.events.push_back(*e);
      } else {
        out.residue.push_back(line);
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

void NoiseModel::validate() const {
  for (double p : {p_drop, p_swap, p_spurious}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise probabilities must lie in [0, 1]");
  }
}

json NoiseModel::to_json() const {
  return json{{"p_drop", p_drop}, {"p_spurious", p_spurious}, {"p_swap", p_swap}};
}

NoiseModel NoiseModel::from_json(const json& j) {
  NoiseModel n;
  n.p_drop = j.value("p_drop", 0.0);
  n.p_swap = j.value("p_swap", 0.0);
  n.p_spurious = j.value("p_spurious", 0.0);
  n.validate();
  return n;
}

ChangeCaption corrupt_caption(const ChangeCaption& caption, const NoiseModel& noise,
                              std::uint64_t seed) {
  noise.validate();
  if (noise.is_zero()) return caption;
  Rng rng(seed);
  std::vector<ChangeEvent> kept;
  for (const auto& e : caption.events) {
    if (!bernoulli(rng, noise.p_drop)) kept.push_back(e);
  }
  if (!kept.empty() && bernoulli(rng, noise.p_swap)) {
    auto& e = kept[uniform_index(rng, kept.size())];
    Field f = kAttributeFields[uniform_index(rng, kAttributeFields.size())];
    ObjectDescriptor& subject = e.kind == EventKind::Appeared ? *e.after : *e.before;
    swap_field(rng, subject, f);
    if (e.kind == EventKind::Moved || (e.kind == EventKind::AttributeChanged && *e.changed_field != f)) {
      // The after descriptor shares every untouched field with the subject.
      assign(*e.after, subject, f);
    }
  }
  if (bernoulli(rng, noise.p_spurious)) {
    ObjectDescriptor d = random_descriptor(rng);
    switch (uniform_index(rng, 3)) {
      case 0: kept.push_back(ChangeEvent::appeared(d)); break;
      case 1: kept.push_back(ChangeEvent::disappeared(d)); break;
      default: {
        Field f = kAttributeFields[uniform_index(rng, kAttributeFields.size())];
        ObjectDescriptor after = d;
        swap_field(rng, after, f);
        kept.push_back(ChangeEvent::changed(d, f, after));
      }
    }
  }
  // Events are re-derived from the text so the two views never disagree.
  ChangeCaption out;
  out.rendered = join_lines(kept);
  out.events = parse_caption(out.rendered).events;
  out.from_label = caption.from_label;
  out.to_label = caption.to_label;
  return out;
}

std::string independent_caption(const Scene& scene) {
  if (scene.empty()) return std::string(kEmptySceneLine);
  std::string out;
  for (const auto& d : describe_scene(scene)) {
    if (!out.empty()) out.push_back('\n');
    out += "a " + phrase(d);
  }
  return out;
}

}  // namespace gift
