#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <regex>

#include "gift/classifier.hpp"
#include "gift/concept.hpp"
#include "gift/editor.hpp"
#include "gift/render.hpp"
#include "gift/rng.hpp"
#include "gift/world.hpp"
#include "oracles.hpp"

using namespace gift;

namespace {

SceneObject obj(Shape sh, Color c, Material m, Size s, int col, int row) { return {sh, c, m, s, {col, row}}; }

Scene scene_of(std::vector<SceneObject> objects) { return Scene(8, 6, std::move(objects)); }

std::size_t count_glyphs(const std::string& svg) {
  std::size_t n = 0;
  for (std::size_t p = svg.find("class=\"glyph\""); p != std::string::npos; p = svg.find("class=\"glyph\"", p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Scene, RejectsOutOfBoundsAndSharedCells) {
  EXPECT_THROW(scene_of({obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 8, 0)}), SceneError);
  EXPECT_THROW(scene_of({obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 1, 1),
                         obj(Shape::Sphere, Color::Blue, Material::Rubber, Size::Large, 1, 1)}),
               SceneError);
}

TEST(Scene, IdIgnoresObjectOrder) {
  const auto a = obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 0, 0);
  const auto b = obj(Shape::Sphere, Color::Cyan, Material::Rubber, Size::Large, 5, 3);
  const auto c = obj(Shape::Cylinder, Color::Gray, Material::Metal, Size::Large, 2, 4);
  const Scene s1 = scene_of({a, b, c});
  const Scene s2 = scene_of({c, a, b});
  EXPECT_EQ(s1.id(), s2.id());
  EXPECT_EQ(s1.canonical_json(), s2.canonical_json());
  EXPECT_NE(s1.id(), scene_of({a, b}).id());
  EXPECT_EQ(s1.id().size(), 16u);
}

TEST(Scene, JsonRoundTrip) {
  const Scene s = sample_scene(3, WorldConfig{});
  const Scene back = Scene::from_json(json::parse(s.to_json().dump()));
  EXPECT_EQ(s, back);
  EXPECT_EQ(s.to_json()["id"], s.id());
}

TEST(World, SamplingIsDeterministic) {
  const WorldConfig w;
  EXPECT_EQ(sample_scene(0, w).id(), sample_scene(0, w).id());
  EXPECT_NE(sample_scene(0, w).id(), sample_scene(1, w).id());
}

TEST(World, ForcedCount) {
  WorldConfig w;
  w.min_objects = w.max_objects = 3;
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(sample_scene(s, w).size(), 3u);
}

TEST(World, InvalidParams) {
  WorldConfig w;
  w.min_objects = 2;
  EXPECT_THROW(w.validate(), SceneError);
  w.min_objects = 3;
  w.max_objects = 11;
  EXPECT_THROW(w.validate(), SceneError);
  w.max_objects = 5;
  w.width = 2;
  w.height = 2;
  EXPECT_THROW(w.validate(), SceneError);
}

// Each attribute value's frequency over 10 000 scenes lies within 3 sigma of
// the uniform expectation (multinomial marginals are binomial).
TEST(World, AttributeFrequenciesAreUniform) {
  const WorldConfig w;
  std::array<double, 8> color{};
  std::array<double, 3> shape{};
  std::array<double, 2> material{}, size{};
  std::vector<double> count_hist(11, 0);
  double n = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const Scene sc = sample_scene(s, w);
    count_hist[sc.size()] += 1;
    for (const auto& o : sc.objects()) {
      ++color[static_cast<int>(o.color)];
      ++shape[static_cast<int>(o.shape)];
      ++material[static_cast<int>(o.material)];
      ++size[static_cast<int>(o.size)];
      n += 1;
    }
  }
  auto check = [&](const auto& counts, double total) {
    const double p = 1.0 / static_cast<double>(counts.size());
    const double sigma = std::sqrt(total * p * (1 - p));
    for (double c : counts) EXPECT_LE(std::abs(c - total * p), 3 * sigma);
  };
  check(color, n);
  check(shape, n);
  check(material, n);
  check(size, n);
  std::vector<double> counts(count_hist.begin() + 3, count_hist.end());
  const double p = 1.0 / 8.0, sigma = std::sqrt(10000 * p * (1 - p));
  for (double c : counts) EXPECT_LE(std::abs(c - 10000 * p), 3 * sigma);
}

TEST(Render, DeterministicGlyphPerObject) {
  const Scene s = scene_of({obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 0, 0),
                            obj(Shape::Sphere, Color::Cyan, Material::Rubber, Size::Large, 5, 3),
                            obj(Shape::Cylinder, Color::Gray, Material::Metal, Size::Large, 2, 4)});
  EXPECT_EQ(render_svg(s), render_svg(s));
  EXPECT_EQ(count_glyphs(render_svg(s)), 3u);
  const std::string empty = render_svg(scene_of({}));
  EXPECT_EQ(count_glyphs(empty), 0u);
  EXPECT_NE(empty.find("<svg"), std::string::npos);
  // Material is drawn as the stroke pattern.
  const std::string svg = render_svg(s);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
}

TEST(Concept, ParseVocabulary) {
  EXPECT_EQ(parse_concept("cyan object").canonical(), "color=cyan");
  EXPECT_EQ(parse_concept("a cyan object").canonical(), "color=cyan");
  EXPECT_EQ(parse_concept("yellow rubber object").canonical(), "color=yellow&material=rubber");
  EXPECT_EQ(parse_concept("Red Metal Object").canonical(), "color=red&material=metal");
  EXPECT_EQ(parse_concept("object in left region").canonical(), "region=left");
  EXPECT_EQ(parse_concept("vehicle in the left lane").canonical(), "region=left");
  EXPECT_EQ(parse_concept("presence of a red object").canonical(), "color=red");
  EXPECT_EQ(parse_concept("color=red&material=metal").canonical(), "color=red&material=metal");
}

TEST(Concept, ParseIsTotal) {
  const Concept c = parse_concept("dense traffic in left lane");
  EXPECT_TRUE(c.is_opaque());
  EXPECT_EQ(c.text(), "dense traffic in left lane");
  EXPECT_TRUE(parse_concept("").is_opaque());
  EXPECT_TRUE(parse_concept("red blue object").is_opaque());
  EXPECT_TRUE(parse_concept("red metal large cube in the left region").is_opaque());  // 5 conjuncts
}

TEST(Concept, DescribeParsesBack) {
  for (const char* text : {"cyan object", "red metal object", "large sphere", "object in left region",
                           "small rubber object in near region", "metal cylinder"}) {
    const Concept c = parse_concept(text);
    ASSERT_FALSE(c.is_opaque()) << text;
    EXPECT_EQ(parse_concept(c.describe()), c) << text;
  }
}

TEST(Concept, CombineCanonicalizes) {
  const std::vector<Concept> rm{parse_concept("red object"), parse_concept("metal object")};
  EXPECT_EQ(combine(rm).canonical(), "color=red&material=metal");
  const std::vector<Concept> mr{parse_concept("metal object"), parse_concept("red object")};
  EXPECT_EQ(combine(mr), combine(rm));
  const std::vector<Concept> same{parse_concept("cyan object"), parse_concept("cyan object")};
  EXPECT_EQ(combine(same), parse_concept("cyan object"));
  const std::vector<Concept> contra{parse_concept("red object"), parse_concept("blue object")};
  EXPECT_THROW(combine(contra), ConceptError);
  const std::vector<Concept> overflow{parse_concept("red metal object"), parse_concept("large sphere")};
  EXPECT_THROW(combine(overflow), ConceptError);
  const std::vector<Concept> sides{parse_concept("object in left region"), parse_concept("object in right region")};
  EXPECT_THROW(combine(sides), ConceptError);
  const std::vector<Concept> opaque{parse_concept("dense traffic"), parse_concept("red object")};
  EXPECT_THROW(combine(opaque), ConceptError);
}

TEST(Concept, CombineIsAssociative) {
  const Concept a = parse_concept("red object"), b = parse_concept("metal object"), c = parse_concept("cube");
  const std::vector<Concept> ab{a, b}, bc{b, c};
  const std::vector<Concept> left{combine(ab), c}, right{a, combine(bc)};
  EXPECT_EQ(combine(left), combine(right));
}

TEST(Concept, EvalMatchesPerObjectOracle) {
  const Scene s = scene_of({obj(Shape::Cube, Color::Red, Material::Rubber, Size::Small, 0, 0),
                            obj(Shape::Sphere, Color::Blue, Material::Metal, Size::Large, 5, 3)});
  EXPECT_FALSE(eval_concept(s, parse_concept("red metal object")));
  EXPECT_TRUE(eval_concept(s, parse_concept("red object")));
  EXPECT_FALSE(eval_concept(scene_of({}), parse_concept("red object")));
  EXPECT_THROW(eval_concept(s, parse_concept("dense traffic")), ConceptError);

  // Random scenes and concepts against the restated predicate.
  const std::vector<std::pair<std::string, oracle::ObjectPredicate>> cases{
      {"red metal object", {Color::Red, Material::Metal}},
      {"large sphere", {std::nullopt, std::nullopt, Shape::Sphere, Size::Large}},
      {"object in left region", {std::nullopt, std::nullopt, std::nullopt, std::nullopt, true}},
      {"cyan object in near region", {Color::Cyan, std::nullopt, std::nullopt, std::nullopt, false, false, true}},
      {"rubber object in right region", {std::nullopt, Material::Rubber, std::nullopt, std::nullopt, false, true}},
  };
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Scene sc = sample_scene(seed, WorldConfig{});
    for (const auto& [text, pred] : cases) EXPECT_EQ(eval_concept(sc, parse_concept(text)), pred.any(sc)) << text;
  }
}

TEST(Concept, ImpliedBy) {
  EXPECT_TRUE(parse_concept("red object").implied_by(parse_concept("red metal object")));
  EXPECT_FALSE(parse_concept("red metal object").implied_by(parse_concept("red object")));
  EXPECT_TRUE(parse_concept("red object").implied_by(parse_concept("red object")));
}

TEST(Editor, AddSatisfiesConceptAndKeepsOthers) {
  const Scene s = scene_of({obj(Shape::Cube, Color::Red, Material::Rubber, Size::Small, 0, 0),
                            obj(Shape::Sphere, Color::Blue, Material::Metal, Size::Large, 5, 3)});
  for (const char* text : {"cyan object", "red metal object", "object in left region", "large cube in near region"}) {
    const Concept c = parse_concept(text);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Scene out = edit_add(s, c, seed);
      EXPECT_TRUE(eval_concept(out, c)) << text;
      ASSERT_EQ(out.size(), s.size() + 1);
      for (const auto& o : s.objects()) EXPECT_NE(out.at(o.cell), nullptr);
      for (const auto& o : s.objects()) EXPECT_EQ(*out.at(o.cell), o);
    }
  }
  const Scene left = edit_add(s, parse_concept("object in left region"), 5);
  for (const auto& o : left.objects()) {
    if (!s.at(o.cell)) EXPECT_LT(o.cell.col, 4);
  }
  EXPECT_EQ(edit_add(s, parse_concept("cyan object"), 9), edit_add(s, parse_concept("cyan object"), 9));
}

TEST(Editor, AddFailsWithoutFreeCell) {
  std::vector<SceneObject> full;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 8; ++c) full.push_back(obj(Shape::Cube, Color::Gray, Material::Metal, Size::Small, c, r));
  }
  EXPECT_THROW(edit_add(scene_of(full), parse_concept("cyan object"), 1), EditError);
  std::vector<SceneObject> left_full;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 4; ++c) left_full.push_back(obj(Shape::Cube, Color::Gray, Material::Metal, Size::Small, c, r));
  }
  EXPECT_THROW(edit_add(scene_of(left_full), parse_concept("object in left region"), 1), EditError);
  EXPECT_THROW(edit_add(scene_of({}), parse_concept("dense traffic"), 1), EditError);
}

TEST(Editor, RemoveDeletesOnlyMatches) {
  const auto rm = obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 0, 0);
  const auto rr = obj(Shape::Sphere, Color::Red, Material::Rubber, Size::Large, 5, 3);
  const auto c1 = obj(Shape::Cylinder, Color::Cyan, Material::Metal, Size::Large, 2, 4);
  const auto c2 = obj(Shape::Cube, Color::Cyan, Material::Rubber, Size::Small, 7, 5);
  const Scene s = scene_of({rm, rr, c1, c2});
  const Scene no_rm = edit_remove(s, parse_concept("red metal object"));
  EXPECT_EQ(no_rm, scene_of({rr, c1, c2}));
  const Scene no_cyan = edit_remove(s, parse_concept("cyan object"));
  EXPECT_EQ(no_cyan, scene_of({rm, rr}));
  EXPECT_EQ(edit_remove(s, parse_concept("yellow object")), s);
  EXPECT_EQ(edit_remove(no_cyan, parse_concept("cyan object")), no_cyan);
  EXPECT_THROW(edit_remove(s, parse_concept("dense traffic")), EditError);
}

TEST(Editor, AddThenRemoveRestoresAbsence) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scene s = sample_scene(seed, WorldConfig{});
    for (const char* text : {"cyan object", "red metal object", "object in left region", "small sphere"}) {
      const Concept c = parse_concept(text);
      const Scene added = edit_add(s, c, seed);
      const Scene removed = edit_remove(added, c);
      EXPECT_FALSE(eval_concept(removed, c));
      EXPECT_EQ(edit_remove(removed, c), removed);
      for (const auto& o : s.objects()) {
        if (!c.matches(o, s.width(), s.height())) {
          ASSERT_NE(removed.at(o.cell), nullptr);
          EXPECT_EQ(*removed.at(o.cell), o);
        }
      }
    }
  }
}

TEST(Editor, TraceReplayAndJson) {
  const auto a = obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 0, 0);
  const Scene s = scene_of({a});
  const EditTrace trace{Edit::recolor(a, Color::Brown)};
  const Scene t = apply_trace(s, trace);
  EXPECT_EQ(t.objects()[0].color, Color::Brown);
  EXPECT_EQ(trace_from_json(json::parse(to_json(trace).dump())), trace);
  EXPECT_THROW(apply_edit(s, Edit::remove(obj(Shape::Cube, Color::Red, Material::Metal, Size::Small, 1, 1))),
               EditError);
  EXPECT_THROW(apply_edit(s, Edit::move(a, {9, 9})), EditError);
}

TEST(Classifier, RuleAndBias) {
  const RuleClassifier cyan(parse_concept("cyan object"));
  EXPECT_EQ(cyan.classify(scene_of({obj(Shape::Sphere, Color::Cyan, Material::Metal, Size::Small, 0, 0)})),
            ClassLabel::One);
  EXPECT_EQ(cyan.classify(scene_of({})), ClassLabel::Zero);

  const RuleClassifier biased(parse_concept("green object"), parse_concept("object in left region"));
  const Scene left_only = scene_of({obj(Shape::Cube, Color::Gray, Material::Metal, Size::Small, 1, 2)});
  const Scene right_only = scene_of({obj(Shape::Cube, Color::Gray, Material::Metal, Size::Small, 6, 2)});
  const Scene right_green = scene_of({obj(Shape::Cube, Color::Green, Material::Metal, Size::Small, 6, 2)});
  EXPECT_EQ(biased.classify(left_only), ClassLabel::One);
  EXPECT_EQ(biased.classify(right_only), ClassLabel::Zero);
  EXPECT_EQ(biased.classify(right_green), ClassLabel::One);
}

TEST(Classifier, PolarityFlipComplements) {
  const RuleClassifier m(parse_concept("red metal object"), parse_concept("object in near region"));
  const RuleClassifier flipped = m.with_flipped_polarity();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Scene s = sample_scene(seed, WorldConfig{});
    EXPECT_EQ(flipped.classify(s), flip(m.classify(s)));
  }
  const RuleClassifier back = RuleClassifier::from_json(m.to_json());
  EXPECT_EQ(back.describe(), m.describe());
  EXPECT_EQ(ConstantClassifier(ClassLabel::One).classify(scene_of({})), ClassLabel::One);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, "gen"), derive_seed(1, "cex"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(2, std::uint64_t{0}));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}
