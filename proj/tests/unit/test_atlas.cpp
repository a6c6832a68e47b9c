#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "litatlas/atlas.hpp"
#include "litatlas/error.hpp"
#include "litatlas/rng.hpp"
#include "oracles.hpp"

using namespace litatlas;
using namespace litatlas::atlas;

namespace {

corpus::Document doc(const std::string& id, const std::string& abstract, std::vector<std::string> caps) {
  corpus::Document d;
  d.doc_id = id;
  d.abstract = abstract;
  int n = 0;
  for (auto& c : caps) d.captions.push_back({corpus::make_caption_id(id, ++n), std::move(c), n});
  return d;
}

topics::TopicModel model_for(std::vector<std::vector<double>> theta) {
  topics::TopicModel m;
  m.K = theta.front().size();
  m.alpha = 0.1;
  m.beta = 0.01;
  m.vocab = {"w"};
  m.phi.assign(m.K, {1.0});
  m.theta = std::move(theta);
  for (std::size_t d = 0; d < m.theta.size(); ++d) m.assignments.push_back(static_cast<int>(topics::assign_topic(m, d)));
  return m;
}

chemparse::DocumentElementMatrix markers_for(const std::vector<std::string>& ids,
                                             const std::vector<std::set<std::string>>& present) {
  chemparse::DocumentElementMatrix m;
  m.doc_ids = ids;
  m.elements = chemparse::ElementTable::standard().symbols();
  for (const auto& p : present) {
    std::vector<std::uint8_t> row(m.elements.size(), 0);
    for (std::size_t c = 0; c < m.elements.size(); ++c) row[c] = p.count(m.elements[c]) ? 1 : 0;
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace

TEST_CASE("caption labelling by priority") {
  const auto rules = sort_rules({{"Anneal", {"anneal*"}, 1}, {"XRD", {"xrd", "x-ray diffraction"}, 2}});
  CHECK(rules.front().label == "XRD");
  CHECK(label_caption("XRD patterns of annealed glass-ceramics", rules) == "XRD");
  CHECK(label_caption("Glass annealed at 500 C", rules) == "Anneal");
  CHECK_FALSE(label_caption("Photograph of samples", rules));
  CHECK(label_caption("SEM micrograph", bundled_rules()) == "SEM");
  CHECK(label_caption("X-Ray Diffraction of the powder", bundled_rules()) == "XRD");
  // Whole-word matching: "system" does not contain the word "tem".
  CHECK_FALSE(label_caption("Schematic of the system", bundled_rules()));

  CHECK_THROWS_AS(sort_rules({{"A", {}, 1}}), ValidationError);
  CHECK_THROWS_AS(sort_rules({{"A", {"a"}, 1}, {"A", {"b"}, 1}}), ValidationError);
  CHECK_NOTHROW(sort_rules({{"A", {"a"}, 1}, {"A", {"b"}, 2}}));
}

TEST_CASE("pattern matching") {
  CHECK(pattern_matches("Annealed glass", "anneal*"));
  CHECK_FALSE(pattern_matches("Preannealed glass", "anneal*"));
  CHECK(pattern_matches("Preannealed glass", "*anneal*"));
  CHECK(pattern_matches("the SEM, image", "sem"));
  CHECK_FALSE(pattern_matches("semiconductor", "sem"));
  CHECK(pattern_matches("X-ray diffraction", "x-ray diffraction"));
}

TEST_CASE("label_captions and label JSON") {
  const corpus::Corpus c({doc("a", "x", {"SEM image", "nothing here"}), doc("b", "y", {"XRD pattern"})});
  const auto l = label_captions(c, bundled_rules());
  CHECK(l.caption_ids == std::vector<std::string>{"a#1", "a#2", "b#1"});
  CHECK(l.labels[0] == "SEM");
  CHECK_FALSE(l.labels[1]);
  CHECK(l.label_of("b#1") == "XRD");
  CHECK(std::is_sorted(l.rule_labels.begin(), l.rule_labels.end()));
  CHECK(caption_labels_from_json(caption_labels_to_json(l)) == l);
}

TEST_CASE("median and label placement") {
  CHECK(median({1, 2, 100}) == 2);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  const std::vector<MapPoint> one = {{"p", 3, 4, "g"}};
  const auto l1 = place_labels(one);
  REQUIRE(l1.size() == 1);
  CHECK(l1[0] == PlacedLabel{"g", 3, 4, 1});

  std::vector<MapPoint> pts = {{"a", 1, 5, "g"}, {"b", 2, 6, "g"}, {"c", 100, 7, "g"}, {"d", 0, 0, std::nullopt},
                               {"e", 9, 9, "10"}, {"f", 8, 8, "2"}};
  const auto base = place_labels(pts, {{"2", "two"}});
  REQUIRE(base.size() == 3);
  CHECK(base[0].text == "two");
  CHECK(base[1].text == "10");
  CHECK(base[2] == PlacedLabel{"g", 2, 6, 3});

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(pts);
    CHECK(place_labels(pts, {{"2", "two"}}) == base);
  }
  // Replacing the max member by a larger value leaves the median unchanged.
  for (auto& p : pts)
    if (p.id == "c") p.x = 1e9;
  CHECK(place_labels(pts, {{"2", "two"}}) == base);
}

TEST_CASE("axis profile") {
  const std::vector<Anchor> anchors = {{"Optical", 0, 1}, {"Mechanical", 1, 1}, {"Microstructural", 0, 0},
                                       {"Thermodynamic", 1, 0}};
  const std::vector<PlacedLabel> labels = {{"at", 1, 1, 1}, {"tie", 0.5, 0.0, 1}, {"mid", 0.2, 0.7, 1}};
  const auto p = axis_profile(labels, anchors);
  CHECK(p.distances[0][1] == 0.0);
  CHECK(p.nearest[0] == 1);
  CHECK_FALSE(p.boundary[0]);
  // Equidistant from Microstructural and Thermodynamic: the lower name wins.
  CHECK(p.anchors[p.nearest[1]].name == "Microstructural");
  CHECK(p.boundary[1]);

  Rng rng(5);
  std::vector<PlacedLabel> random;
  for (int i = 0; i < 50; ++i) random.push_back({"l" + std::to_string(i), rng.uniform() * 3 - 1, rng.uniform() * 3 - 1, 1});
  const auto q = axis_profile(random, anchors);
  for (std::size_t i = 0; i < random.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      const double dx = random[i].x - anchors[a].x, dy = random[i].y - anchors[a].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      CHECK(q.distances[i][a] == Catch::Approx(d).margin(1e-12));
      CHECK(q.distances[i][a] >= 0.0);
      if (d < std::sqrt(std::pow(random[i].x - anchors[best].x, 2) + std::pow(random[i].y - anchors[best].y, 2)))
        best = a;
    }
    CHECK(q.nearest[i] == best);
  }

  auto coincident = anchors;
  coincident[3] = {"Thermodynamic", 0, 0};
  CHECK_THROWS_AS(axis_profile(labels, coincident), ValidationError);
  CHECK_THROWS_AS(axis_profile(labels, {anchors[0], anchors[1], anchors[2]}), ValidationError);
}

TEST_CASE("default anchors sit at the bounding-box corners") {
  MapDocument m;
  m.points = {{"a", -2, 1, {}}, {"b", 3, -4, {}}, {"c", 0, 5, {}}};
  const auto a = default_anchors(m);
  REQUIRE(a.size() == 4);
  CHECK((a[0].name == "Optical" && a[0].x == -2 && a[0].y == 5));
  CHECK((a[1].name == "Mechanical" && a[1].x == 3 && a[1].y == 5));
  CHECK((a[2].name == "Microstructural" && a[2].x == -2 && a[2].y == -4));
  CHECK((a[3].name == "Thermodynamic" && a[3].x == 3 && a[3].y == -4));
}

TEST_CASE("LDA and CCP maps") {
  auto m = model_for({{0.1, 0.8, 0.1}, {0.7, 0.2, 0.1}, {0.2, 0.2, 0.6}, {0.1, 0.7, 0.2}});
  m.topic_names = {"zero", "one", ""};
  const std::vector<std::string> ids = {"d0", "d1", "d2", "d3"};
  const std::vector<embed::Point> xy = {{0, 0}, {1, 1}, {2, 2}, {4, 4}};
  const auto lda = build_lda_map(ids, xy, m);
  REQUIRE(lda.points.size() == 4);
  CHECK(lda.points[0].group == "1");
  CHECK(lda.points[1].group == "0");
  CHECK(lda.points[2].group == "2");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : lda.labels) counts[l.text] = l.count;
  CHECK(counts == std::map<std::string, std::size_t>{{"zero", 1}, {"one", 2}, {"2", 1}});
  CHECK_THROWS_AS(build_lda_map({"d0"}, xy, m), DimensionError);

  auto m2 = m;
  m2.theta[0] = {0.8, 0.1, 0.1};
  m2.assignments[0] = 0;
  CHECK(build_lda_map(ids, xy, m2).provenance.at("model") != lda.provenance.at("model"));
  CHECK(build_lda_map(ids, xy, m).provenance == lda.provenance);

  CaptionLabels labels;
  labels.caption_ids = {"d0#1", "d0#2", "d1#1"};
  labels.labels = {"SEM", std::nullopt, "XRD"};
  const auto ccp = build_ccp_map(labels.caption_ids, {{0, 0}, {1, 0}, {0, 1}}, labels);
  CHECK(ccp.points.size() == 3);
  CHECK_FALSE(ccp.points[1].group);
  std::size_t total = 0;
  for (const auto& l : ccp.labels) total += l.count;
  CHECK(ccp.labels.size() == 2);
  CHECK(total == 2);

  CaptionLabels none = labels;
  none.labels = {std::nullopt, std::nullopt, std::nullopt};
  const auto empty = build_ccp_map(labels.caption_ids, {{0, 0}, {1, 0}, {0, 1}}, none);
  CHECK(empty.labels.empty());
  CHECK(empty.points.size() == 3);

  oracle::TempDir dir;
  export_map(lda, dir / "lda.json");
  export_map(ccp, dir / "ccp.json");
  CHECK(import_map(dir / "lda.json") == lda);
  CHECK(import_map(dir / "ccp.json") == ccp);
  CHECK_THROWS_AS(map_from_json(R"({"map_type":"lda","points":[{"id":"a","x":1,"y":2,"group":null},{"id":"a","x":1,"y":2,"group":null}],"labels":[],"provenance":{}})"),
                  SchemaError);
}

TEST_CASE("element overlays") {
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  const auto markers = markers_for(ids, {{"F", "Cl"}, {"F"}, {"Cl", "Si"}, {}});
  MapDocument lda;
  for (const auto& id : ids) lda.points.push_back({id, 0, 0, {}});
  CHECK(element_overlay(lda, markers, {"F", "Cl"}, OverlayMode::all) == std::vector<std::string>{"a"});
  CHECK(element_overlay(lda, markers, {"F", "Cl"}, OverlayMode::any) == std::vector<std::string>{"a", "b", "c"});
  CHECK(element_overlay(lda, markers, {}, OverlayMode::any).empty());
  CHECK(element_overlay(lda, markers, {}, OverlayMode::all).size() == 4);
  CHECK_THROWS_AS(element_overlay(lda, markers, {"Zz"}, OverlayMode::any), ValidationError);

  MapDocument ccp;
  ccp.map_type = MapType::ccp;
  ccp.points = {{"a#1", 0, 0, {}}, {"c#1", 0, 0, {}}, {"c#2", 0, 0, {}}, {"d#1", 0, 0, {}}};
  CHECK(element_overlay(ccp, markers, {"Cl"}, OverlayMode::all) == std::vector<std::string>{"a#1", "c#1", "c#2"});

  // any-mode distributes over union; sizes match a brute-force row scan.
  Rng rng(4);
  const auto& syms = markers.elements;
  std::vector<std::set<std::string>> present;
  std::vector<std::string> many_ids;
  for (int d = 0; d < 40; ++d) {
    std::set<std::string> p;
    for (int k = 0; k < 3; ++k) p.insert(syms[rng.below(20)]);
    present.push_back(p);
    many_ids.push_back("m" + std::to_string(d));
  }
  const auto big = markers_for(many_ids, present);
  MapDocument map;
  for (const auto& id : many_ids) map.points.push_back({id, 0, 0, {}});
  for (int t = 0; t < 50; ++t) {
    const auto e1 = syms[rng.below(20)], e2 = syms[rng.below(20)];
    const auto u = element_overlay(map, big, {e1, e2}, OverlayMode::any);
    auto a = element_overlay(map, big, {e1}, OverlayMode::any);
    const auto b = element_overlay(map, big, {e2}, OverlayMode::any);
    std::set<std::string> merged(a.begin(), a.end());
    merged.insert(b.begin(), b.end());
    CHECK(std::set<std::string>(u.begin(), u.end()) == merged);
    std::size_t brute = 0;
    for (const auto& p : present) brute += p.count(e1) && p.count(e2);
    CHECK(element_overlay(map, big, {e1, e2}, OverlayMode::all).size() == brute);
  }
}
