#pragma once

// Map artifacts: the LDA plot, the caption cluster plot (CCP), element
// overlays, label placement, and the four-axis profile.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/embed.hpp"
#include "litatlas/topics.hpp"

namespace litatlas::atlas {

// ---------------------------------------------------------------------------
// Caption labels

/// Patterns are case-insensitive and match whole words or phrases. A trailing
/// `*` matches any word ending ("anneal*" matches "annealed"); a leading `*`
/// drops the left word boundary.
struct LabelRule {
  std::string label;
  std::vector<std::string> patterns;
  int priority = 0;

  bool operator==(const LabelRule&) const = default;
};

/// Highest priority first, then label name. Throws ValidationError for empty
/// pattern lists or a repeated (label, priority).
std::vector<LabelRule> sort_rules(std::vector<LabelRule> rules);
std::vector<LabelRule> parse_rules(std::string_view json_text);
std::vector<LabelRule> load_rules(const std::filesystem::path& path);
/// The shipped reconstruction of the paper's caption categories; not canonical.
const std::vector<LabelRule>& bundled_rules();

bool pattern_matches(std::string_view text, std::string_view pattern);

/// Label of the first rule (in the given order) with a matching pattern.
std::optional<std::string> label_caption(std::string_view caption_text, const std::vector<LabelRule>& sorted_rules);
std::optional<std::string> label_caption(const corpus::Caption& caption, const std::vector<LabelRule>& sorted_rules);

/// One entry per corpus caption, in corpus order.
struct CaptionLabels {
  std::vector<std::string> caption_ids;
  std::vector<std::optional<std::string>> labels;
  std::vector<std::string> rule_labels;  // every label the rule set can produce
  std::vector<LabelRule> rules;          // the sorted rule table that produced the labels

  std::optional<std::string> label_of(std::string_view caption_id) const;
  bool operator==(const CaptionLabels&) const = default;
};

CaptionLabels label_captions(const corpus::Corpus& corpus, const std::vector<LabelRule>& sorted_rules);
std::string caption_labels_to_json(const CaptionLabels& labels);
CaptionLabels caption_labels_from_json(std::string_view text);

// ---------------------------------------------------------------------------
// Maps

enum class MapType { lda, ccp };
std::string_view to_string(MapType t);
MapType map_type_from_string(std::string_view s);

struct MapPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::optional<std::string> group;

  bool operator==(const MapPoint&) const = default;
};

struct PlacedLabel {
  std::string text;
  double x = 0.0;
  double y = 0.0;
  std::size_t count = 0;

  bool operator==(const PlacedLabel&) const = default;
};

struct MapDocument {
  MapType map_type = MapType::lda;
  std::vector<MapPoint> points;
  std::vector<PlacedLabel> labels;
  std::map<std::string, std::string> provenance;

  bool operator==(const MapDocument&) const = default;
};

/// Middle order statistic; mean of the two middle values for even sizes.
double median(std::vector<double> values);

/// One label per group at the median member position, count = member count.
/// Points without a group are skipped. Labels are ordered by group, numeric
/// groups numerically. The label text is the group unless `text_of` maps it.
std::vector<PlacedLabel> place_labels(const std::vector<MapPoint>& points,
                                      const std::map<std::string, std::string>& text_of = {});

/// `coords` align with `model.theta` rows and `doc_ids`.
MapDocument build_lda_map(const std::vector<std::string>& doc_ids, const std::vector<embed::Point>& coords,
                          const topics::TopicModel& model);

/// `coords` align with `caption_ids`; unlabeled captions keep a null group.
MapDocument build_ccp_map(const std::vector<std::string>& caption_ids, const std::vector<embed::Point>& coords,
                          const CaptionLabels& labels);

std::string map_to_json(const MapDocument& map);
MapDocument map_from_json(std::string_view text);
void export_map(const MapDocument& map, const std::filesystem::path& path);
MapDocument import_map(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Element overlays

enum class OverlayMode { any, all };
OverlayMode overlay_mode_from_string(std::string_view s);

/// Item ids (in map order) whose document satisfies `mode` over `elements`.
/// CCP captions use their parent document. An empty set selects nothing under
/// `any` and everything under `all`. Throws ValidationError for unknown elements.
std::vector<std::string> element_overlay(const MapDocument& map, const chemparse::DocumentElementMatrix& markers,
                                         const std::vector<std::string>& elements, OverlayMode mode);

// ---------------------------------------------------------------------------
// Axis profile

struct Anchor {
  std::string name;
  double x = 0.0;
  double y = 0.0;
};

struct AxisProfile {
  std::vector<Anchor> anchors;  // 4
  std::vector<std::string> labels;
  std::vector<std::array<double, 4>> distances;  // label x anchor
  std::vector<std::size_t> nearest;              // anchor index; lowest name wins ties
  std::vector<bool> boundary;                    // second-nearest within the tolerance
};

/// Optical top-left, Mechanical top-right, Microstructural bottom-left,
/// Thermodynamic bottom-right of the points' bounding box.
std::vector<Anchor> default_anchors(const MapDocument& map);

inline constexpr double kBoundaryTolerance = 0.05;

/// A label is a boundary label when its second-nearest anchor is within
/// (1 + tolerance) times the nearest distance. Throws ValidationError unless
/// there are 4 distinct anchors.
AxisProfile axis_profile(const std::vector<PlacedLabel>& labels, const std::vector<Anchor>& anchors,
                         double tolerance = kBoundaryTolerance);

}  // namespace litatlas::atlas
