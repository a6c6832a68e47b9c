#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "embedded_data.hpp"
#include "json.hpp"
#include "litatlas/atlas.hpp"
#include "litatlas/error.hpp"
#include "litatlas/hashing.hpp"

namespace litatlas::atlas {

namespace {

bool word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         static_cast<unsigned char>(c) >= 0x80;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::optional<long> as_integer(std::string_view s) {
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// Numeric strings first in numeric order, then the rest lexicographically.
bool group_less(const std::string& a, const std::string& b) {
  const auto ia = as_integer(a), ib = as_integer(b);
  if (ia && ib) return *ia < *ib;
  if (ia != ib && (ia || ib)) return ia.has_value();
  return a < b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << data << '\n';
  if (!out) throw IoError(path.string(), "write failure");
}

std::string coords_digest(const std::vector<std::string>& ids, const std::vector<embed::Point>& coords) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i)
    s += csv::field(ids[i]) + ',' + csv::format_double(coords[i][0]) + ',' + csv::format_double(coords[i][1]) + '\n';
  return sha256_hex(s);
}

}  // namespace

// ---------------------------------------------------------------------------

bool pattern_matches(std::string_view text, std::string_view pattern) {
  bool left_open = false, right_open = false;
  if (!pattern.empty() && pattern.front() == '*') left_open = true, pattern.remove_prefix(1);
  if (!pattern.empty() && pattern.back() == '*') right_open = true, pattern.remove_suffix(1);
  if (pattern.empty()) return false;
  const auto hay = lower(text);
  const auto needle = lower(pattern);
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    const bool left_ok = left_open || pos == 0 || !word_char(hay[pos - 1]);
    const auto end = pos + needle.size();
    const bool right_ok = right_open || end == hay.size() || !word_char(hay[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::vector<LabelRule> sort_rules(std::vector<LabelRule> rules) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& r : rules) {
    if (r.label.empty()) throw ValidationError("rule label is empty");
    if (r.patterns.empty()) throw ValidationError("rule \"" + r.label + "\" has no patterns");
    if (!seen.emplace(r.label, r.priority).second)
      throw ValidationError("rule \"" + r.label + "\" repeats priority " + std::to_string(r.priority));
  }
  std::stable_sort(rules.begin(), rules.end(), [](const LabelRule& a, const LabelRule& b) {
    return a.priority != b.priority ? a.priority > b.priority : a.label < b.label;
  });
  return rules;
}

std::vector<LabelRule> parse_rules(std::string_view json_text) {
  std::vector<LabelRule> rules;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_array()) throw SchemaError("rule file must be a JSON list");
    for (const auto& r : j) {
      LabelRule rule;
      rule.label = r.at("label").get<std::string>();
      rule.priority = r.at("priority").get<int>();
      rule.patterns = r.at("patterns").get<std::vector<std::string>>();
      rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("rules: ") + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("rules: ") + e.what());
  }
  return sort_rules(std::move(rules));
}

std::vector<LabelRule> load_rules(const std::filesystem::path& path) {
  try {
    return parse_rules(read_file(path));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

const std::vector<LabelRule>& bundled_rules() {
  static const auto rules = parse_rules(embedded::rules());
  return rules;
}

std::optional<std::string> label_caption(std::string_view text, const std::vector<LabelRule>& rules) {
  for (const auto& r : rules)
    for (const auto& p : r.patterns)
      if (pattern_matches(text, p)) return r.label;
  return std::nullopt;
}

std::optional<std::string> label_caption(const corpus::Caption& caption, const std::vector<LabelRule>& rules) {
  return label_caption(caption.text, rules);
}

std::optional<std::string> CaptionLabels::label_of(std::string_view caption_id) const {
  for (std::size_t i = 0; i < caption_ids.size(); ++i)
    if (caption_ids[i] == caption_id) return labels[i];
  return std::nullopt;
}

CaptionLabels label_captions(const corpus::Corpus& corpus, const std::vector<LabelRule>& rules) {
  CaptionLabels out;
  std::set<std::string> names;
  for (const auto& r : rules) names.insert(r.label);
  out.rule_labels.assign(names.begin(), names.end());
  out.rules = rules;
  for (const auto& d : corpus.documents())
    for (const auto& c : d.captions) {
      out.caption_ids.push_back(c.caption_id);
      out.labels.push_back(label_caption(c, rules));
    }
  return out;
}

std::string caption_labels_to_json(const CaptionLabels& l) {
  nlohmann::ordered_json j;
  j["rule_labels"] = l.rule_labels;
  auto& rules = j["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : l.rules) rules.push_back({{"label", r.label}, {"priority", r.priority}, {"patterns", r.patterns}});
  auto& arr = j["captions"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < l.caption_ids.size(); ++i) {
    nlohmann::ordered_json e;
    e["caption_id"] = l.caption_ids[i];
    e["label"] = l.labels[i] ? nlohmann::ordered_json(*l.labels[i]) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(e));
  }
  return j.dump();
}

CaptionLabels caption_labels_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CaptionLabels l;
    l.rule_labels = j.at("rule_labels").get<std::vector<std::string>>();
    if (const auto it = j.find("rules"); it != j.end())
      for (const auto& r : *it)
        l.rules.push_back({r.at("label").get<std::string>(), r.at("patterns").get<std::vector<std::string>>(),
                           r.at("priority").get<int>()});
    for (const auto& e : j.at("captions")) {
      l.caption_ids.push_back(e.at("caption_id").get<std::string>());
      const auto& lab = e.at("label");
      l.labels.push_back(lab.is_null() ? std::nullopt : std::optional<std::string>(lab.get<std::string>()));
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("caption labels: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(MapType t) { return t == MapType::lda ? "lda" : "ccp"; }

MapType map_type_from_string(std::string_view s) {
  if (s == "lda") return MapType::lda;
  if (s == "ccp") return MapType::ccp;
  throw ValidationError("map type must be lda or ccp, got \"" + std::string(s) + "\"");
}

double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty set");
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<long>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower_v = *std::max_element(v.begin(), mid);
  return 0.5 * (lower_v + upper);
}

std::vector<PlacedLabel> place_labels(const std::vector<MapPoint>& points,
                                      const std::map<std::string, std::string>& text_of) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& p : points) {
    if (!p.group) continue;
    auto& g = groups[*p.group];
    g.first.push_back(p.x);
    g.second.push_back(p.y);
  }
  std::vector<std::string> keys;
  for (const auto& [k, v] : groups) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), group_less);
  std::vector<PlacedLabel> out;
  for (const auto& k : keys) {
    auto& [xs, ys] = groups[k];
    const auto it = text_of.find(k);
    out.push_back({it == text_of.end() ? k : it->second, median(xs), median(ys), xs.size()});
  }
  return out;
}

MapDocument build_lda_map(const std::vector<std::string>& doc_ids, const std::vector<embed::Point>& coords,
                          const topics::TopicModel& model) {
  if (coords.size() != doc_ids.size() || model.num_docs() != doc_ids.size())
    throw DimensionError("LDA map inputs do not align: " + std::to_string(doc_ids.size()) + " ids, " +
                         std::to_string(coords.size()) + " points, " + std::to_string(model.num_docs()) +
                         " model rows");
  MapDocument m;
  m.map_type = MapType::lda;
  std::map<std::string, std::string> names;
  for (std::size_t k = 0; k < model.K; ++k) names[std::to_string(k)] = model.topic_name(k);
  for (std::size_t i = 0; i < doc_ids.size(); ++i)
    m.points.push_back({doc_ids[i], coords[i][0], coords[i][1], std::to_string(topics::assign_topic(model, i))});
  m.labels = place_labels(m.points, names);
  m.provenance["embedding"] = coords_digest(doc_ids, coords);
  m.provenance["model"] = sha256_hex(topics::model_to_json(model));
  return m;
}

MapDocument build_ccp_map(const std::vector<std::string>& caption_ids, const std::vector<embed::Point>& coords,
                          const CaptionLabels& labels) {
  if (coords.size() != caption_ids.size())
    throw DimensionError("CCP map inputs do not align: " + std::to_string(caption_ids.size()) + " ids, " +
                         std::to_string(coords.size()) + " points");
  std::unordered_map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < labels.caption_ids.size(); ++i) label_index.emplace(labels.caption_ids[i], i);
  MapDocument m;
  m.map_type = MapType::ccp;
  for (std::size_t i = 0; i < caption_ids.size(); ++i) {
    const auto it = label_index.find(caption_ids[i]);
    if (it == label_index.end()) throw DimensionError("caption " + caption_ids[i] + " has no label entry");
    m.points.push_back({caption_ids[i], coords[i][0], coords[i][1], labels.labels[it->second]});
  }
  m.labels = place_labels(m.points);
  m.provenance["embedding"] = coords_digest(caption_ids, coords);
  m.provenance["labels"] = sha256_hex(caption_labels_to_json(labels));
  return m;
}

std::string map_to_json(const MapDocument& m) {
  nlohmann::ordered_json j;
  j["map_type"] = to_string(m.map_type);
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : m.points) {
    nlohmann::ordered_json e;
    e["id"] = p.id;
    e["x"] = p.x;
    e["y"] = p.y;
    e["group"] = p.group ? nlohmann::ordered_json(*p.group) : nlohmann::ordered_json(nullptr);
    pts.push_back(std::move(e));
  }
  auto& labs = j["labels"] = nlohmann::ordered_json::array();
  for (const auto& l : m.labels) labs.push_back({{"text", l.text}, {"x", l.x}, {"y", l.y}, {"count", l.count}});
  j["provenance"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.provenance) j["provenance"][k] = v;
  return j.dump();
}

MapDocument map_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MapDocument m;
    m.map_type = map_type_from_string(j.at("map_type").get<std::string>());
    std::set<std::string> ids;
    for (const auto& e : j.at("points")) {
      MapPoint p;
      p.id = e.at("id").get<std::string>();
      p.x = e.at("x").get<double>();
      p.y = e.at("y").get<double>();
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw SchemaError("point " + p.id + " is not finite");
      if (const auto& g = e.at("group"); !g.is_null()) p.group = g.get<std::string>();
      if (!ids.insert(p.id).second) throw SchemaError("duplicate point id " + p.id);
      m.points.push_back(std::move(p));
    }
    for (const auto& e : j.at("labels"))
      m.labels.push_back({e.at("text").get<std::string>(), e.at("x").get<double>(), e.at("y").get<double>(),
                          e.at("count").get<std::size_t>()});
    if (const auto it = j.find("provenance"); it != j.end())
      for (const auto& [k, v] : it->items()) m.provenance[k] = v.get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("map: ") + e.what());
  }
}

void export_map(const MapDocument& map, const std::filesystem::path& path) { write_file(path, map_to_json(map)); }

MapDocument import_map(const std::filesystem::path& path) {
  try {
    return map_from_json(read_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

OverlayMode overlay_mode_from_string(std::string_view s) {
  if (s == "any") return OverlayMode::any;
  if (s == "all") return OverlayMode::all;
  throw ValidationError("overlay mode must be any or all, got \"" + std::string(s) + "\"");
}

std::vector<std::string> element_overlay(const MapDocument& map, const chemparse::DocumentElementMatrix& markers,
                                         const std::vector<std::string>& elements, OverlayMode mode) {
  std::vector<std::size_t> cols;
  for (const auto& e : elements) cols.push_back(markers.column(e));
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < markers.doc_ids.size(); ++i) row_of.emplace(markers.doc_ids[i], i);
  std::vector<std::string> out;
  for (const auto& p : map.points) {
    const auto doc = map.map_type == MapType::ccp ? corpus::caption_parent(p.id) : p.id;
    const auto it = row_of.find(doc);
    if (it == row_of.end()) throw ValidationError("no element markers for document " + doc);
    const auto& row = markers.rows[it->second];
    const bool hit = mode == OverlayMode::any
                         ? std::any_of(cols.begin(), cols.end(), [&](std::size_t c) { return row[c] != 0; })
                         : std::all_of(cols.begin(), cols.end(), [&](std::size_t c) { return row[c] != 0; });
    if (hit) out.push_back(p.id);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Anchor> default_anchors(const MapDocument& map) {
  if (map.points.empty()) throw ValidationError("cannot place axis anchors on an empty map");
  double x0 = map.points[0].x, x1 = x0, y0 = map.points[0].y, y1 = y0;
  for (const auto& p : map.points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return {{"Optical", x0, y1}, {"Mechanical", x1, y1}, {"Microstructural", x0, y0}, {"Thermodynamic", x1, y0}};
}

AxisProfile axis_profile(const std::vector<PlacedLabel>& labels, const std::vector<Anchor>& anchors, double tolerance) {
  if (anchors.size() != 4) throw ValidationError("axis profile needs exactly 4 anchors");
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      if (anchors[a].x == anchors[b].x && anchors[a].y == anchors[b].y)
        throw ValidationError("anchors " + anchors[a].name + " and " + anchors[b].name + " coincide");
      if (anchors[a].name == anchors[b].name) throw ValidationError("anchor names must be distinct");
    }
  AxisProfile prof;
  prof.anchors = anchors;
  for (const auto& l : labels) {
    std::array<double, 4> d{};
    for (std::size_t a = 0; a < 4; ++a) d[a] = std::hypot(l.x - anchors[a].x, l.y - anchors[a].y);
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return d[a] != d[b] ? d[a] < d[b] : anchors[a].name < anchors[b].name;
    });
    prof.labels.push_back(l.text);
    prof.distances.push_back(d);
    prof.nearest.push_back(order[0]);
    prof.boundary.push_back(d[order[1]] <= (1.0 + tolerance) * d[order[0]]);
  }
  return prof;
}

}  // namespace litatlas::atlas
