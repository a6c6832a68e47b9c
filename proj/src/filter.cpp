#include "litatlas/filter.hpp"

#include <algorithm>

#include "litatlas/error.hpp"

namespace litatlas::filter {

namespace {

using Kind = FilterExpr::Kind;

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool ends_bare(char c) { return is_space(c) || c == '(' || c == ')' || c == '"'; }

struct TermPrefix {
  std::string_view text;
  Kind kind;
};
constexpr TermPrefix kPrefixes[] = {
    {"topic:", Kind::topic}, {"element:", Kind::element}, {"phrase:", Kind::phrase}, {"caption:", Kind::caption}};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  FilterExpr parse() {
    skip_space();
    if (pos_ == s_.size()) throw ParseError("empty filter expression", pos_);
    auto e = parse_or();
    skip_space();
    if (pos_ != s_.size()) throw ParseError("unexpected input \"" + token_preview() + "\"", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  // Keyword followed by a delimiter (whitespace, parenthesis, or end).
  bool at_keyword(std::string_view kw) const {
    if (s_.substr(pos_, kw.size()) != kw) return false;
    const auto end = pos_ + kw.size();
    return end == s_.size() || is_space(s_[end]) || s_[end] == '(' || s_[end] == ')';
  }

  std::string token_preview() const {
    auto end = pos_;
    while (end < s_.size() && !is_space(s_[end]) && end - pos_ < 24) ++end;
    return std::string(s_.substr(pos_, std::max<std::size_t>(end - pos_, 1)));
  }

  FilterExpr parse_or() {
    const auto start = pos_;
    std::vector<FilterExpr> parts;
    parts.push_back(parse_and());
    for (skip_space(); at_keyword("OR"); skip_space()) {
      pos_ += 2;
      parts.push_back(parse_and());
    }
    if (parts.size() == 1) return std::move(parts[0]);
    auto e = FilterExpr::or_of(std::move(parts));
    e.position = start;
    return e;
  }

  FilterExpr parse_and() {
    skip_space();
    const auto start = pos_;
    std::vector<FilterExpr> parts;
    parts.push_back(parse_not());
    for (skip_space(); at_keyword("AND"); skip_space()) {
      pos_ += 3;
      parts.push_back(parse_not());
    }
    if (parts.size() == 1) return std::move(parts[0]);
    auto e = FilterExpr::and_of(std::move(parts));
    e.position = start;
    return e;
  }

  FilterExpr parse_not() {
    skip_space();
    const auto start = pos_;
    if (pos_ == s_.size()) throw ParseError("expected a term", pos_);
    if (at_keyword("NOT")) {
      pos_ += 3;
      auto e = FilterExpr::not_of(parse_not());
      e.position = start;
      return e;
    }
    if (s_[pos_] == '(') {
      ++pos_;
      skip_space();
      if (pos_ < s_.size() && s_[pos_] == ')') throw ParseError("empty parentheses", pos_);
      auto e = parse_or();
      skip_space();
      if (pos_ == s_.size() || s_[pos_] != ')') throw ParseError("expected ')'", pos_);
      ++pos_;
      return e;
    }
    return parse_term();
  }

  FilterExpr parse_term() {
    const auto start = pos_;
    if (s_[pos_] == '*') {
      ++pos_;
      if (pos_ < s_.size() && !ends_bare(s_[pos_])) throw ParseError("unexpected input after '*'", pos_);
      auto e = FilterExpr::all();
      e.position = start;
      return e;
    }
    for (const auto& p : kPrefixes) {
      if (s_.substr(pos_, p.text.size()) != p.text) continue;
      pos_ += p.text.size();
      std::string value;
      if (pos_ < s_.size() && s_[pos_] == '"') {
        value = parse_quoted();
      } else if (p.kind == Kind::phrase) {
        throw ParseError("phrase needs a quoted string", pos_);
      } else {
        const auto b = pos_;
        while (pos_ < s_.size() && !ends_bare(s_[pos_])) ++pos_;
        if (pos_ == b) throw ParseError("expected a name after \"" + std::string(p.text) + "\"", pos_);
        value = std::string(s_.substr(b, pos_ - b));
      }
      auto e = FilterExpr::term(p.kind, std::move(value));
      e.position = start;
      return e;
    }
    if (s_[pos_] == ')') throw ParseError("unexpected ')'", pos_);
    throw ParseError("expected a term (topic:, element:, phrase:, caption:, *, NOT or '('), got \"" +
                         token_preview() + "\"",
                     pos_);
  }

  std::string parse_quoted() {
    const auto open = pos_++;
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos_ == s_.size()) break;
        const char n = s_[pos_++];
        if (n != '"' && n != '\\') throw ParseError("invalid escape in quoted string", pos_ - 2);
        out += n;
      } else {
        out += c;
      }
    }
    throw ParseError("unterminated quoted string", open);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string quote(std::string_view v) {
  std::string out = "\"";
  for (const char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

bool needs_quotes(std::string_view v) {
  if (v.empty()) return true;
  return std::any_of(v.begin(), v.end(), ends_bare) || v.find('\\') != std::string_view::npos;
}

std::string_view prefix_of(Kind k) {
  for (const auto& p : kPrefixes)
    if (p.kind == k) return p.text;
  return {};
}

void collect_positive(const FilterExpr& e, bool negated, std::set<std::string>& out) {
  if (e.kind == Kind::caption && !negated) out.insert(e.value);
  for (const auto& c : e.children) collect_positive(c, negated != (e.kind == Kind::not_), out);
}

}  // namespace

FilterExpr FilterExpr::all() { return FilterExpr{}; }

FilterExpr FilterExpr::term(Kind kind, std::string value) {
  FilterExpr e;
  e.kind = kind;
  e.value = std::move(value);
  return e;
}

FilterExpr FilterExpr::and_of(std::vector<FilterExpr> children) {
  if (children.size() < 2) throw ValidationError("AND needs at least two operands");
  FilterExpr e;
  e.kind = Kind::and_;
  e.children = std::move(children);
  return e;
}

FilterExpr FilterExpr::or_of(std::vector<FilterExpr> children) {
  if (children.size() < 2) throw ValidationError("OR needs at least two operands");
  FilterExpr e;
  e.kind = Kind::or_;
  e.children = std::move(children);
  return e;
}

FilterExpr FilterExpr::not_of(FilterExpr child) {
  FilterExpr e;
  e.kind = Kind::not_;
  e.children.push_back(std::move(child));
  return e;
}

bool FilterExpr::operator==(const FilterExpr& o) const {
  return kind == o.kind && value == o.value && children == o.children;
}

FilterExpr parse_filter(std::string_view text) { return Parser(text).parse(); }

std::string to_string(const FilterExpr& e) {
  switch (e.kind) {
    case Kind::all:
      return "*";
    case Kind::phrase:
      return "phrase:" + quote(e.value);
    case Kind::topic:
    case Kind::element:
    case Kind::caption:
      return std::string(prefix_of(e.kind)) + (needs_quotes(e.value) ? quote(e.value) : e.value);
    case Kind::not_: {
      const auto& c = e.children.at(0);
      const bool wrap = c.kind == Kind::and_ || c.kind == Kind::or_;
      return "NOT " + (wrap ? "(" + to_string(c) + ")" : to_string(c));
    }
    case Kind::and_:
    case Kind::or_: {
      // Any nested binary node is parenthesized so the parse tree shape survives.
      std::string out;
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += e.kind == Kind::and_ ? " AND " : " OR ";
        const auto& c = e.children[i];
        const bool wrap = c.kind == Kind::and_ || c.kind == Kind::or_;
        out += wrap ? "(" + to_string(c) + ")" : to_string(c);
      }
      return out;
    }
  }
  return {};
}

std::set<std::string> positive_caption_terms(const FilterExpr& expr) {
  std::set<std::string> out;
  collect_positive(expr, false, out);
  return out;
}

// ---------------------------------------------------------------------------

QueryEngine::QueryEngine(const corpus::Corpus& corpus, const topics::TopicModel& model,
                         const chemparse::DocumentElementMatrix& markers, const atlas::CaptionLabels& labels)
    : corpus_(corpus), model_(model), markers_(markers), labels_(labels) {
  if (model.num_docs() != corpus.size())
    throw DimensionError("topic model covers " + std::to_string(model.num_docs()) + " documents, corpus has " +
                         std::to_string(corpus.size()));
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < markers.doc_ids.size(); ++i) row_of.emplace(markers.doc_ids[i], i);
  for (std::size_t i = 0; i < labels.caption_ids.size(); ++i)
    caption_label_.emplace(labels.caption_ids[i], labels.labels[i]);
  known_labels_.insert(labels.rule_labels.begin(), labels.rule_labels.end());
  for (const auto& l : labels.labels)
    if (l) known_labels_.insert(*l);

  for (const auto& d : corpus.documents()) {
    const auto it = row_of.find(d.doc_id);
    if (it == row_of.end()) throw DimensionError("no element markers for document " + d.doc_id);
    marker_row_.push_back(it->second);
    lower_abstract_.push_back(ascii_lower(d.abstract));
    std::set<std::string> doc_labels;
    for (const auto& c : d.captions) {
      const auto cl = caption_label_.find(c.caption_id);
      if (cl == caption_label_.end()) throw DimensionError("caption " + c.caption_id + " has no label entry");
      if (cl->second) doc_labels.insert(*cl->second);
    }
    doc_labels_.push_back(std::move(doc_labels));
  }
}

void QueryEngine::validate(const FilterExpr& e) const {
  switch (e.kind) {
    case Kind::topic:
      if (!model_.find_topic(e.value))
        throw ValidationError("unknown topic \"" + e.value + "\"", e.position);
      break;
    case Kind::element:
      if (std::find(markers_.elements.begin(), markers_.elements.end(), e.value) == markers_.elements.end())
        throw ValidationError("unknown element \"" + e.value + "\"", e.position);
      break;
    case Kind::caption:
      if (!known_labels_.count(e.value))
        throw ValidationError("unknown caption label \"" + e.value + "\"", e.position);
      break;
    default:
      break;
  }
  for (const auto& c : e.children) validate(c);
}

std::vector<bool> QueryEngine::eval(const FilterExpr& e) const {
  const auto n = corpus_.size();
  std::vector<bool> out(n, false);
  switch (e.kind) {
    case Kind::all:
      out.assign(n, true);
      break;
    case Kind::topic: {
      const auto k = *model_.find_topic(e.value);
      for (std::size_t d = 0; d < n; ++d) out[d] = topics::assign_topic(model_, d) == k;
      break;
    }
    case Kind::element: {
      const auto col = markers_.column(e.value);
      for (std::size_t d = 0; d < n; ++d) out[d] = markers_.rows[marker_row_[d]][col] != 0;
      break;
    }
    case Kind::phrase: {
      const auto needle = ascii_lower(e.value);
      for (std::size_t d = 0; d < n; ++d) out[d] = lower_abstract_[d].find(needle) != std::string::npos;
      break;
    }
    case Kind::caption:
      for (std::size_t d = 0; d < n; ++d) out[d] = doc_labels_[d].count(e.value) > 0;
      break;
    case Kind::not_:
      out = eval(e.children.at(0));
      out.flip();
      break;
    case Kind::and_:
      out.assign(n, true);
      for (const auto& c : e.children) {
        const auto r = eval(c);
        for (std::size_t d = 0; d < n; ++d) out[d] = out[d] && r[d];
      }
      break;
    case Kind::or_:
      for (const auto& c : e.children) {
        const auto r = eval(c);
        for (std::size_t d = 0; d < n; ++d) out[d] = out[d] || r[d];
      }
      break;
  }
  return out;
}

std::vector<bool> QueryEngine::match(const FilterExpr& expr) const {
  validate(expr);
  return eval(expr);
}

QueryResult QueryEngine::run(const FilterExpr& expr) const {
  const auto hits = match(expr);
  const auto wanted = positive_caption_terms(expr);
  QueryResult r;
  for (std::size_t d = 0; d < corpus_.size(); ++d) {
    if (!hits[d]) continue;
    const auto& doc = corpus_[d];
    r.doc_ids.push_back(doc.doc_id);
    for (const auto& c : doc.captions) {
      if (!wanted.empty()) {
        const auto& label = caption_label_.at(c.caption_id);
        if (!label || !wanted.count(*label)) continue;
      }
      r.caption_ids.push_back(c.caption_id);
    }
  }
  return r;
}

QueryResult QueryEngine::run(std::string_view text) const { return run(parse_filter(text)); }

QueryResult query(const corpus::Corpus& corpus, const topics::TopicModel& model,
                  const chemparse::DocumentElementMatrix& markers, const atlas::CaptionLabels& labels,
                  const FilterExpr& expr) {
  return QueryEngine(corpus, model, markers, labels).run(expr);
}

}  // namespace litatlas::filter
