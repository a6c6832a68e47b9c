#pragma once

// Boolean filter queries over documents: topic, element, phrase, and caption
// label predicates combined with AND, OR, NOT and parentheses.
//
//   expr := or
//   or   := and ("OR" and)*
//   and  := not ("AND" not)*
//   not  := "NOT" not | "(" expr ")" | term
//   term := "topic:"name | "element:"Symbol | "phrase:"quoted | "caption:"name | "*"
//
// Keywords are uppercase. A name is either a quoted string or a run of
// characters up to whitespace or a parenthesis. Quoted strings use `"` with
// `\"` and `\\` escapes.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/topics.hpp"

namespace litatlas::filter {

struct FilterExpr {
  enum class Kind { all, topic, element, phrase, caption, and_, or_, not_ };

  Kind kind = Kind::all;
  std::string value;                // term payload
  std::size_t position = 0;         // byte offset of the node in the source text
  std::vector<FilterExpr> children;  // and_/or_: two or more; not_: one

  static FilterExpr all();
  static FilterExpr term(Kind kind, std::string value);
  static FilterExpr and_of(std::vector<FilterExpr> children);
  static FilterExpr or_of(std::vector<FilterExpr> children);
  static FilterExpr not_of(FilterExpr child);

  bool is_term() const noexcept { return kind != Kind::and_ && kind != Kind::or_ && kind != Kind::not_; }

  /// Structural equality; positions are ignored.
  bool operator==(const FilterExpr& o) const;
};

/// Throws ParseError with the byte offset of the offending token.
FilterExpr parse_filter(std::string_view text);

/// Canonical text; parse_filter(to_string(e)) == e.
std::string to_string(const FilterExpr& expr);

struct QueryResult {
  std::vector<std::string> doc_ids;      // corpus order
  std::vector<std::string> caption_ids;  // corpus order

  bool operator==(const QueryResult&) const = default;
};

/// Caption labels that appear in `expr` outside any negation.
std::set<std::string> positive_caption_terms(const FilterExpr& expr);

/// Evaluates filters against loaded artifacts. Holds references: the artifacts
/// must outlive the engine.
class QueryEngine {
 public:
  /// Throws DimensionError when the model or markers do not cover every
  /// corpus document.
  QueryEngine(const corpus::Corpus& corpus, const topics::TopicModel& model,
              const chemparse::DocumentElementMatrix& markers, const atlas::CaptionLabels& labels);

  /// Throws ValidationError (with the term's position) for unknown topics,
  /// elements or caption labels.
  void validate(const FilterExpr& expr) const;

  /// Per-document match flags in corpus order. Validates first.
  std::vector<bool> match(const FilterExpr& expr) const;

  QueryResult run(const FilterExpr& expr) const;
  /// Parses, validates and runs.
  QueryResult run(std::string_view text) const;

  const corpus::Corpus& corpus() const noexcept { return corpus_; }

 private:
  std::vector<bool> eval(const FilterExpr& expr) const;

  const corpus::Corpus& corpus_;
  const topics::TopicModel& model_;
  const chemparse::DocumentElementMatrix& markers_;
  const atlas::CaptionLabels& labels_;
  std::vector<std::size_t> marker_row_;              // corpus index -> markers row
  std::vector<std::string> lower_abstract_;
  std::vector<std::set<std::string>> doc_labels_;    // caption labels per document
  std::unordered_map<std::string, std::optional<std::string>> caption_label_;
  std::set<std::string> known_labels_;
};

/// One-shot convenience over QueryEngine.
QueryResult query(const corpus::Corpus& corpus, const topics::TopicModel& model,
                  const chemparse::DocumentElementMatrix& markers, const atlas::CaptionLabels& labels,
                  const FilterExpr& expr);

}  // namespace litatlas::filter
