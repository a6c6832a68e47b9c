#pragma once

// Chemical species in text: formulas, element symbols and names, and
// compound names from a lexicon, reduced to per-document element markers.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "litatlas/corpus.hpp"
#include "litatlas/error.hpp"

namespace litatlas::chemparse {

/// Exact nonnegative rational with an int64 numerator and denominator.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  bool is_integer() const noexcept { return den_ == 1; }
  double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Throws ValidationError on int64 overflow.
  Rational operator+(const Rational& o) const;
  Rational operator*(const Rational& o) const;

  bool operator==(const Rational&) const = default;
  std::strong_ordering operator<=>(const Rational& o) const;

  /// Exact decimal text ("2", "0.25"). Throws ValidationError when the
  /// denominator has a prime factor other than 2 or 5.
  std::string to_decimal() const;
  /// Parses "12" or "0.125".
  static Rational parse_decimal(std::string_view digits);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Element symbol -> positive count.
class ElementBag {
 public:
  using Map = std::map<std::string, Rational>;

  void add(const std::string& symbol, const Rational& count);
  void merge(const ElementBag& other);
  ElementBag scaled(const Rational& factor) const;

  const Map& counts() const noexcept { return counts_; }
  bool empty() const noexcept { return counts_.empty(); }
  std::size_t size() const noexcept { return counts_.size(); }
  bool contains(std::string_view symbol) const { return counts_.count(std::string(symbol)) > 0; }
  std::vector<std::string> symbols() const;

  bool operator==(const ElementBag&) const = default;

 private:
  Map counts_;
};

/// The periodic table: 118 IUPAC symbols and English names, plus extensions.
class ElementTable {
 public:
  static const ElementTable& standard();

  bool is_symbol(std::string_view s) const { return index_.count(std::string(s)) > 0; }
  /// Symbol for a lowercase element name, including common alternate spellings.
  std::optional<std::string> symbol_for_name(std::string_view lower_name) const;
  /// Symbols in atomic-number order, extensions last.
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& name_of(std::string_view symbol) const;

  /// Adds a placeholder element. Throws ValidationError for a malformed or duplicate symbol.
  void add(const std::string& symbol, const std::string& name);

 private:
  std::vector<std::string> symbols_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::string> by_name_;
};

/// Parses a formula. Grammar:
///   Formula := Part (Sep Part)*          Sep := - – · • ⋅
///   Part    := [Coefficient] Group+
///   Group   := Element [Count] | "(" Group+ ")" [Count] | "[" Group+ "]" [Count]
/// Counts are integers or decimals; Unicode subscript digits are accepted.
/// Charges (3+, 2−, ⁺, trailing "-") and roman oxidation states "(III)" are
/// recognized and dropped. Throws ParseError.
ElementBag parse_formula(std::string_view s, const ElementTable& table = ElementTable::standard());

/// Hill-order formula with exact decimal counts; parse_formula(render_formula(b)) == b.
std::string render_formula(const ElementBag& bag);

class NotASpeciesError : public Error {
 public:
  using Error::Error;
};

/// Name -> formula table. Lookups are case-insensitive; an entry mapping to ""
/// marks a word that is never a species.
class Lexicon {
 public:
  Lexicon();
  static Lexicon from_json(std::string_view text);
  static Lexicon load(const std::filesystem::path& path);
  /// The shipped default.
  static const Lexicon& bundled();

  struct Entry {
    std::optional<ElementBag> bag;  // nullopt: not a species
  };
  /// Entry for a lowercase, single-spaced name.
  const Entry* find(std::string_view lower_name) const;
  const ElementTable& elements() const noexcept { return elements_; }
  /// Longest entry, in words.
  std::size_t max_words() const noexcept { return max_words_; }

 private:
  ElementTable elements_;
  std::unordered_map<std::string, Entry> entries_;
  std::size_t max_words_ = 1;
};

/// Lexicon name, element name, or formula. Throws NotASpeciesError.
ElementBag normalize_species(std::string_view name, const Lexicon& lexicon = Lexicon::bundled());

enum class SpeciesKind { formula, element_symbol, compound_name };
std::string_view to_string(SpeciesKind k);

struct ChemicalSpecies {
  std::string surface_form;
  SpeciesKind kind = SpeciesKind::formula;
  ElementBag elements;
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;

  bool operator==(const ChemicalSpecies&) const = default;
};

/// Symbols that double as English words, units, or labels; accepted only next
/// to another species or inside formula context.
bool is_ambiguous_symbol(std::string_view symbol);

/// Non-overlapping species sorted by position; multi-word lexicon names are
/// matched longest-first.
std::vector<ChemicalSpecies> extract_species(std::string_view text, const Lexicon& lexicon = Lexicon::bundled());

/// Binary element markers, one row per document.
struct DocumentElementMatrix {
  std::vector<std::string> doc_ids;
  std::vector<std::string> elements;          // column order
  std::vector<std::vector<std::uint8_t>> rows;

  std::size_t column(std::string_view symbol) const;  // throws ValidationError if unknown
  bool has(std::size_t row, std::string_view symbol) const { return rows[row][column(symbol)] != 0; }
  bool operator==(const DocumentElementMatrix&) const = default;
};

/// marker[d][X] = 1 iff X occurs in a species of document d. With
/// min_species_docs > 1, species (by canonical formula) found in fewer
/// documents are ignored.
DocumentElementMatrix element_markers(const corpus::Corpus& corpus,
                                      const std::vector<std::vector<ChemicalSpecies>>& species,
                                      const ElementTable& table = ElementTable::standard(),
                                      std::size_t min_species_docs = 1);

/// Species of each document's abstract.
std::vector<std::vector<ChemicalSpecies>> extract_corpus_species(const corpus::Corpus& corpus,
                                                                 const Lexicon& lexicon = Lexicon::bundled());

/// CSV: header "doc_id,<symbols...>", then 0/1 rows.
void write_markers_csv(const DocumentElementMatrix& m, const std::filesystem::path& path);
DocumentElementMatrix read_markers_csv(const std::filesystem::path& path);

}  // namespace litatlas::chemparse
