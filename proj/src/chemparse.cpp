#include "litatlas/chemparse.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <span>
#include <unordered_map>
#include <sstream>

#include "csv.hpp"
#include "embedded_data.hpp"
#include "json.hpp"

namespace litatlas::chemparse {

namespace {

// ---------------------------------------------------------------------------
// Formula lexer

enum class Tok { element, number, open, close, sep, plus, minus, super };

struct Token {
  Tok kind;
  std::string text;  // symbol, ASCII digits, or the bracket character
  std::size_t pos;
  bool ascii_hyphen = false;  // for sep
};

struct Utf8Map {
  std::string_view bytes;
  char ascii;  // normalized digit, or 0
  Tok kind;
};

// Multibyte sequences the lexer understands.
constexpr std::array<Utf8Map, 28> kMultibyte = {{
    {"₀", '0', Tok::number}, {"₁", '1', Tok::number}, {"₂", '2', Tok::number},
    {"₃", '3', Tok::number}, {"₄", '4', Tok::number}, {"₅", '5', Tok::number},
    {"₆", '6', Tok::number}, {"₇", '7', Tok::number}, {"₈", '8', Tok::number},
    {"₉", '9', Tok::number}, {"–", 0, Tok::sep},      {"·", 0, Tok::sep},
    {"•", 0, Tok::sep},      {"⋅", 0, Tok::sep},      {"−", 0, Tok::minus},
    {"⁰", 0, Tok::super},    {"¹", 0, Tok::super},    {"²", 0, Tok::super},
    {"³", 0, Tok::super},    {"⁴", 0, Tok::super},    {"⁵", 0, Tok::super},
    {"⁶", 0, Tok::super},    {"⁷", 0, Tok::super},    {"⁸", 0, Tok::super},
    {"⁹", 0, Tok::super},    {"⁺", 0, Tok::super},    {"⁻", 0, Tok::super},
    {"×", 0, Tok::sep},
}};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// "(III)" style oxidation state starting at s[i] == '('; returns its length or 0.
std::size_t roman_group_length(std::string_view s, std::size_t i) {
  std::size_t j = i + 1;
  while (j < s.size() && (s[j] == 'I' || s[j] == 'V' || s[j] == 'X')) ++j;
  if (j == i + 1 || j >= s.size() || s[j] != ')') return 0;
  return j - i + 1;
}

std::vector<Token> lex(std::string_view s, const ElementTable& table) {
  std::vector<Token> out;
  std::vector<std::size_t> spaces;  // index into `out` before which whitespace occurred
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (is_space(c)) {
      spaces.push_back(out.size());
      while (i < s.size() && is_space(s[i])) ++i;
      continue;
    }
    if (is_upper(c)) {
      std::size_t j = i + 1;
      while (j < s.size() && is_lower(s[j]) && j - i < 3) ++j;
      const std::string sym(s.substr(i, j - i));
      if (!table.is_symbol(sym)) throw ParseError("unknown element symbol \"" + sym + "\"", i);
      out.push_back({Tok::element, sym, i});
      i = j;
      continue;
    }
    if (is_digit(c) || c == '.') {
      std::string digits;
      const std::size_t start = i;
      while (i < s.size()) {
        if (is_digit(s[i]) || s[i] == '.') {
          digits += s[i++];
          continue;
        }
        bool matched = false;
        for (const auto& m : kMultibyte)
          if (m.kind == Tok::number && s.substr(i, m.bytes.size()) == m.bytes) {
            digits += m.ascii;
            i += m.bytes.size();
            matched = true;
            break;
          }
        if (!matched) break;
      }
      out.push_back({Tok::number, digits, start});
      continue;
    }
    if (c == '(' || c == '[') {
      if (c == '(') {
        if (const auto n = roman_group_length(s, i)) {
          i += n;
          continue;
        }
      }
      out.push_back({Tok::open, std::string(1, c), i});
      ++i;
      continue;
    }
    if (c == ')' || c == ']') {
      out.push_back({Tok::close, std::string(1, c), i});
      ++i;
      continue;
    }
    if (c == '-') {
      out.push_back({Tok::sep, "-", i, true});
      ++i;
      continue;
    }
    if (c == '+') {
      out.push_back({Tok::plus, "+", i});
      ++i;
      continue;
    }
    bool matched = false;
    for (const auto& m : kMultibyte) {
      if (s.substr(i, m.bytes.size()) != m.bytes) continue;
      if (m.kind == Tok::number) {
        // Subscript digits run together with ASCII digits above; a leading one starts a number.
        std::string digits(1, m.ascii);
        const std::size_t start = i;
        i += m.bytes.size();
        while (i < s.size()) {
          bool more = false;
          if (is_digit(s[i]) || s[i] == '.') {
            digits += s[i++];
            more = true;
          } else {
            for (const auto& n : kMultibyte)
              if (n.kind == Tok::number && s.substr(i, n.bytes.size()) == n.bytes) {
                digits += n.ascii;
                i += n.bytes.size();
                more = true;
                break;
              }
          }
          if (!more) break;
        }
        out.push_back({Tok::number, digits, start});
      } else {
        out.push_back({m.kind, std::string(m.bytes), i});
        i += m.bytes.size();
      }
      matched = true;
      break;
    }
    if (!matched) throw ParseError("unexpected character in formula", i);
  }
  for (auto idx : spaces) {
    const bool before_sep = idx < out.size() && out[idx].kind == Tok::sep;
    const bool after_sep = idx > 0 && out[idx - 1].kind == Tok::sep;
    if (!before_sep && !after_sep)
      throw ParseError("whitespace inside a formula", idx < out.size() ? out[idx].pos : s.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Formula parser

constexpr int kMaxNesting = 32;

class FormulaParser {
 public:
  FormulaParser(std::vector<Token> toks, std::size_t length) : t_(std::move(toks)), length_(length) {}

  ElementBag parse() {
    if (t_.empty()) throw ParseError("empty formula", 0);
    ElementBag bag = part();
    while (at(Tok::sep)) {
      ++p_;
      if (p_ == t_.size()) throw ParseError("formula ends with a separator", length_);
      bag.merge(part());
    }
    if (p_ != t_.size()) throw ParseError("unexpected token \"" + t_[p_].text + "\"", t_[p_].pos);
    return bag;
  }

 private:
  bool at(Tok k) const { return p_ < t_.size() && t_[p_].kind == k; }
  std::size_t pos() const { return p_ < t_.size() ? t_[p_].pos : length_; }

  Rational number(const Token& tok) {
    try {
      const auto r = Rational::parse_decimal(tok.text);
      if (r == Rational(0)) throw ParseError("count must be positive", tok.pos);
      return r;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), tok.pos);
    }
  }

  // True when the tokens from p_ form a charge: sign, sign after digits,
  // superscripts, or an ASCII hyphen closing the whole formula.
  bool charge_follows(std::size_t q) const {
    if (q >= t_.size()) return false;
    const auto k = t_[q].kind;
    if (k == Tok::plus || k == Tok::minus || k == Tok::super) return true;
    return k == Tok::sep && t_[q].ascii_hyphen && q + 1 == t_.size();
  }

  void consume_charge() {
    while (p_ < t_.size() && (at(Tok::plus) || at(Tok::minus) || at(Tok::super) ||
                              (at(Tok::sep) && t_[p_].ascii_hyphen && p_ + 1 == t_.size())))
      ++p_;
    charged_ = true;
  }

  ElementBag part() {
    charged_ = false;
    Rational coefficient(1);
    if (at(Tok::number)) coefficient = number(t_[p_++]);
    ElementBag bag;
    if (!at(Tok::element) && !at(Tok::open)) throw ParseError("expected an element or group", pos());
    while (!charged_ && (at(Tok::element) || at(Tok::open))) bag.merge(group(0));
    try {
      return bag.scaled(coefficient);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), pos());
    }
  }

  ElementBag group(int depth) {
    if (depth > kMaxNesting) throw ParseError("groups nested too deeply", pos());
    ElementBag bag;
    if (at(Tok::element)) {
      bag.add(t_[p_].text, Rational(1));
      ++p_;
    } else {
      const auto& open = t_[p_++];
      const char want = open.text == "(" ? ')' : ']';
      if (!at(Tok::element) && !at(Tok::open)) throw ParseError("empty group", pos());
      while (at(Tok::element) || at(Tok::open)) bag.merge(group(depth + 1));
      if (!at(Tok::close)) throw ParseError("unbalanced parentheses", open.pos);
      if (t_[p_].text[0] != want) throw ParseError("mismatched bracket", t_[p_].pos);
      ++p_;
    }
    Rational count(1);
    if (at(Tok::number)) {
      const auto& num = t_[p_];
      if (charge_follows(p_ + 1)) {
        // "Er3+" is a charge; "SO42-" keeps all but the last digit as the count.
        const bool integral = num.text.find('.') == std::string::npos;
        if (integral && num.text.size() >= 2) {
          Token head = num;
          head.text.pop_back();
          count = number(head);
        }
        ++p_;
        consume_charge();
      } else {
        count = number(num);
        ++p_;
      }
    }
    if (!charged_ && charge_follows(p_)) consume_charge();
    try {
      return bag.scaled(count);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), pos());
    }
  }

  std::vector<Token> t_;
  std::size_t length_;
  std::size_t p_ = 0;
  bool charged_ = false;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string normalize_name(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

ElementBag parse_formula(std::string_view s, const ElementTable& table) {
  const auto t = trim(s);
  const auto offset = static_cast<std::size_t>(t.data() - s.data());
  try {
    return FormulaParser(lex(t, table), t.size()).parse();
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.position() + offset);
  }
}

std::string render_formula(const ElementBag& bag) {
  std::vector<std::string> order;
  const bool carbon = bag.contains("C");
  if (carbon) {
    order.push_back("C");
    if (bag.contains("H")) order.push_back("H");
  }
  for (const auto& [sym, count] : bag.counts())
    if (!(carbon && (sym == "C" || sym == "H"))) order.push_back(sym);
  std::string out;
  for (const auto& sym : order) {
    out += sym;
    const auto& c = bag.counts().at(sym);
    if (c != Rational(1)) out += c.to_decimal();
  }
  return out;
}

// ---------------------------------------------------------------------------

Lexicon::Lexicon() : elements_(ElementTable::standard()) {}

Lexicon Lexicon::from_json(std::string_view text) {
  Lexicon lex;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("lexicon: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw SchemaError("lexicon must be a JSON object");
  if (const auto it = j.find("__extra_elements__"); it != j.end()) {
    if (!it->is_object()) throw SchemaError("__extra_elements__ must map symbols to names");
    for (const auto& [sym, name] : it->items()) {
      if (!name.is_string()) throw SchemaError("__extra_elements__ names must be strings");
      lex.elements_.add(sym, name.get<std::string>());
    }
  }
  for (const auto& [name, value] : j.items()) {
    if (name == "__extra_elements__") continue;
    if (!value.is_string()) throw SchemaError("lexicon entry \"" + name + "\" must map to a formula string");
    const auto key = normalize_name(name);
    if (key.empty()) throw SchemaError("lexicon has an empty name");
    const auto formula = value.get<std::string>();
    Entry e;
    if (!formula.empty()) {
      try {
        e.bag = parse_formula(formula, lex.elements_);
      } catch (const ParseError& err) {
        throw SchemaError("lexicon entry \"" + name + "\": " + err.what());
      }
    }
    lex.entries_[key] = std::move(e);
    lex.max_words_ = std::max(lex.max_words_, static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ') + 1));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const Error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

const Lexicon& Lexicon::bundled() {
  static const Lexicon lex = from_json(embedded::lexicon());
  return lex;
}

const Lexicon::Entry* Lexicon::find(std::string_view lower_name) const {
  const auto it = entries_.find(std::string(lower_name));
  return it == entries_.end() ? nullptr : &it->second;
}

ElementBag normalize_species(std::string_view name, const Lexicon& lexicon) {
  const auto key = normalize_name(name);
  if (key.empty()) throw NotASpeciesError("empty name is not a chemical species");
  if (const auto* e = lexicon.find(key)) {
    if (!e->bag) throw NotASpeciesError("\"" + std::string(name) + "\" is not a chemical species");
    return *e->bag;
  }
  if (const auto sym = lexicon.elements().symbol_for_name(key)) {
    ElementBag b;
    b.add(*sym, Rational(1));
    return b;
  }
  try {
    return parse_formula(name, lexicon.elements());
  } catch (const ParseError& e) {
    throw NotASpeciesError("\"" + std::string(name) + "\" is not a chemical species: " + e.message());
  }
}

std::string_view to_string(SpeciesKind k) {
  switch (k) {
    case SpeciesKind::formula: return "formula";
    case SpeciesKind::element_symbol: return "element";
    case SpeciesKind::compound_name: return "name";
  }
  return "formula";
}

bool is_ambiguous_symbol(std::string_view s) {
  static const std::set<std::string_view> kStoplist = {
      // single letters: units, labels, variables
      "H", "B", "C", "N", "O", "F", "P", "S", "K", "V", "Y", "I", "W", "U",
      // English words and common abbreviations
      "In", "As", "At", "No", "He", "Be", "Pa", "Tc", "Ts", "Es", "Md", "Mt", "Ra", "Re"};
  return kStoplist.count(s) > 0;
}

// ---------------------------------------------------------------------------
// Species extraction

namespace {

struct Word {
  std::size_t begin, end;            // whole whitespace-delimited run
  std::size_t core_begin, core_end;  // after trimming punctuation
  bool sentence_end = false;         // trimmed trailing . ; : ! ?
};

constexpr std::string_view kOpenQuotes[] = {"\"", "'", "“", "‘"};
constexpr std::string_view kCloseQuotes[] = {"\"", "'", "”", "’"};

bool strip_prefix_any(std::string_view text, std::size_t& b, std::size_t e, std::span<const std::string_view> set) {
  for (auto q : set)
    if (e - b >= q.size() && text.substr(b, q.size()) == q) {
      b += q.size();
      return true;
    }
  return false;
}

bool strip_suffix_any(std::string_view text, std::size_t b, std::size_t& e, std::span<const std::string_view> set) {
  for (auto q : set)
    if (e - b >= q.size() && text.substr(e - q.size(), q.size()) == q) {
      e -= q.size();
      return true;
    }
  return false;
}

// True when the bracket opening `s` closes at its last character: "(ITO)" but not "(NH4)2SO4".
bool wraps(std::string_view s) {
  if (s.size() < 2 || !((s.front() == '(' && s.back() == ')') || (s.front() == '[' && s.back() == ']'))) return false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(' || s[i] == '[') ++depth;
    else if ((s[i] == ')' || s[i] == ']') && --depth == 0) return i + 1 == s.size();
  }
  return false;
}

Word trim_word(std::string_view text, std::size_t b, std::size_t e) {
  Word w{b, e, b, e};
  bool changed = true;
  while (changed && w.core_begin < w.core_end) {
    changed = false;
    const auto core = text.substr(w.core_begin, w.core_end - w.core_begin);
    const auto opens = std::count(core.begin(), core.end(), '(') + std::count(core.begin(), core.end(), '[');
    const auto closes = std::count(core.begin(), core.end(), ')') + std::count(core.begin(), core.end(), ']');
    const char first = core.front(), last = core.back();
    if (strip_prefix_any(text, w.core_begin, w.core_end, kOpenQuotes)) changed = true;
    else if ((first == '(' || first == '[') && opens > closes) ++w.core_begin, changed = true;
    else if (first == '{') ++w.core_begin, changed = true;
    if (w.core_begin >= w.core_end) break;
    if (strip_suffix_any(text, w.core_begin, w.core_end, kCloseQuotes)) changed = true;
    else if (last == '.' || last == ';' || last == ':' || last == '!' || last == '?') {
      --w.core_end;
      w.sentence_end = true;
      changed = true;
    } else if (last == ',' || last == '}') --w.core_end, changed = true;
    else if ((last == ')' || last == ']') && closes > opens) --w.core_end, changed = true;
    if (!changed && wraps(core)) ++w.core_begin, --w.core_end, changed = true;
  }
  return w;
}

bool is_connector(std::string_view lower) {
  static const std::set<std::string_view> kConnectors = {"and", "or", "&", "nor", "vs", "versus", "plus",
                                                         ",", "-", "/", "and/or"};
  return kConnectors.count(lower) > 0;
}

bool is_dopant_word(std::string_view lower) {
  static const std::set<std::string_view> kWords = {
      "doped",      "codoped",   "co-doped", "based",  "containing", "rich",   "substituted", "modified",
      "added",      "activated", "sensitized", "incorporated", "bearing", "loaded", "implanted", "free"};
  return kWords.count(lower) > 0;
}

bool roman_only(std::string_view s) {
  return s.size() >= 2 && std::all_of(s.begin(), s.end(), [](char c) {
           return c == 'I' || c == 'V' || c == 'X' || c == 'L' || c == 'C' || c == 'D' || c == 'M';
         });
}

// Bare run of single-letter symbols with no digits or decoration, e.g. "NO", "CO".
bool single_letter_run(std::string_view s, const ElementTable& table) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_upper(c) || !table.is_symbol(std::string(1, c)) || !is_ambiguous_symbol(std::string(1, c))) return false;
  return true;
}

struct Candidate {
  std::size_t begin, end;
  SpeciesKind kind;
  ElementBag bag;
  bool ambiguous = false;
};

enum class Class { none, ignored, species };

Class classify(std::string_view text, std::size_t b, std::size_t e, const Lexicon& lex, Candidate& out) {
  const auto core = text.substr(b, e - b);
  if (core.empty()) return Class::none;
  const auto key = normalize_name(core);
  if (const auto* entry = lex.find(key)) {
    if (!entry->bag) return Class::ignored;
    out = {b, e, SpeciesKind::compound_name, *entry->bag};
    return Class::species;
  }
  if (const auto sym = lex.elements().symbol_for_name(key)) {
    out = {b, e, SpeciesKind::compound_name, {}};
    out.bag.add(*sym, Rational(1));
    return Class::species;
  }
  if (!is_upper(core.front()) && !is_digit(core.front()) && core.front() != '(' && core.front() != '[')
    return Class::none;
  if (roman_only(core)) return Class::none;
  if (lex.elements().is_symbol(std::string(core))) {
    out = {b, e, SpeciesKind::element_symbol, {}};
    out.bag.add(std::string(core), Rational(1));
    out.ambiguous = is_ambiguous_symbol(core);
    return Class::species;
  }
  try {
    auto bag = parse_formula(core, lex.elements());
    // A bare number is not a species.
    if (bag.empty()) return Class::none;
    out = {b, e, SpeciesKind::formula, std::move(bag)};
    out.ambiguous = single_letter_run(core, lex.elements());
    return Class::species;
  } catch (const ParseError&) {
    return Class::none;
  }
}

// Splits on ASCII hyphens, en dashes, slashes, and colons ("Nd:YAG").
std::vector<std::pair<std::size_t, std::size_t>> split_pieces(std::string_view text, std::size_t b, std::size_t e) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = b;
  for (std::size_t i = b; i < e;) {
    std::size_t len = 0;
    if (text[i] == '-' || text[i] == '/' || text[i] == ':') len = 1;
    else if (text.substr(i, 3) == "–") len = 3;
    if (len) {
      out.emplace_back(start, i);
      i += len;
      start = i;
    } else {
      ++i;
    }
  }
  out.emplace_back(start, e);
  return out;
}

}  // namespace

std::vector<ChemicalSpecies> extract_species(std::string_view text, const Lexicon& lex) {
  std::vector<Word> words;
  for (std::size_t i = 0; i < text.size();) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    const std::size_t b = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    words.push_back(trim_word(text, b, i));
  }

  // Per word: accepted species pieces, and whether the word is a definite species.
  struct Slot {
    std::vector<Candidate> found;
    std::vector<Candidate> pending;  // ambiguous, awaiting context
    bool definite = false;
    bool connector = false;
    std::size_t span_words = 1;
  };
  std::vector<Slot> slots(words.size());

  for (std::size_t i = 0; i < words.size();) {
    auto& slot = slots[i];
    const auto& w = words[i];
    // Multi-word lexicon names, longest first.
    bool matched = false;
    for (std::size_t n = std::min(lex.max_words(), words.size() - i); n >= 2; --n) {
      bool contiguous = true;
      for (std::size_t k = i; k + 1 < i + n && contiguous; ++k)
        contiguous = words[k].core_end == words[k].end && words[k + 1].core_begin == words[k + 1].begin;
      if (!contiguous) continue;
      std::string phrase;
      for (std::size_t k = i; k < i + n; ++k) {
        if (k > i) phrase += ' ';
        phrase += normalize_name(text.substr(words[k].core_begin, words[k].core_end - words[k].core_begin));
      }
      if (const auto* e = lex.find(phrase)) {
        if (e->bag) {
          slot.found.push_back({w.core_begin, words[i + n - 1].core_end, SpeciesKind::compound_name, *e->bag});
          slot.definite = true;
        }
        slot.span_words = n;
        matched = true;
        break;
      }
    }
    if (matched) {
      i += slot.span_words;
      continue;
    }

    const auto core = text.substr(w.core_begin, w.core_end - w.core_begin);
    slot.connector = core.empty() || is_connector(normalize_name(core));
    Candidate c;
    const auto cls = classify(text, w.core_begin, w.core_end, lex, c);
    if (cls == Class::species && !c.ambiguous) {
      slot.found.push_back(std::move(c));
      slot.definite = true;
    } else if (cls == Class::species) {
      slot.pending.push_back(std::move(c));
    } else if (cls == Class::none) {
      // Hyphenated or slashed compounds: "Er3+-doped", "Ca-P", "Er3+/Yb3+".
      const auto pieces = split_pieces(text, w.core_begin, w.core_end);
      if (pieces.size() >= 2) {
        std::vector<Candidate> sure, unsure;
        bool sibling_context = false;
        for (const auto& [pb, pe] : pieces) {
          Candidate pc;
          const auto pcls = classify(text, pb, pe, lex, pc);
          if (pcls == Class::species && !pc.ambiguous) sure.push_back(std::move(pc));
          else if (pcls == Class::species) unsure.push_back(std::move(pc));
          else if (is_dopant_word(normalize_name(text.substr(pb, pe - pb)))) sibling_context = true;
        }
        if (!sure.empty() || sibling_context)
          for (auto& u : unsure) sure.push_back(std::move(u));
        std::sort(sure.begin(), sure.end(), [](const Candidate& a, const Candidate& b) { return a.begin < b.begin; });
        slot.found = std::move(sure);
        slot.definite = !slot.found.empty();
      }
    }
    ++i;
  }

  // Ambiguous symbols need a species neighbour, skipping connectors, within the sentence.
  auto neighbour_is_species = [&](std::size_t i, int dir) {
    for (long k = static_cast<long>(i) + dir; k >= 0 && k < static_cast<long>(words.size()); k += dir) {
      const auto idx = static_cast<std::size_t>(k);
      if (dir < 0 && words[idx].sentence_end) return false;
      if (dir > 0 && words[idx - 1].sentence_end) return false;
      if (slots[idx].definite) return true;
      if (!slots[idx].connector) return false;
    }
    return false;
  };
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (slots[i].pending.empty()) continue;
    if (neighbour_is_species(i, -1) || neighbour_is_species(i, +1)) {
      for (auto& c : slots[i].pending) slots[i].found.push_back(std::move(c));
      slots[i].definite = true;
    }
  }

  std::vector<ChemicalSpecies> out;
  for (const auto& slot : slots)
    for (const auto& c : slot.found)
      out.push_back({std::string(text.substr(c.begin, c.end - c.begin)), c.kind, c.bag, c.begin, c.end});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
  return out;
}

// ---------------------------------------------------------------------------

std::size_t DocumentElementMatrix::column(std::string_view symbol) const {
  const auto it = std::find(elements.begin(), elements.end(), symbol);
  if (it == elements.end()) throw ValidationError("unknown element \"" + std::string(symbol) + "\"");
  return static_cast<std::size_t>(it - elements.begin());
}

std::vector<std::vector<ChemicalSpecies>> extract_corpus_species(const corpus::Corpus& corpus, const Lexicon& lexicon) {
  std::vector<std::vector<ChemicalSpecies>> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.documents()) out.push_back(extract_species(d.abstract, lexicon));
  return out;
}

DocumentElementMatrix element_markers(const corpus::Corpus& corpus,
                                      const std::vector<std::vector<ChemicalSpecies>>& species,
                                      const ElementTable& table, std::size_t min_species_docs) {
  if (species.size() != corpus.size())
    throw ValidationError("species lists do not align with the corpus (" + std::to_string(species.size()) + " vs " +
                          std::to_string(corpus.size()) + ")");
  std::map<std::string, std::size_t> species_docs;
  if (min_species_docs > 1) {
    for (const auto& doc : species) {
      std::set<std::string> forms;
      for (const auto& s : doc) forms.insert(render_formula(s.elements));
      for (const auto& f : forms) ++species_docs[f];
    }
  }
  DocumentElementMatrix m;
  m.elements = table.symbols();
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < m.elements.size(); ++i) col.emplace(m.elements[i], i);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    m.doc_ids.push_back(corpus[d].doc_id);
    std::vector<std::uint8_t> row(m.elements.size(), 0);
    for (const auto& s : species[d]) {
      if (min_species_docs > 1 && species_docs[render_formula(s.elements)] < min_species_docs) continue;
      for (const auto& [sym, count] : s.elements.counts()) {
        const auto it = col.find(sym);
        if (it == col.end()) throw ValidationError("element \"" + sym + "\" is not in the element table");
        row[it->second] = 1;
      }
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

void write_markers_csv(const DocumentElementMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "doc_id";
  for (const auto& e : m.elements) out << ',' << e;
  out << '\n';
  for (std::size_t d = 0; d < m.rows.size(); ++d) {
    out << csv::field(m.doc_ids[d]);
    for (auto v : m.rows[d]) out << ',' << (v ? '1' : '0');
    out << '\n';
  }
  if (!out) throw IoError(path.string(), "write failure");
}

DocumentElementMatrix read_markers_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  DocumentElementMatrix m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      auto f = csv::split_line(line);
      if (lineno == 1) {
        if (f.empty() || f[0] != "doc_id") throw SchemaError("expected header starting with doc_id");
        m.elements.assign(f.begin() + 1, f.end());
        continue;
      }
      if (line.empty()) continue;
      if (f.size() != m.elements.size() + 1) throw SchemaError("wrong number of columns");
      m.doc_ids.push_back(f[0]);
      std::vector<std::uint8_t> row;
      row.reserve(m.elements.size());
      for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i] != "0" && f[i] != "1") throw SchemaError("markers must be 0 or 1");
        row.push_back(f[i] == "1");
      }
      m.rows.push_back(std::move(row));
    } catch (const Error& e) {
      throw LineError(path.string(), lineno, e.what());
    }
  }
  return m;
}

}  // namespace litatlas::chemparse
