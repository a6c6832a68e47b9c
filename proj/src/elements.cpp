#include <algorithm>
#include <cctype>
#include <numeric>

#include "litatlas/chemparse.hpp"

namespace litatlas::chemparse {

namespace {

struct ElementInfo {
  const char* symbol;
  const char* name;
};

// Atomic-number order.
constexpr ElementInfo kElements[] = {
    {"H", "hydrogen"},      {"He", "helium"},       {"Li", "lithium"},      {"Be", "beryllium"},
    {"B", "boron"},         {"C", "carbon"},        {"N", "nitrogen"},      {"O", "oxygen"},
    {"F", "fluorine"},      {"Ne", "neon"},         {"Na", "sodium"},       {"Mg", "magnesium"},
    {"Al", "aluminium"},    {"Si", "silicon"},      {"P", "phosphorus"},    {"S", "sulfur"},
    {"Cl", "chlorine"},     {"Ar", "argon"},        {"K", "potassium"},     {"Ca", "calcium"},
    {"Sc", "scandium"},     {"Ti", "titanium"},     {"V", "vanadium"},      {"Cr", "chromium"},
    {"Mn", "manganese"},    {"Fe", "iron"},         {"Co", "cobalt"},       {"Ni", "nickel"},
    {"Cu", "copper"},       {"Zn", "zinc"},         {"Ga", "gallium"},      {"Ge", "germanium"},
    {"As", "arsenic"},      {"Se", "selenium"},     {"Br", "bromine"},      {"Kr", "krypton"},
    {"Rb", "rubidium"},     {"Sr", "strontium"},    {"Y", "yttrium"},       {"Zr", "zirconium"},
    {"Nb", "niobium"},      {"Mo", "molybdenum"},   {"Tc", "technetium"},   {"Ru", "ruthenium"},
    {"Rh", "rhodium"},      {"Pd", "palladium"},    {"Ag", "silver"},       {"Cd", "cadmium"},
    {"In", "indium"},       {"Sn", "tin"},          {"Sb", "antimony"},     {"Te", "tellurium"},
    {"I", "iodine"},        {"Xe", "xenon"},        {"Cs", "caesium"},      {"Ba", "barium"},
    {"La", "lanthanum"},    {"Ce", "cerium"},       {"Pr", "praseodymium"}, {"Nd", "neodymium"},
    {"Pm", "promethium"},   {"Sm", "samarium"},     {"Eu", "europium"},     {"Gd", "gadolinium"},
    {"Tb", "terbium"},      {"Dy", "dysprosium"},   {"Ho", "holmium"},      {"Er", "erbium"},
    {"Tm", "thulium"},      {"Yb", "ytterbium"},    {"Lu", "lutetium"},     {"Hf", "hafnium"},
    {"Ta", "tantalum"},     {"W", "tungsten"},      {"Re", "rhenium"},      {"Os", "osmium"},
    {"Ir", "iridium"},      {"Pt", "platinum"},     {"Au", "gold"},         {"Hg", "mercury"},
    {"Tl", "thallium"},     {"Pb", "lead"},         {"Bi", "bismuth"},      {"Po", "polonium"},
    {"At", "astatine"},     {"Rn", "radon"},        {"Fr", "francium"},     {"Ra", "radium"},
    {"Ac", "actinium"},     {"Th", "thorium"},      {"Pa", "protactinium"}, {"U", "uranium"},
    {"Np", "neptunium"},    {"Pu", "plutonium"},    {"Am", "americium"},    {"Cm", "curium"},
    {"Bk", "berkelium"},    {"Cf", "californium"},  {"Es", "einsteinium"},  {"Fm", "fermium"},
    {"Md", "mendelevium"},  {"No", "nobelium"},     {"Lr", "lawrencium"},   {"Rf", "rutherfordium"},
    {"Db", "dubnium"},      {"Sg", "seaborgium"},   {"Bh", "bohrium"},      {"Hs", "hassium"},
    {"Mt", "meitnerium"},   {"Ds", "darmstadtium"}, {"Rg", "roentgenium"},  {"Cn", "copernicium"},
    {"Nh", "nihonium"},     {"Fl", "flerovium"},    {"Mc", "moscovium"},    {"Lv", "livermorium"},
    {"Ts", "tennessine"},   {"Og", "oganesson"},
};
static_assert(std::size(kElements) == 118);

constexpr std::pair<const char*, const char*> kAlternateNames[] = {
    {"aluminum", "Al"}, {"cesium", "Cs"}, {"sulphur", "S"}, {"phosphorous", "P"}, {"wolfram", "W"},
};

__int128 gcd128(__int128 a, __int128 b) {
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::int64_t checked(__int128 v) {
  if (v > INT64_MAX || v < INT64_MIN) throw ValidationError("element count overflows");
  return static_cast<std::int64_t>(v);
}

}  // namespace

// ---------------------------------------------------------------------------

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw ValidationError("rational with zero denominator");
  if (den < 0) num = -num, den = -den;
  const auto g = std::gcd(num < 0 ? -num : num, den);
  num_ = g ? num / g : 0;
  den_ = g ? den / g : 1;
}

Rational Rational::operator+(const Rational& o) const {
  const auto g = std::gcd(den_, o.den_);
  const __int128 d = static_cast<__int128>(den_ / g) * o.den_;
  const __int128 n = static_cast<__int128>(num_) * (o.den_ / g) + static_cast<__int128>(o.num_) * (den_ / g);
  const __int128 h = gcd128(n < 0 ? -n : n, d);
  return Rational(checked(h ? n / h : n), checked(h ? d / h : d));
}

Rational Rational::operator*(const Rational& o) const {
  const auto g1 = std::gcd(num_ < 0 ? -num_ : num_, o.den_);
  const auto g2 = std::gcd(o.num_ < 0 ? -o.num_ : o.num_, den_);
  const auto a = g1 ? num_ / g1 : num_, d2 = g1 ? o.den_ / g1 : o.den_;
  const auto b = g2 ? o.num_ / g2 : o.num_, d1 = g2 ? den_ / g2 : den_;
  return Rational(checked(static_cast<__int128>(a) * b), checked(static_cast<__int128>(d1) * d2));
}

std::strong_ordering Rational::operator<=>(const Rational& o) const {
  return static_cast<__int128>(num_) * o.den_ <=> static_cast<__int128>(o.num_) * den_;
}

std::string Rational::to_decimal() const {
  std::int64_t d = den_;
  int twos = 0, fives = 0;
  while (d % 2 == 0) d /= 2, ++twos;
  while (d % 5 == 0) d /= 5, ++fives;
  if (d != 1) throw ValidationError("count " + std::to_string(num_) + "/" + std::to_string(den_) +
                                    " has no finite decimal expansion");
  const int places = std::max(twos, fives);
  __int128 scaled = num_;
  __int128 pow10 = 1;
  for (int i = 0; i < places; ++i) pow10 *= 10;
  scaled = scaled * (pow10 / den_);
  const bool neg = scaled < 0;
  if (neg) scaled = -scaled;
  std::string digits;
  do {
    digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(scaled % 10)));
    scaled /= 10;
  } while (scaled > 0);
  if (places > 0) {
    while (digits.size() <= static_cast<std::size_t>(places)) digits.insert(digits.begin(), '0');
    digits.insert(digits.end() - places, '.');
  }
  return neg ? "-" + digits : digits;
}

Rational Rational::parse_decimal(std::string_view s) {
  if (s.empty()) throw ValidationError("empty number");
  __int128 n = 0;
  std::int64_t den = 1;
  bool seen_dot = false, seen_digit = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) throw ValidationError("malformed number");
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw ValidationError("malformed number");
    seen_digit = true;
    n = n * 10 + (c - '0');
    if (seen_dot) {
      if (den > INT64_MAX / 10) throw ValidationError("number has too many digits");
      den *= 10;
    }
    if (n > INT64_MAX) throw ValidationError("number too large");
  }
  if (!seen_digit) throw ValidationError("malformed number");
  return Rational(static_cast<std::int64_t>(n), den);
}

// ---------------------------------------------------------------------------

void ElementBag::add(const std::string& symbol, const Rational& count) {
  if (!(count > Rational(0))) throw ValidationError("element counts must be positive");
  auto [it, inserted] = counts_.emplace(symbol, count);
  if (!inserted) it->second = it->second + count;
}

void ElementBag::merge(const ElementBag& other) {
  for (const auto& [s, c] : other.counts_) add(s, c);
}

ElementBag ElementBag::scaled(const Rational& factor) const {
  ElementBag out;
  for (const auto& [s, c] : counts_) out.add(s, c * factor);
  return out;
}

std::vector<std::string> ElementBag::symbols() const {
  std::vector<std::string> out;
  out.reserve(counts_.size());
  for (const auto& [s, c] : counts_) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------

const ElementTable& ElementTable::standard() {
  static const ElementTable table = [] {
    ElementTable t;
    for (const auto& e : kElements) t.add(e.symbol, e.name);
    for (const auto& [name, sym] : kAlternateNames) t.by_name_.emplace(name, sym);
    return t;
  }();
  return table;
}

void ElementTable::add(const std::string& symbol, const std::string& name) {
  const bool well_formed = !symbol.empty() && symbol.size() <= 3 && std::isupper(static_cast<unsigned char>(symbol[0])) &&
                           std::all_of(symbol.begin() + 1, symbol.end(),
                                       [](char c) { return std::islower(static_cast<unsigned char>(c)); });
  if (!well_formed) throw ValidationError("malformed element symbol \"" + symbol + "\"");
  if (index_.count(symbol)) throw ValidationError("duplicate element symbol \"" + symbol + "\"");
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  index_.emplace(symbol, symbols_.size());
  symbols_.push_back(symbol);
  names_.push_back(lower);
  if (!lower.empty()) by_name_.emplace(lower, symbol);
}

std::optional<std::string> ElementTable::symbol_for_name(std::string_view lower_name) const {
  const auto it = by_name_.find(std::string(lower_name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

const std::string& ElementTable::name_of(std::string_view symbol) const {
  const auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw ValidationError("unknown element symbol \"" + std::string(symbol) + "\"");
  return names_[it->second];
}

}  // namespace litatlas::chemparse
