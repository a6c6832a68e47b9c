#include "xml.hpp"

#include <array>
#include <cstdint>

#include "litatlas/error.hpp"

namespace litatlas::xml {

const Node* Node::child(std::string_view element_name) const {
  for (const auto& c : children)
    if (!c.is_text && c.name == element_name) return &c;
  return nullptr;
}

std::vector<const Node*> Node::children_named(std::string_view element_name) const {
  std::vector<const Node*> out;
  for (const auto& c : children)
    if (!c.is_text && c.name == element_name) out.push_back(&c);
  return out;
}

const std::string* Node::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return &v;
  return nullptr;
}

namespace {

bool is_name_start(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':' || u >= 0x80;
}

bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  std::vector<Node> document() {
    std::vector<Node> roots;
    while (true) {
      skip_misc();
      if (pos_ >= s_.size()) break;
      if (s_[pos_] != '<') {
        // Stray text between records must be whitespace.
        fail("text outside of an element");
      }
      roots.push_back(element());
    }
    return roots;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_until(std::string_view terminator, const char* what) {
    const auto end = s_.find(terminator, pos_);
    if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
    pos_ = end + terminator.size();
  }

  // Whitespace, comments, processing instructions and DOCTYPE.
  void skip_misc() {
    while (pos_ < s_.size()) {
      if (is_space(s_[pos_])) {
        ++pos_;
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<!DOCTYPE")) {
        skip_doctype();
      } else {
        break;
      }
    }
  }

  void skip_doctype() {
    int depth = 0;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == '>' && depth <= 0) return;
    }
    fail("unterminated DOCTYPE");
  }

  std::string name() {
    if (pos_ >= s_.size() || !is_name_start(s_[pos_])) fail("invalid name");
    const auto start = pos_;
    while (pos_ < s_.size() && is_name_char(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  void skip_spaces() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  // Decodes an entity starting at '&'; appends to out.
  void entity(std::string& out) {
    const auto start = pos_;
    const auto semi = s_.find(';', pos_);
    if (semi == std::string_view::npos || semi - pos_ > 12) fail("malformed entity");
    const auto body = s_.substr(pos_ + 1, semi - pos_ - 1);
    pos_ = semi + 1;
    if (body == "amp") out += '&';
    else if (body == "lt") out += '<';
    else if (body == "gt") out += '>';
    else if (body == "quot") out += '"';
    else if (body == "apos") out += '\'';
    else if (body.size() > 1 && body[0] == '#') {
      std::uint32_t cp = 0;
      const bool hex = body[1] == 'x' || body[1] == 'X';
      const auto digits = body.substr(hex ? 2 : 1);
      if (digits.empty()) throw ParseError("malformed character reference", start);
      for (char c : digits) {
        std::uint32_t d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw ParseError("malformed character reference", start);
        cp = cp * (hex ? 16 : 10) + d;
        if (cp > 0x10FFFF) throw ParseError("character reference out of range", start);
      }
      append_utf8(out, cp);
    } else {
      throw ParseError("unknown entity &" + std::string(body) + ";", start);
    }
  }

  std::string attribute_value() {
    if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected quoted attribute value");
    const char quote = s_[pos_++];
    std::string value;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated attribute value");
      const char c = s_[pos_];
      if (c == quote) {
        ++pos_;
        return value;
      }
      if (c == '<') fail("'<' in attribute value");
      if (c == '&') {
        entity(value);
      } else {
        value += c;
        ++pos_;
      }
    }
  }

  Node element() {
    Node node;
    node.offset = pos_;
    expect('<');
    node.name = name();
    while (true) {
      skip_spaces();
      if (pos_ >= s_.size()) fail("unterminated start tag <" + node.name + ">");
      if (starts_with("/>")) {
        pos_ += 2;
        return node;
      }
      if (s_[pos_] == '>') {
        ++pos_;
        break;
      }
      auto key = name();
      skip_spaces();
      expect('=');
      skip_spaces();
      node.attributes.emplace_back(std::move(key), attribute_value());
    }
    content(node);
    return node;
  }

  void push_text(Node& parent, std::string& text, std::size_t offset) {
    if (text.empty()) return;
    Node t;
    t.is_text = true;
    t.text = std::move(text);
    t.offset = offset;
    parent.children.push_back(std::move(t));
    text.clear();
  }

  void content(Node& node) {
    std::string text;
    std::size_t text_start = pos_;
    while (true) {
      if (pos_ >= s_.size()) {
        throw ParseError("unterminated element <" + node.name + ">", node.offset);
      }
      const char c = s_[pos_];
      if (c == '&') {
        entity(text);
      } else if (c != '<') {
        text += c;
        ++pos_;
      } else if (starts_with("</")) {
        push_text(node, text, text_start);
        const auto close_at = pos_;
        pos_ += 2;
        const auto closing = name();
        skip_spaces();
        expect('>');
        if (closing != node.name) {
          throw ParseError("mismatched closing tag </" + closing + "> for <" + node.name + ">",
                           close_at);
        }
        return;
      } else if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<![CDATA[")) {
        pos_ += 9;
        const auto end = s_.find("]]>", pos_);
        if (end == std::string_view::npos) fail("unterminated CDATA section");
        text.append(s_.substr(pos_, end - pos_));
        pos_ = end + 3;
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else {
        push_text(node, text, text_start);
        node.children.push_back(element());
        text_start = pos_;
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

bool is_block_element(std::string_view name) {
  static constexpr std::array<std::string_view, 12> kBlock = {
      "p", "para", "sec", "section", "div", "br", "li", "list-item", "title", "label",
      "simple-para", "abstract-sec"};
  for (auto b : kBlock)
    if (name == b) return true;
  // Namespaced variants, e.g. ce:para.
  const auto colon = name.rfind(':');
  if (colon != std::string_view::npos) return is_block_element(name.substr(colon + 1));
  return false;
}

void collect(const Node& node, std::string& out) {
  for (const auto& c : node.children) {
    if (c.is_text) {
      out += c.text;
    } else if (is_block_element(c.name)) {
      out += ' ';
      collect(c, out);
      out += ' ';
    } else {
      collect(c, out);
    }
  }
}

}  // namespace

std::vector<Node> parse(std::string_view text) { return Reader(text).document(); }

std::string flatten_text(const Node& node) {
  std::string raw;
  collect(node, raw);
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

}  // namespace litatlas::xml
