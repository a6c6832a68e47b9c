#pragma once

// Small non-validating XML reader for the article record schema. Supports
// elements, attributes, text, CDATA, comments, processing instructions,
// DOCTYPE skipping and the predefined plus numeric character entities.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace litatlas::xml {

struct Node {
  bool is_text = false;
  std::string name;  // element name; empty for text nodes
  std::string text;  // text nodes only
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Node> children;
  std::size_t offset = 0;

  const Node* child(std::string_view element_name) const;
  std::vector<const Node*> children_named(std::string_view element_name) const;
  const std::string* attribute(std::string_view key) const;
};

/// Parses all top-level elements. Throws ParseError with a byte offset.
std::vector<Node> parse(std::string_view text);

/// Concatenated descendant text with block-level elements separated by spaces
/// and whitespace runs collapsed to one space, trimmed.
std::string flatten_text(const Node& node);

}  // namespace litatlas::xml
