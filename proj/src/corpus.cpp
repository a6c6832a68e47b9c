#include "litatlas/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "litatlas/error.hpp"
#include "xml.hpp"

namespace litatlas::corpus {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Corpus::Corpus(std::vector<Document> docs, std::vector<ManifestEntry> manifest)
    : docs_(std::move(docs)), manifest_(std::move(manifest)) {
  std::unordered_set<std::string> seen;
  seen.reserve(docs_.size());
  for (const auto& d : docs_) {
    validate_document(d);
    if (!seen.insert(d.doc_id).second) throw DuplicateIdError(d.doc_id);
  }
}

std::optional<std::size_t> Corpus::find(std::string_view doc_id) const {
  for (std::size_t i = 0; i < docs_.size(); ++i)
    if (docs_[i].doc_id == doc_id) return i;
  return std::nullopt;
}

std::size_t Corpus::caption_count() const noexcept {
  std::size_t n = 0;
  for (const auto& d : docs_) n += d.captions.size();
  return n;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto is_ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  return true;
}

}  // namespace

std::string normalize_doc_id(std::string_view raw) {
  std::string id(trim(raw));
  static constexpr std::string_view kPrefixes[] = {
      "https://dx.doi.org/", "http://dx.doi.org/", "https://doi.org/", "http://doi.org/", "doi:"};
  for (auto p : kPrefixes) {
    if (iequals_prefix(id, p)) {
      for (std::size_t i = 0; i < p.size(); ++i)
        id[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(id[i])));
      break;
    }
  }
  return id;
}

std::string make_caption_id(std::string_view doc_id, int figure_ordinal) {
  return std::string(doc_id) + "#" + std::to_string(figure_ordinal);
}

std::string caption_parent(std::string_view caption_id) {
  const auto hash = caption_id.rfind('#');
  if (hash == std::string_view::npos) return std::string(caption_id);
  return std::string(caption_id.substr(0, hash));
}

void validate_document(const Document& doc) {
  if (doc.doc_id.empty()) throw SchemaError("document has an empty doc_id");
  if (doc.abstract.empty() && doc.captions.empty())
    throw SchemaError("document " + doc.doc_id + " has neither abstract nor captions");
  for (std::size_t i = 0; i < doc.captions.size(); ++i) {
    const auto& c = doc.captions[i];
    const int expected = static_cast<int>(i) + 1;
    if (c.figure_ordinal != expected)
      throw SchemaError("document " + doc.doc_id + ": caption ordinals must be 1..n in order, got " +
                        std::to_string(c.figure_ordinal) + " at position " + std::to_string(expected));
    if (c.text.empty())
      throw SchemaError("document " + doc.doc_id + ": caption " + std::to_string(expected) + " is empty");
    if (c.caption_id != make_caption_id(doc.doc_id, c.figure_ordinal))
      throw SchemaError("document " + doc.doc_id + ": caption id mismatch " + c.caption_id);
  }
}

// ---------------------------------------------------------------------------
// XML records

namespace {

Document document_from_article(const xml::Node& article) {
  if (article.name != "article")
    throw SchemaError("expected <article> record, found <" + article.name + ">");
  Document doc;
  const auto* id = article.child("id");
  if (id == nullptr) throw SchemaError("article record at byte " + std::to_string(article.offset) + " has no <id>");
  doc.doc_id = normalize_doc_id(xml::flatten_text(*id));
  if (doc.doc_id.empty()) throw SchemaError("article record has an empty <id>");
  if (const auto* t = article.child("title")) doc.title = xml::flatten_text(*t);
  if (const auto* a = article.child("abstract")) doc.abstract = xml::flatten_text(*a);
  if (const auto* j = article.child("journal")) doc.journal = xml::flatten_text(*j);
  if (const auto* authors = article.child("authors")) {
    std::vector<std::string> names;
    for (const auto* a : authors->children_named("author")) names.push_back(xml::flatten_text(*a));
    doc.authors = std::move(names);
  }
  if (const auto* figures = article.child("figures")) {
    int ordinal = 0;
    for (const auto* cap : figures->children_named("caption")) {
      ++ordinal;
      if (const auto* n = cap->attribute("n")) {
        int value = 0;
        const auto* first = n->data();
        const auto* last = first + n->size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last)
          throw SchemaError("caption n=\"" + *n + "\" is not an integer");
        if (value != ordinal)
          throw SchemaError("caption n=\"" + *n + "\" out of order; expected " + std::to_string(ordinal));
      }
      Caption c;
      c.figure_ordinal = ordinal;
      c.caption_id = make_caption_id(doc.doc_id, ordinal);
      c.text = xml::flatten_text(*cap);
      doc.captions.push_back(std::move(c));
    }
  }
  validate_document(doc);
  return doc;
}

void collect_articles(const xml::Node& node, std::vector<const xml::Node*>& out) {
  if (node.name == "article") {
    out.push_back(&node);
    return;
  }
  for (const auto& c : node.children)
    if (!c.is_text) collect_articles(c, out);
}

}  // namespace

Document parse_article_record(std::string_view xml_text) {
  const auto roots = xml::parse(xml_text);
  if (roots.size() != 1) throw SchemaError("expected exactly one <article> record, found " + std::to_string(roots.size()));
  return document_from_article(roots.front());
}

std::vector<Document> parse_article_records(std::string_view xml_text) {
  const auto roots = xml::parse(xml_text);
  std::vector<const xml::Node*> articles;
  for (const auto& r : roots) collect_articles(r, articles);
  std::vector<Document> docs;
  docs.reserve(articles.size());
  for (const auto* a : articles) docs.push_back(document_from_article(*a));
  return docs;
}

// ---------------------------------------------------------------------------
// JSON lines

std::string document_to_json_line(const Document& doc) {
  ordered_json j;
  j["doc_id"] = doc.doc_id;
  j["title"] = doc.title;
  j["abstract"] = doc.abstract;
  if (doc.journal) j["journal"] = *doc.journal;
  if (doc.authors) j["authors"] = *doc.authors;
  auto caps = ordered_json::array();
  for (const auto& c : doc.captions) {
    ordered_json cj;
    cj["figure"] = c.figure_ordinal;
    cj["text"] = c.text;
    caps.push_back(std::move(cj));
  }
  j["captions"] = std::move(caps);
  if (doc.relevant) j["relevant"] = *doc.relevant;
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

namespace {

const json& require(const json& j, const char* key, json::value_t type) {
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string("missing field \"") + key + "\"");
  if (it->type() != type) throw SchemaError(std::string("field \"") + key + "\" has the wrong type");
  return *it;
}

Document document_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("record is not a JSON object");
  Document doc;
  doc.doc_id = normalize_doc_id(require(j, "doc_id", json::value_t::string).get<std::string>());
  doc.title = require(j, "title", json::value_t::string).get<std::string>();
  doc.abstract = require(j, "abstract", json::value_t::string).get<std::string>();
  if (auto it = j.find("journal"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("field \"journal\" has the wrong type");
    doc.journal = it->get<std::string>();
  }
  if (auto it = j.find("authors"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw SchemaError("field \"authors\" has the wrong type");
    std::vector<std::string> names;
    for (const auto& a : *it) {
      if (!a.is_string()) throw SchemaError("author entries must be strings");
      names.push_back(a.get<std::string>());
    }
    doc.authors = std::move(names);
  }
  if (auto it = j.find("captions"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("field \"captions\" has the wrong type");
    for (const auto& cj : *it) {
      if (!cj.is_object()) throw SchemaError("caption entries must be objects");
      const auto& fig = cj.find("figure");
      if (fig == cj.end() || !fig->is_number_integer()) throw SchemaError("caption needs an integer \"figure\"");
      Caption c;
      c.figure_ordinal = fig->get<int>();
      c.text = require(cj, "text", json::value_t::string).get<std::string>();
      c.caption_id = make_caption_id(doc.doc_id, c.figure_ordinal);
      doc.captions.push_back(std::move(c));
    }
  }
  if (auto it = j.find("relevant"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw SchemaError("field \"relevant\" has the wrong type");
    doc.relevant = it->get<bool>();
  }
  validate_document(doc);
  return doc;
}

json parse_json_line(std::string_view line) {
  try {
    return json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    try {
      f(line);
    } catch (const DuplicateIdError& e) {
      throw DuplicateIdError(e.id(), path.string() + ":" + std::to_string(number));
    } catch (const SchemaError& e) {
      throw LineError(path.string(), number, e.what());
    }
  }
  if (in.bad()) throw IoError(path.string(), "read failure");
}

}  // namespace

Document document_from_json_line(std::string_view line) { return document_from_json(parse_json_line(line)); }

Corpus load_corpus(const std::filesystem::path& path) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const std::string& line) {
    auto doc = document_from_json_line(line);
    if (!seen.insert(doc.doc_id).second) throw DuplicateIdError(doc.doc_id);
    docs.push_back(std::move(doc));
  });
  const auto n = docs.size();
  return Corpus(std::move(docs), {ManifestEntry{path.string(), n}});
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  for (const auto& d : corpus.documents()) out << document_to_json_line(d) << '\n';
  out.flush();
  if (!out) throw IoError(path.string(), "write failure");
}

std::vector<LabeledDocument> load_labeled_set(const std::filesystem::path& path) {
  std::vector<LabeledDocument> out;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const std::string& line) {
    const auto j = parse_json_line(line);
    auto doc = document_from_json(j);
    const auto it = j.find("label");
    if (it == j.end() || !it->is_number_integer()) throw SchemaError("missing integer \"label\"");
    const int label = it->get<int>();
    if (label != 0 && label != 1) throw SchemaError("label must be 0 or 1");
    if (!seen.insert(doc.doc_id).second) throw DuplicateIdError(doc.doc_id);
    out.push_back({std::move(doc), label});
  });
  return out;
}

Corpus ingest(const std::vector<std::filesystem::path>& inputs) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".xml" || ext == ".jsonl")) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw IoError(in.string(), "no such file or directory");
    }
  }

  std::vector<Document> docs;
  std::vector<ManifestEntry> manifest;
  std::unordered_set<std::string> seen;
  for (const auto& f : files) {
    std::vector<Document> batch;
    const auto ext = f.extension();
    if (ext == ".jsonl" || ext == ".json") {
      batch = load_corpus(f).documents();
    } else {
      std::ifstream in(f, std::ios::binary);
      if (!in) throw IoError(f.string(), "cannot open for reading");
      std::ostringstream ss;
      ss << in.rdbuf();
      try {
        batch = parse_article_records(ss.str());
      } catch (const ParseError& e) {
        throw ParseError(f.string() + ": " + e.message(), e.position());
      } catch (const SchemaError& e) {
        throw SchemaError(f.string() + ": " + e.what());
      }
    }
    for (auto& d : batch) {
      if (!seen.insert(d.doc_id).second) throw DuplicateIdError(d.doc_id);
      docs.push_back(std::move(d));
    }
    manifest.push_back({f.string(), batch.size()});
  }
  return Corpus(std::move(docs), std::move(manifest));
}

}  // namespace litatlas::corpus
