#pragma once

// Article records: ingestion from the flat XML record schema and from
// line-delimited JSON corpus files.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litatlas::corpus {

struct Caption {
  std::string caption_id;  // "<doc_id>#<figure_ordinal>"
  std::string text;
  int figure_ordinal = 1;

  bool operator==(const Caption&) const = default;
};

struct Document {
  std::string doc_id;
  std::string title;
  std::string abstract;
  std::optional<std::string> journal;
  std::optional<std::vector<std::string>> authors;
  std::vector<Caption> captions;
  std::optional<bool> relevant;

  bool operator==(const Document&) const = default;
};

struct ManifestEntry {
  std::string path;
  std::size_t records = 0;

  bool operator==(const ManifestEntry&) const = default;
};

/// Ordered, duplicate-free collection of documents.
class Corpus {
 public:
  Corpus() = default;

  /// Throws DuplicateIdError or SchemaError if `docs` violate the corpus invariants.
  explicit Corpus(std::vector<Document> docs, std::vector<ManifestEntry> manifest = {});

  const std::vector<Document>& documents() const noexcept { return docs_; }
  const std::vector<ManifestEntry>& source_manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const Document& operator[](std::size_t i) const { return docs_[i]; }

  /// Index of `doc_id`, if present.
  std::optional<std::size_t> find(std::string_view doc_id) const;

  std::size_t caption_count() const noexcept;

  /// Structural equality over documents; the manifest records provenance only.
  bool operator==(const Corpus& other) const { return docs_ == other.docs_; }

 private:
  std::vector<Document> docs_;
  std::vector<ManifestEntry> manifest_;
};

/// Trims whitespace and lowercases a DOI scheme prefix ("DOI:", "https://doi.org/").
std::string normalize_doc_id(std::string_view raw);

std::string make_caption_id(std::string_view doc_id, int figure_ordinal);

/// Parent doc_id of a caption id produced by make_caption_id.
std::string caption_parent(std::string_view caption_id);

/// Checks a single document's invariants; throws SchemaError.
void validate_document(const Document& doc);

/// Parses one `<article>` record. Markup inside text elements is flattened to
/// plain text with collapsed whitespace.
Document parse_article_record(std::string_view xml_text);

/// Parses every `<article>` element in `xml_text` (optionally wrapped in a root element).
std::vector<Document> parse_article_records(std::string_view xml_text);

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Serializes one document as a single JSON line (no trailing newline).
std::string document_to_json_line(const Document& doc);
/// Parses one corpus JSON line; throws SchemaError on schema violations.
Document document_from_json_line(std::string_view line);

/// Labeled-set file: corpus lines with an additional `"label":0|1`.
struct LabeledDocument {
  Document doc;
  int label = 0;
};
std::vector<LabeledDocument> load_labeled_set(const std::filesystem::path& path);

/// Reads XML files, XML directories, or corpus JSONL files into one corpus.
Corpus ingest(const std::vector<std::filesystem::path>& inputs);

}  // namespace litatlas::corpus
