#pragma once

// End-to-end artifact pipeline driven by a JSON config file.
//
// Stages run in order and each writes one artifact into the output directory:
//
//   ingest          corpus.jsonl                (optional relevance filter)
//   lda             lda_model.json
//   embed_abstracts embedding_abstracts.csv     (+ .json sidecar)
//   embed_captions  embedding_captions.csv      (+ .json sidecar)
//   chem            element_markers.csv
//   caption_labels  caption_labels.json
//   map_lda         map_lda.json
//   map_ccp         map_ccp.json
//
// A stage is skipped when its input key (parameters plus the hashes of every
// file it reads) matches the previous run and its artifact is unchanged on
// disk. manifest.json records the outcome of every stage.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "litatlas/embed.hpp"
#include "litatlas/error.hpp"
#include "litatlas/topics.hpp"

namespace litatlas::pipeline {

struct PipelineConfig {
  /// Corpus sources: XML files, XML directories, or corpus JSONL files.
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir;
  /// Bundled defaults when unset.
  std::optional<std::filesystem::path> stopwords;
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> rules;
  /// Trained relevance model; documents it classifies as irrelevant are dropped.
  std::optional<std::filesystem::path> classifier_model;

  topics::LdaOptions lda;
  std::vector<std::string> topic_names;
  std::vector<std::pair<std::string, std::vector<std::string>>> topic_anchors;

  double perplexity = 30.0;
  embed::TsneConfig tsne;

  std::size_t min_species_docs = 1;
};

/// Relative paths resolve against `base_dir`. Both `lda.seed` and `tsne.seed`
/// are required. Throws ValidationError.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Checks parameters and that every referenced file exists and parses.
/// Throws ValidationError.
void validate_config(const PipelineConfig& config);

enum class StageState { pending, running, done, failed };
std::string_view to_string(StageState s);

struct JobStatus {
  std::string stage;
  StageState state = StageState::pending;
  bool skipped = false;
  double seconds = 0.0;
  std::string input_key;
  std::string artifact;  // file name inside the output directory
  std::string sha256;    // artifact hash once done
  std::string error;
};

struct Manifest {
  std::vector<JobStatus> stages;

  /// artifact file name -> sha256, for completed stages.
  std::map<std::string, std::string> artifacts() const;
  const JobStatus* stage(std::string_view name) const;
};

inline constexpr std::array<std::string_view, 8> kStages = {
    "ingest", "lda", "embed_abstracts", "embed_captions", "chem", "caption_labels", "map_lda", "map_ccp"};

inline constexpr std::array<std::string_view, 8> kArtifacts = {
    "corpus.jsonl",       "lda_model.json",      "embedding_abstracts.csv", "embedding_captions.csv",
    "element_markers.csv", "caption_labels.json", "map_lda.json",            "map_ccp.json"};

/// A stage raised; carries the stage name. The manifest on disk records the failure.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage " + stage + " failed: " + cause), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

using StageCallback = std::function<void(const JobStatus&)>;

/// Validates, then runs every stage. Throws ValidationError before any stage
/// runs, or StageError when a stage fails.
Manifest run_pipeline(const PipelineConfig& config, const StageCallback& on_stage = {});

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(std::string_view text);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace litatlas::pipeline
