#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace litatlas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (XML, filter expressions, CSV). `position` is a byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at byte " + std::to_string(position) + ")"), message_(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }
  /// Message without the position suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t position_;
};

/// Well-formed input that violates the record schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Corpus file line failed to load; carries the 1-based line number.
class LineError : public Error {
 public:
  LineError(const std::string& path, std::size_t line, const std::string& cause)
      : Error(path + ":" + std::to_string(line) + ": " + cause), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id)
      : Error("duplicate doc_id: " + id), id_(id) {}
  // `where` prefixes the message, e.g. "corpus.jsonl:12".
  DuplicateIdError(const std::string& id, const std::string& where)
      : Error(where + ": duplicate doc_id: " + id), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& cause)
      : Error(path + ": " + cause), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Bad arguments or configuration detected before any work starts.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<std::size_t> position = std::nullopt)
      : Error(what), position_(position) {}
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  std::optional<std::size_t> position_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative optimizer produced a non-finite value.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Perplexity calibration could not reach its target; carries the best perplexity found.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double achieved_perplexity)
      : Error(what), achieved_(achieved_perplexity) {}
  double achieved_perplexity() const noexcept { return achieved_; }

 private:
  double achieved_;
};

}  // namespace litatlas
