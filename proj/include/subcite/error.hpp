#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace subcite {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-side contract was broken (empty seed list, pending candidate in an
/// accepted pool, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument fell outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  RangeError(std::size_t span_index, const std::string& what)
      : Error(what), span_index_(span_index) {}
  std::size_t span_index() const noexcept { return span_index_; }

 private:
  std::size_t span_index_;
};

/// A quoted fragment does not occur verbatim in the context.
class NotVerbatimError : public Error {
 public:
  NotVerbatimError(std::size_t quote_index, std::string quote)
      : Error("not verbatim: quote " + std::to_string(quote_index) + " \"" + quote + "\""),
        quote_index_(quote_index),
        quote_(std::move(quote)) {}
  std::size_t quote_index() const noexcept { return quote_index_; }
  const std::string& quote() const noexcept { return quote_; }

 private:
  std::size_t quote_index_;
  std::string quote_;
};

/// Input document could not be ingested. `path()` points into the document,
/// e.g. `data[0].paragraphs[2].qas[1].question`.
class IngestionError : public Error {
 public:
  IngestionError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class CassetteMissError : public Error {
 public:
  explicit CassetteMissError(std::string fingerprint)
      : Error("cassette miss: " + fingerprint), fingerprint_(std::move(fingerprint)) {}
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class RecordError : public Error {
 public:
  using Error::Error;
};

class JudgeError : public Error {
 public:
  using Error::Error;
};

/// Attempted transition out of a terminal candidate status.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace subcite
