#pragma once

#include <stdexcept>
#include <string>

namespace tss {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk artifact. Carries the file path and 1-based line number.
class FormatError : public Error {
 public:
  FormatError(std::string path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

// textio
class EmptyVocabulary : public Error {
 public:
  using Error::Error;
};

// signals
class EmptySignal : public Error {
 public:
  using Error::Error;
};
class ZeroMass : public Error {
 public:
  using Error::Error;
};
class MissingEmbedding : public Error {
 public:
  MissingEmbedding(const std::string& doc_id, std::size_t sentence)
      : Error("missing topic embedding for document '" + doc_id +
              "', sentence " + std::to_string(sentence)),
        doc_id_(doc_id),
        sentence_(sentence) {}

  const std::string& doc_id() const { return doc_id_; }
  std::size_t sentence() const { return sentence_; }

 private:
  std::string doc_id_;
  std::size_t sentence_;
};

// kernels
class InvalidScale : public Error {
 public:
  using Error::Error;
};
class UnsupportedOrder : public Error {
 public:
  using Error::Error;
};
class UnstableStep : public Error {
 public:
  using Error::Error;
};

// semgraph
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// scalespace
class InvalidRange : public Error {
 public:
  using Error::Error;
};

// invariance
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class DegenerateClass : public Error {
 public:
  using Error::Error;
};
class NoPreferencePairs : public Error {
 public:
  using Error::Error;
};
class NoPositiveMargin : public Error {
 public:
  using Error::Error;
};

// tasks
class TooShort : public Error {
 public:
  using Error::Error;
};
class MissingJudgments : public Error {
 public:
  using Error::Error;
};
class LabelMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace tss
