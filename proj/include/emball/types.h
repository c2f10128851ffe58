#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace emball {

// Dense row index into the embedding matrices. Explicit features occupy
// [0, n_unigrams); hashed n-gram buckets occupy [n_unigrams, n_unigrams + bucket_count).
using FeatureId = std::uint32_t;

using FeatureBag = std::vector<FeatureId>;

// One training/evaluation unit parsed from a single input line: a list of
// feature bags whose meaning depends on the training mode (document + labels,
// user + items, (h, r, t) triple, sentences of a document, ...).
struct Record {
  std::vector<FeatureBag> bags;

  bool empty() const { return bags.empty(); }
};

// Raised on malformed input lines; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line_number, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
        line_number_(line_number) {}

  std::size_t line_number() const { return line_number_; }

 private:
  std::size_t line_number_;
};

}  // namespace emball
