#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emball/types.h"

namespace emball {

// Fixed-length feature dictionary shared by all training modes.
//
// Explicit features get dense ids [0, n_unigrams) assigned in descending
// count order (ties by first appearance). Hashed n-grams occupy the next
// bucket_count ids. Finalized dictionaries are immutable and safe to share
// across threads.
class Dictionary {
 public:
  static constexpr std::uint64_t kNgramHashMultiplier = 116049371ULL;
  static constexpr const char* kDefaultLabelPrefix = "__label__";

  Dictionary() = default;

  // Two-pass construction: feed every bag through count(), then finalize().
  void count(const std::vector<std::string>& tokens);
  void finalize(std::uint32_t min_count, std::uint32_t ngram_order,
                std::uint64_t bucket_count,
                std::string label_prefix = kDefaultLabelPrefix);

  // One-shot build over an in-memory corpus of token lists.
  static Dictionary build(const std::vector<std::vector<std::string>>& corpus,
                          std::uint32_t min_count, std::uint32_t ngram_order,
                          std::uint64_t bucket_count,
                          std::string label_prefix = kDefaultLabelPrefix);

  // Maps tokens to ids of surviving unigrams plus one hashed id per n-gram
  // window (2 <= n <= ngram_order). Unknown tokens are skipped and break
  // n-gram windows; label features never participate in windows.
  FeatureBag encode(const std::vector<std::string>& tokens) const;

  // Multiplicative rolling hash over unigram ids, reduced to a bucket offset.
  // Bit-exact across runs and platforms (64-bit unsigned wrap-around).
  std::uint64_t hash_ngram(const FeatureBag& unigram_ids) const;

  std::optional<FeatureId> id_of(std::string_view token) const;
  const std::string& token_of(FeatureId id) const;
  std::uint64_t count_of(FeatureId id) const { return counts_.at(id); }
  bool is_label(FeatureId id) const { return is_label_.at(id); }

  // Total rows the embedding matrices must provide.
  std::uint64_t num_rows() const { return n_unigrams_ + bucket_count_; }
  std::uint64_t n_unigrams() const { return n_unigrams_; }
  std::uint64_t bucket_count() const { return bucket_count_; }
  std::uint32_t ngram_order() const { return ngram_order_; }
  std::uint32_t min_count() const { return min_count_; }
  const std::string& label_prefix() const { return label_prefix_; }
  bool finalized() const { return finalized_; }

  // Ids of all label features, ascending.
  std::vector<FeatureId> label_ids() const;

  // Reconstructs a finalized dictionary from serialized state (model load).
  static Dictionary from_tokens(std::vector<std::string> tokens,
                                std::uint64_t bucket_count,
                                std::uint32_t ngram_order,
                                std::uint32_t min_count,
                                std::string label_prefix);

 private:
  struct PendingEntry {
    std::uint64_t count = 0;
    std::uint64_t first_seen = 0;
  };

  std::unordered_map<std::string, PendingEntry> pending_;
  std::uint64_t tokens_seen_ = 0;

  std::unordered_map<std::string, FeatureId> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::uint64_t> counts_;
  std::vector<bool> is_label_;
  std::uint64_t n_unigrams_ = 0;
  std::uint64_t bucket_count_ = 0;
  std::uint32_t ngram_order_ = 1;
  std::uint32_t min_count_ = 1;
  std::string label_prefix_ = kDefaultLabelPrefix;
  bool finalized_ = false;
};

}  // namespace emball
