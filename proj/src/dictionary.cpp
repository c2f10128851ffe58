#include "emball/dictionary.h"

#include <algorithm>
#include <stdexcept>

namespace emball {

void Dictionary::count(const std::vector<std::string>& tokens) {
  if (finalized_) {
    throw std::logic_error("dictionary already finalized");
  }
  for (const auto& tok : tokens) {
    auto [it, inserted] = pending_.try_emplace(tok);
    if (inserted) {
      it->second.first_seen = tokens_seen_;
    }
    it->second.count++;
    tokens_seen_++;
  }
}

void Dictionary::finalize(std::uint32_t min_count, std::uint32_t ngram_order,
                          std::uint64_t bucket_count,
                          std::string label_prefix) {
  if (finalized_) {
    throw std::logic_error("dictionary already finalized");
  }
  if (min_count < 1) {
    throw std::invalid_argument("min_count must be >= 1");
  }
  if (ngram_order < 1) {
    throw std::invalid_argument("ngram_order must be >= 1");
  }
  if (tokens_seen_ == 0) {
    throw std::runtime_error("empty corpus");
  }

  struct Survivor {
    const std::string* token;
    std::uint64_t count;
    std::uint64_t first_seen;
  };
  std::vector<Survivor> survivors;
  survivors.reserve(pending_.size());
  for (const auto& [tok, entry] : pending_) {
    if (entry.count >= min_count) {
      survivors.push_back({&tok, entry.count, entry.first_seen});
    }
  }
  std::sort(survivors.begin(), survivors.end(),
            [](const Survivor& a, const Survivor& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.first_seen < b.first_seen;
            });

  n_unigrams_ = survivors.size();
  bucket_count_ = bucket_count;
  ngram_order_ = ngram_order;
  min_count_ = min_count;
  label_prefix_ = std::move(label_prefix);

  id_to_token_.reserve(n_unigrams_);
  counts_.reserve(n_unigrams_);
  is_label_.reserve(n_unigrams_);
  token_to_id_.reserve(n_unigrams_);
  for (FeatureId id = 0; id < n_unigrams_; ++id) {
    const Survivor& s = survivors[id];
    id_to_token_.push_back(*s.token);
    counts_.push_back(s.count);
    is_label_.push_back(s.token->rfind(label_prefix_, 0) == 0);
    token_to_id_.emplace(*s.token, id);
  }

  pending_.clear();
  finalized_ = true;
}

Dictionary Dictionary::build(
    const std::vector<std::vector<std::string>>& corpus,
    std::uint32_t min_count, std::uint32_t ngram_order,
    std::uint64_t bucket_count, std::string label_prefix) {
  Dictionary dict;
  for (const auto& tokens : corpus) {
    dict.count(tokens);
  }
  dict.finalize(min_count, ngram_order, bucket_count, std::move(label_prefix));
  return dict;
}

std::optional<FeatureId> Dictionary::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

const std::string& Dictionary::token_of(FeatureId id) const {
  return id_to_token_.at(id);
}

std::uint64_t Dictionary::hash_ngram(const FeatureBag& unigram_ids) const {
  if (bucket_count_ == 0) {
    throw std::runtime_error("n-grams disabled");
  }
  if (unigram_ids.size() < 2) {
    throw std::invalid_argument("n-gram needs at least 2 ids");
  }
  std::uint64_t h = unigram_ids[0];
  for (std::size_t i = 1; i < unigram_ids.size(); ++i) {
    h = h * kNgramHashMultiplier + unigram_ids[i];
  }
  return h % bucket_count_;
}

FeatureBag Dictionary::encode(const std::vector<std::string>& tokens) const {
  if (!finalized_) {
    throw std::logic_error("dictionary not finalized");
  }
  const bool want_ngrams = bucket_count_ > 0 && ngram_order_ >= 2;

  FeatureBag out;
  out.reserve(tokens.size());
  FeatureBag ngram_ids;

  // Windows form over runs of consecutive known, non-label unigrams;
  // unknown tokens and labels break them.
  std::vector<FeatureId> run;
  FeatureBag window;
  auto flush_run = [&] {
    if (want_ngrams && run.size() >= 2) {
      for (std::size_t i = 0; i < run.size(); ++i) {
        window.assign(1, run[i]);
        for (std::size_t j = i + 1; j < run.size() && j < i + ngram_order_;
             ++j) {
          window.push_back(run[j]);
          ngram_ids.push_back(
              static_cast<FeatureId>(n_unigrams_ + hash_ngram(window)));
        }
      }
    }
    run.clear();
  };

  for (const auto& tok : tokens) {
    auto id = id_of(tok);
    if (!id) {
      flush_run();
      continue;
    }
    out.push_back(*id);
    if (is_label_[*id]) {
      flush_run();
    } else {
      run.push_back(*id);
    }
  }
  flush_run();

  out.insert(out.end(), ngram_ids.begin(), ngram_ids.end());
  return out;
}

std::vector<FeatureId> Dictionary::label_ids() const {
  std::vector<FeatureId> out;
  for (FeatureId id = 0; id < n_unigrams_; ++id) {
    if (is_label_[id]) out.push_back(id);
  }
  return out;
}

Dictionary Dictionary::from_tokens(std::vector<std::string> tokens,
                                   std::uint64_t bucket_count,
                                   std::uint32_t ngram_order,
                                   std::uint32_t min_count,
                                   std::string label_prefix) {
  Dictionary dict;
  dict.n_unigrams_ = tokens.size();
  dict.bucket_count_ = bucket_count;
  dict.ngram_order_ = ngram_order;
  dict.min_count_ = min_count;
  dict.label_prefix_ = std::move(label_prefix);
  dict.id_to_token_ = std::move(tokens);
  dict.counts_.assign(dict.n_unigrams_, 0);
  dict.is_label_.reserve(dict.n_unigrams_);
  dict.token_to_id_.reserve(dict.n_unigrams_);
  for (FeatureId id = 0; id < dict.n_unigrams_; ++id) {
    const std::string& tok = dict.id_to_token_[id];
    dict.is_label_.push_back(tok.rfind(dict.label_prefix_, 0) == 0);
    dict.token_to_id_.emplace(tok, id);
  }
  dict.finalized_ = true;
  return dict;
}

}  // namespace emball
