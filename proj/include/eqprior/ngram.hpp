#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqprior/errors.hpp"
#include "eqprior/exprtree.hpp"

namespace eqprior {

class OutOfVocabulary : public DataError {
 public:
  explicit OutOfVocabulary(const std::string& token)
      : DataError("token '" + token + "' is not in the model vocabulary"), token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

/// Log-linear fit log N_r = intercept + slope * log r over the averaged
/// frequencies of counts (Simple Good-Turing). Only valid with two or more
/// distinct counts.
struct SgtFit {
  bool valid = false;
  double intercept = 0.0;
  double slope = 0.0;

  double smoothed(double r) const;
};

/// N_r: how many distinct phrases of one table were seen exactly r times.
struct CountsOfCounts {
  std::map<std::uint64_t, std::uint64_t> n;
  SgtFit sgt;

  std::uint64_t at(std::uint64_t r) const;
  static CountsOfCounts from(std::map<std::uint64_t, std::uint64_t> n);
};

/// Good-Turing adjusted count C* = (C+1) N_{C+1} / N_C. When N_C or N_{C+1}
/// is zero the smoothed counts replace them; with no usable smoothing the raw
/// count is returned.
double good_turing_count(std::uint64_t count, const CountsOfCounts& table);

/// Katz back-off model over tree phrases, with one family of tables for left
/// phrases and one for right phrases. Immutable once built.
class NGramModel {
 public:
  /// Trains on every phrase of every tree at every back-off length.
  /// Throws DataError for an empty corpus.
  static NGramModel train(std::span<const ExprTree> trees, int order, int k_backoff = 0,
                          std::span<const std::string> extra_vocabulary = {});

  int order() const { return order_; }
  int k_backoff() const { return k_backoff_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  bool in_vocabulary(std::string_view token) const;

  /// Longest context used for the kind: n-1 for left phrases, n for right.
  std::size_t max_context(PhraseKind kind) const;

  /// Copy whose vocabulary also contains the given tokens.
  NGramModel with_vocabulary(std::span<const std::string> extra) const;
  /// Copy with the longest-context tables emptied.
  NGramModel without_top_order() const;

  /// P(target | context). Contexts longer than max_context() are cut to their
  /// most recent words. Throws OutOfVocabulary.
  double probability(PhraseKind kind, std::span<const std::string> context,
                     std::string_view target) const;

  std::uint64_t count(PhraseKind kind, std::span<const std::string> context,
                      std::string_view target) const;
  std::uint64_t context_count(PhraseKind kind, std::span<const std::string> context) const;
  /// d = C*/C clamped to (0, 1], for the table of the given context length.
  double discount(PhraseKind kind, std::size_t context_length, std::uint64_t count) const;
  /// alpha(context); 1 for unseen contexts.
  double backoff_weight(PhraseKind kind, std::span<const std::string> context) const;
  /// beta(context): probability left over after discounting seen phrases.
  double leftover_mass(PhraseKind kind, std::span<const std::string> context) const;
  const CountsOfCounts& counts_of_counts(PhraseKind kind, std::size_t context_length) const;
  std::vector<std::vector<std::string>> observed_contexts(PhraseKind kind) const;

  /// Free-form provenance (corpus hash, options) saved with the model.
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  void set_metadata(std::string key, std::string value) { metadata_[std::move(key)] = std::move(value); }

  std::string to_json() const;
  static NGramModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);

 private:
  struct RangeLess {
    using is_transparent = void;
    template <class A, class B>
    bool operator()(const A& a, const B& b) const {
      return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
  };

  struct ContextStats {
    std::map<std::string, std::uint64_t, std::less<>> targets;
    std::uint64_t total = 0;
    double beta = 0.0;
    double alpha = 1.0;
    // Multiplies d*C/C(context) of words used directly. Differs from 1 only
    // when no mass can be handed to shorter contexts.
    double scale = 1.0;
  };

  struct Table {
    std::map<std::vector<std::string>, ContextStats, RangeLess> contexts;
    CountsOfCounts coc;
  };

  struct Unigram {
    double unseen_each = 0.0;  // probability of each vocabulary word with C <= k
  };

  NGramModel() = default;
  void finalize();
  void finalize_kind(PhraseKind kind);
  const Table* table(PhraseKind kind, std::size_t m) const;
  double prob(PhraseKind kind, std::span<const std::string> ctx, std::string_view target) const;
  double direct(PhraseKind kind, const ContextStats& st, std::size_t m, std::uint64_t c) const;

  int order_ = 1;
  int k_backoff_ = 0;
  std::vector<std::string> vocabulary_;
  std::array<std::vector<Table>, 2> tables_;
  std::array<Unigram, 2> unigram_;
  std::map<std::string, std::string> metadata_;
};

/// Sum over the tree's phrases of log P. Throws OutOfVocabulary.
double log_prior(const NGramModel& model, const ExprTree& tree);

}  // namespace eqprior
