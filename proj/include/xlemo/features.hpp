#pragma once

#include "xlemo/data_model.hpp"

#include <Eigen/SparseCore>
#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xlemo {

/// Sparse feature row; indices are sorted and unique, size() is the total
/// feature dimensionality.
using FeatureVector = Eigen::SparseVector<double>;

/// Lowercased tweet tokens. Hashtags stay whole ("#verguenza"), mentions
/// become "@user", URLs become "<url>", punctuation runs and emoji are
/// tokens of their own.
std::vector<std::string> tokenize(std::string_view text);

/// Lowercases ASCII and the Latin-1 / Latin Extended-A letters.
std::string lowercase(std::string_view text);

/// Embedding or lexicon entry for a token: exact match first, then the bare
/// word for hashtags.
std::optional<Eigen::Index> lookup_embedding(const EmbeddingTable& table, const std::string& token);
const std::map<std::size_t, double>* lookup_lexicon(const Lexicon& lexicon, const std::string& token);

/// Mean of the in-vocabulary token vectors; zero when none match.
Eigen::VectorXd average_embedding(const EmbeddingTable& table, std::span<const std::string> tokens);

struct NgramRange {
  int low = 1;
  int high = 1;

  bool operator==(const NgramRange&) const = default;
};

struct FeatureConfig {
  std::optional<NgramRange> word_ngrams = NgramRange{1, 4};
  std::optional<NgramRange> char_ngrams = NgramRange{3, 5};
  bool use_embeddings = true;
  /// Names of the lexicons to use; empty means none.
  std::vector<std::string> lexicons;
  int min_document_frequency = 1;

  /// Word unigrams only.
  static FeatureConfig bag_of_words();
  void validate() const;
};

struct Block {
  std::string name;  // word_ngrams, char_ngrams, embeddings, lexicon:<name>
  Eigen::Index offset = 0;
  Eigen::Index width = 0;
};

/// Vocabulary and block layout frozen at fit time. Resources (embeddings,
/// lexicons) are shared read-only; the vectorizer itself is immutable.
class FittedVectorizer {
 public:
  const FeatureConfig& config() const { return config_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block* block(std::string_view name) const;
  Eigen::Index total_dim() const;
  Eigen::Index embedding_dim() const { return embedding_dim_; }
  const std::map<std::string, Eigen::Index>& word_vocabulary() const { return word_vocab_; }
  const std::map<std::string, Eigen::Index>& char_vocabulary() const { return char_vocab_; }

  FeatureVector transform(const Item& item) const { return transform(item.text); }
  FeatureVector transform(std::string_view text) const;
  std::vector<FeatureVector> transform(const Corpus& corpus) const;

  /// Same vocabulary with a different embedding table of identical
  /// dimension (e.g. the target side of a shared space).
  FittedVectorizer with_embeddings(std::shared_ptr<const EmbeddingTable> table) const;

  nlohmann::json to_json() const;
  /// Resources must match the names and dimensions recorded in the document.
  static FittedVectorizer from_json(const nlohmann::json& doc,
                                    std::shared_ptr<const EmbeddingTable> embeddings,
                                    std::vector<std::shared_ptr<const Lexicon>> lexicons);

 private:
  friend FittedVectorizer fit(const Corpus&, const FeatureConfig&, std::shared_ptr<const EmbeddingTable>,
                              std::vector<std::shared_ptr<const Lexicon>>);
  void layout();

  FeatureConfig config_;
  std::map<std::string, Eigen::Index> word_vocab_;
  std::map<std::string, Eigen::Index> char_vocab_;
  std::vector<Block> blocks_;
  Eigen::Index embedding_dim_ = 0;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  std::vector<std::shared_ptr<const Lexicon>> lexicons_;  // in config order
};

/// Lexicons are selected by name from `available` according to
/// `config.lexicons`.
FittedVectorizer fit(const Corpus& corpus, const FeatureConfig& config,
                     std::shared_ptr<const EmbeddingTable> embeddings,
                     std::vector<std::shared_ptr<const Lexicon>> available);

/// Word n-gram keys of a token sequence (tokens joined by one space).
std::vector<std::string> word_ngrams(std::span<const std::string> tokens, NgramRange range);
/// Code-point n-grams of the lowercased raw text.
std::vector<std::string> char_ngrams(std::string_view text, NgramRange range);

nlohmann::json to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

}  // namespace xlemo
