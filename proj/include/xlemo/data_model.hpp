#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace xlemo {

enum class Emotion { anger, fear, joy, sadness, disgust, surprise };

std::string_view to_string(Emotion e);
/// Case-insensitive. Throws ValidationError on unknown names.
Emotion parse_emotion(std::string_view name);
std::optional<Emotion> try_parse_emotion(std::string_view name);

/// The four emotions with English training data; disgust and surprise only
/// occur in annotation campaigns.
constexpr bool is_regression_emotion(Emotion e) {
  return e == Emotion::anger || e == Emotion::fear || e == Emotion::joy ||
         e == Emotion::sadness;
}

enum class Split { train, dev, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

struct Item {
  std::string id;
  std::string text;
  std::string language = "en";
  Emotion emotion = Emotion::anger;
  std::optional<double> gold_score;
};

struct Corpus {
  std::vector<Item> items;
  Split split = Split::train;
  std::string language = "en";

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  /// True when every item carries a gold score.
  bool labeled() const;
};

/// Checks id uniqueness, score range and language consistency.
void validate(const Corpus& corpus);

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Word vectors stored as rows of a dense row-major matrix.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Throws ValidationError on duplicate words or a row count mismatch.
  EmbeddingTable(std::vector<std::string> words, RowMatrixXd vectors);

  Eigen::Index dim() const { return vectors_.cols(); }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  std::optional<Eigen::Index> find(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  /// Vector for a word known to be in the vocabulary.
  auto row(Eigen::Index i) const { return vectors_.row(i); }
  const std::vector<std::string>& words() const { return words_; }
  const RowMatrixXd& vectors() const { return vectors_; }

  /// Duplicate rows dropped by the loader (first occurrence wins).
  std::size_t duplicates_ignored = 0;

 private:
  std::vector<std::string> words_;
  RowMatrixXd vectors_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

/// Word-association lexicon with named score columns.
struct Lexicon {
  std::string name;
  std::vector<std::string> dimensions;
  /// term -> (dimension index -> score)
  std::unordered_map<std::string, std::map<std::size_t, double>> entries;

  std::size_t size() const { return entries.size(); }
  const std::map<std::size_t, double>* find(const std::string& term) const;
};

struct BilingualDictionary {
  std::vector<std::pair<std::string, std::string>> pairs;

  std::size_t size() const { return pairs.size(); }
};

// WASSA TSV: id<TAB>text<TAB>emotion<TAB>score, LF endings, no header.
// A score field of "NONE" marks an unlabeled item.

Corpus read_wassa_tsv(std::istream& in, Split split, std::string language = "en");
Corpus load_wassa_tsv(const std::filesystem::path& path, Split split,
                      std::string language = "en");
void write_wassa_tsv(std::ostream& out, const Corpus& corpus);
void save_wassa_tsv(const std::filesystem::path& path, const Corpus& corpus);

/// Strict decimal parse: "0.5", ".5", "1"; no exponent.
std::optional<double> parse_decimal(std::string_view s);
/// Shortest fixed-notation text that parses back to the same double.
std::string format_decimal(double v);

EmbeddingTable read_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

/// Lexicon name defaults to the file stem.
Lexicon read_lexicon(std::istream& in, std::string name);
Lexicon load_lexicon(const std::filesystem::path& path);

BilingualDictionary read_dictionary(std::istream& in);
BilingualDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace xlemo
