#pragma once

#include "xlemo/data_model.hpp"
#include "xlemo/features.hpp"
#include "xlemo/svr.hpp"
#include "xlemo/crosslingual.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xlemo::harness {

enum class Method { mono, mt_bow, mt_full, unsup_bow, unsup_full, cwe, blse };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
bool is_bow(Method m);
bool is_translation(Method m);

/// Lexicon groups used by the ablation (-hashtag, -emo, -sent).
enum class LexiconGroup { hashtag, emo, sent };
std::string_view to_string(LexiconGroup g);
LexiconGroup parse_lexicon_group(std::string_view name);

struct LexiconSpec {
  std::filesystem::path path;
  LexiconGroup group = LexiconGroup::emo;
};

struct ExperimentConfig {
  Method method = Method::mono;
  Emotion emotion = Emotion::anger;
  std::filesystem::path train;
  std::filesystem::path dev;
  /// English test file (mono), translated `<lang>.<system>.tsv` (mt_*/unsup_*),
  /// or original target-language text (cwe/blse).
  std::filesystem::path test;
  std::string test_language = "en";
  std::optional<std::filesystem::path> source_embeddings;
  std::optional<std::filesystem::path> target_embeddings;
  std::vector<LexiconSpec> lexicons;
  std::optional<std::filesystem::path> dictionary;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output;

  std::optional<NgramRange> word_ngrams = NgramRange{1, 4};
  std::optional<NgramRange> char_ngrams = NgramRange{3, 5};
  int min_document_frequency = 1;
  svr::SvrConfig svr;
  xling::BlseConfig blse;

  /// Throws ValidationError on any invariant violation.
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct Prediction {
  std::string id;
  double predicted = 0.0;
  double gold = 0.0;
};

struct ReportRow {
  Method method = Method::mono;
  Emotion emotion = Emotion::anger;
  std::string test_language;
  double pearson = 0.0;
  double spearman = 0.0;
  std::vector<Prediction> predictions;
  nlohmann::json resolved_config;
};

/// Feature blocks an ablation can remove.
enum class FeatureGroup { ngrams, chars, embs, hashtag_lex, emo_lex, sent_lex, all_lex };
std::string_view to_string(FeatureGroup g);  // "-ngrams" style labels without the dash
FeatureGroup parse_feature_group(std::string_view name);

struct AblationSpec {
  std::vector<FeatureGroup> groups{FeatureGroup::ngrams,  FeatureGroup::chars,    FeatureGroup::embs,
                                   FeatureGroup::hashtag_lex, FeatureGroup::emo_lex, FeatureGroup::sent_lex,
                                   FeatureGroup::all_lex};
};

struct AblationRow {
  FeatureGroup removed;
  double pearson = 0.0;
  double delta = 0.0;  // ablated - ALL
};

struct AblationTable {
  Method method = Method::mono;
  Emotion emotion = Emotion::anger;
  ReportRow all;
  std::vector<AblationRow> rows;
};

/// In-memory resources for an experiment; `load_resources` reads them from
/// the paths in a config.
struct Resources {
  Corpus train;
  Corpus dev;
  Corpus test;
  std::shared_ptr<const EmbeddingTable> source_embeddings;
  std::shared_ptr<const EmbeddingTable> target_embeddings;
  std::vector<std::pair<LexiconGroup, std::shared_ptr<const Lexicon>>> lexicons;
  std::optional<BilingualDictionary> dictionary;
};

Resources load_resources(const ExperimentConfig& config);

/// fit -> train -> evaluate (SVR methods) or align/train -> predict ->
/// evaluate (embedding methods). Items of other emotions are filtered out.
ReportRow run_experiment(const ExperimentConfig& config);
ReportRow run_experiment(const ExperimentConfig& config, const Resources& resources);

AblationTable run_ablation(const ExperimentConfig& config, const AblationSpec& spec);
AblationTable run_ablation(const ExperimentConfig& config, const Resources& resources, const AblationSpec& spec);

/// Writes report.tsv (one line per row plus avg. per method/language),
/// report.json with the resolved configs, and one predictions file per row.
void write_report(const std::filesystem::path& dir, std::span<const ReportRow> rows, bool clip = false);
/// Results grid: one line per method and language, columns anger fear joy sadness avg.
std::string format_results_table(std::span<const ReportRow> rows);
std::string format_ablation_table(std::span<const AblationTable> tables);

// Translation error analysis.

enum class ErrorCategory { hashtags, lexical, insertions, deletions, untranslated, slang, names, numbers };
inline constexpr std::size_t kErrorCategoryCount = 8;
std::string_view to_string(ErrorCategory c);
ErrorCategory parse_error_category(std::string_view name);

enum class TranslationSystem { mt, unsup };
std::string_view to_string(TranslationSystem s);

struct ErrorRecord {
  std::string tweet_id;
  TranslationSystem system = TranslationSystem::mt;
  std::string language;  // ca | es
  std::vector<ErrorCategory> flags;

  void validate() const;
};

struct ErrorTallyRow {
  std::string language;
  TranslationSystem system = TranslationSystem::mt;
  std::array<int, kErrorCategoryCount> counts{};
  int total = 0;  // sum of the category counts
};

/// Category counts are distinct tweets carrying the flag; Total sums the
/// categories, so a tweet with two flags contributes two. Rows come out
/// ca/mt, ca/unsup, es/mt, es/unsup, all four even when empty.
std::vector<ErrorTallyRow> tally_errors(std::span<const ErrorRecord> records);
std::string format_error_table(std::span<const ErrorTallyRow> rows);

ErrorRecord error_record_from_json(const nlohmann::json& j);
std::vector<ErrorRecord> load_error_records(const std::filesystem::path& path);

}  // namespace xlemo::harness
