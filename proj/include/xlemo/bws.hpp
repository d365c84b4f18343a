#pragma once

#include "xlemo/data_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace xlemo::bws {

struct Tuple4 {
  std::string tuple_id;
  Emotion emotion = Emotion::anger;
  std::array<std::string, 4> item_ids;

  bool contains(const std::string& item_id) const;
};

struct Judgment {
  std::string tuple_id;
  std::string annotator_id;
  std::string best;
  std::string worst;
  std::int64_t timestamp = 0;
};

/// Counting-based Best-Worst scores for one emotion.
struct ScoreTable {
  Emotion emotion = Emotion::anger;
  std::map<std::string, double> scores;  // (raw + 1) / 2, in [0,1]
  std::map<std::string, double> raw;     // (#best - #worst) / exposure, in [-1,1]
  std::map<std::string, int> appearances;

  std::size_t size() const { return scores.size(); }
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct Reliability {
  MeanStd pearson;
  MeanStd spearman;
  int iterations = 0;
};

inline constexpr int kTupleRetryBudget = 10'000;
inline constexpr int kTupleDesignRestarts = 50;
inline constexpr int kDefaultReliabilityIterations = 100;

/// Balanced 4-tuple design. Every item appears `appearances_per_item` times
/// (a few items get one extra appearance when 4 does not divide the slot
/// count); no tuple repeats an item and no two tuples share the same item set.
std::vector<Tuple4> generate_tuples(std::span<const std::string> item_ids, int appearances_per_item,
                                    std::uint64_t seed, Emotion emotion = Emotion::anger);

/// Throws ValidationError unless the judgment is well formed for `tuple`.
void validate_judgment(const Judgment& j, const Tuple4& tuple);

/// All tuples must share one emotion. Items that never appear in a judged
/// tuple are absent from the result.
ScoreTable aggregate_scores(std::span<const Tuple4> tuples, std::span<const Judgment> judgments);

/// Split-half reliability: per iteration each tuple's judgments are shuffled
/// and split ceil(n/2) / floor(n/2); the two half score tables are correlated
/// over the items present in both.
Reliability split_half_reliability(std::span<const Tuple4> tuples, std::span<const Judgment> judgments,
                                   int iterations, std::uint64_t seed);

/// "0.77 (0.02)"
std::string format_mean_std(const MeanStd& m);

// JSONL schemas: {tuple_id, emotion, item_ids:[4]} and
// {tuple_id, annotator_id, best, worst, timestamp}.

std::string to_json_line(const Tuple4& t);
std::string to_json_line(const Judgment& j);
Tuple4 tuple_from_json(std::string_view line);
Judgment judgment_from_json(std::string_view line);

std::vector<Tuple4> read_tuples_jsonl(std::istream& in);
std::vector<Tuple4> load_tuples_jsonl(const std::filesystem::path& path);
void write_tuples_jsonl(std::ostream& out, std::span<const Tuple4> tuples);
std::vector<Judgment> read_judgments_jsonl(std::istream& in);
std::vector<Judgment> load_judgments_jsonl(const std::filesystem::path& path);
void write_judgments_jsonl(std::ostream& out, std::span<const Judgment> judgments);

/// Subset of tuples for one emotion, and the judgments that reference them.
std::vector<Tuple4> tuples_for(std::span<const Tuple4> tuples, Emotion emotion);
std::vector<Judgment> judgments_for(std::span<const Tuple4> tuples, std::span<const Judgment> judgments);

/// Scores as a WASSA corpus (text resolved from `items` when present).
Corpus to_corpus(const ScoreTable& table, const Corpus* items = nullptr);

}  // namespace xlemo::bws
