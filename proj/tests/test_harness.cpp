#include "support.hpp"

#include "xlemo/errors.hpp"
#include "xlemo/harness.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace xlemo;
using namespace xlemo::harness;
using xlemo::testing::TempDir;

namespace {

void save_lexicon(const std::filesystem::path& path, const std::string& dim, const std::map<std::string, double>& s) {
  std::ofstream out(path);
  for (const auto& [term, v] : s) out << term << '\t' << dim << '\t' << format_decimal(v) << '\n';
}

void save_table(const std::filesystem::path& path, const EmbeddingTable& t) {
  std::ofstream out(path);
  write_embeddings(out, t);
}

/// Texts of `bag` words; gold is the mean of a per-word score.
Corpus scored_corpus(const std::vector<std::string>& words, const std::map<std::string, double>& score, int n,
                     int bag, Rng& rng, const std::string& prefix, Emotion e = Emotion::joy) {
  std::vector<std::string> texts;
  std::vector<double> gold;
  for (int i = 0; i < n; ++i) {
    std::string text;
    double sum = 0;
    for (int k = 0; k < bag; ++k) {
      const auto& w = words[rng.below(words.size())];
      text += (k ? " " : "") + w;
      sum += score.at(w);
    }
    texts.push_back(text);
    gold.push_back(sum / bag);
  }
  return xlemo::testing::make_corpus(texts, gold, e, prefix);
}

/// A full on-disk experiment whose label depends only on the emo lexicon.
/// Train and test draw from disjoint vocabularies, so n-grams do not transfer.
struct LexiconWorld {
  TempDir dir;
  ExperimentConfig config;

  explicit LexiconWorld(bool embeddings_cover_corpus = true) {
    Rng rng(31);
    std::vector<std::string> train_words, test_words;
    std::set<std::string> seen;
    while (train_words.size() < 150 || test_words.size() < 150) {
      const std::string w = xlemo::testing::random_word(rng, 7);
      if (!seen.insert(w).second) continue;
      (train_words.size() < 150 ? train_words : test_words).push_back(w);
    }
    std::map<std::string, double> emo, hashtag, sent;
    for (const auto* set : {&train_words, &test_words}) {
      for (const auto& w : *set) {
        emo[w] = rng.uniform();
        hashtag[w] = rng.uniform();
        sent[w] = rng.uniform(-1, 1);
      }
    }
    save_wassa_tsv(dir / "train.tsv", scored_corpus(train_words, emo, 400, 5, rng, "tr"));
    save_wassa_tsv(dir / "en.mt.tsv", scored_corpus(test_words, emo, 200, 5, rng, "te"));
    save_lexicon(dir / "emo.tsv", "joy", emo);
    save_lexicon(dir / "hashtag.tsv", "joy", hashtag);
    save_lexicon(dir / "sent.tsv", "positive", sent);

    std::vector<std::string> vocab;
    for (const auto* set : {&train_words, &test_words}) {
      for (const auto& w : *set) vocab.push_back(embeddings_cover_corpus ? w : "zz" + w);
    }
    save_table(dir / "emb.txt", EmbeddingTable(vocab, RowMatrixXd(xlemo::testing::gaussian(300, 10, rng))));

    config.method = Method::mt_full;
    config.emotion = Emotion::joy;
    config.train = dir / "train.tsv";
    config.test = dir / "en.mt.tsv";
    config.source_embeddings = dir / "emb.txt";
    config.lexicons = {{dir / "hashtag.tsv", LexiconGroup::hashtag},
                       {dir / "emo.tsv", LexiconGroup::emo},
                       {dir / "sent.tsv", LexiconGroup::sent}};
    config.word_ngrams = NgramRange{1, 2};
    config.char_ngrams = NgramRange{3, 4};
    config.seed = 3;
  }
};

const AblationRow& row(const AblationTable& t, FeatureGroup g) {
  for (const auto& r : t.rows) {
    if (r.removed == g) return r;
  }
  throw std::runtime_error("missing ablation row");
}

}  // namespace

TEST(ExperimentConfig, InvariantsCheckedBeforeComputation) {
  ExperimentConfig c;
  c.train = "/nonexistent/train.tsv";
  c.test = "/nonexistent/en.mt.tsv";
  c.method = Method::mt_bow;
  c.source_embeddings = "/nonexistent/emb.txt";
  EXPECT_THROW(run_experiment(c), ValidationError);
  c.source_embeddings.reset();
  c.lexicons = {{"/nonexistent/l.tsv", LexiconGroup::emo}};
  EXPECT_THROW(run_experiment(c), ValidationError);
  c.lexicons.clear();
  EXPECT_THROW(run_experiment(c), IoError);  // valid config, missing files

  c.method = Method::mt_full;
  c.test = "/nonexistent/es.unsup.tsv";
  EXPECT_THROW(c.validate(), ValidationError);
  c.method = Method::unsup_full;
  EXPECT_NO_THROW(c.validate());
  c.test = "/nonexistent/test.tsv";
  EXPECT_THROW(c.validate(), ValidationError);

  c.method = Method::cwe;
  c.test = "/nonexistent/es.tsv";
  c.source_embeddings = "/x";
  EXPECT_THROW(c.validate(), ValidationError);
  c.target_embeddings = "/y";
  EXPECT_THROW(c.validate(), ValidationError);
  c.dictionary = "/d";
  EXPECT_NO_THROW(c.validate());
  c.method = Method::blse;
  EXPECT_THROW(c.validate(), ValidationError);  // needs dev
  c.dev = "/dev.tsv";
  EXPECT_NO_THROW(c.validate());

  c.method = Method::mono;
  c.emotion = Emotion::surprise;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ExperimentConfig, JsonRoundTripAndRelativePaths) {
  TempDir dir;
  xlemo::testing::write_text(dir / "exp.json", R"({
    "method": "unsup_full", "emotion": "fear", "train": "data/train.tsv", "test": "data/ca.unsup.tsv",
    "source_embeddings": "emb.txt", "lexicons": [{"path": "lex/emo.tsv", "group": "emo"}],
    "seed": 9, "features": {"word_ngram_range": [1, 2], "char_ngram_range": null},
    "svr": {"C": 10, "epsilon": 0.05}
  })");
  const auto c = load_experiment_config(dir / "exp.json");
  EXPECT_EQ(c.method, Method::unsup_full);
  EXPECT_EQ(c.emotion, Emotion::fear);
  EXPECT_EQ(c.train, dir / "data/train.tsv");
  EXPECT_EQ(c.lexicons.at(0).path, dir / "lex/emo.tsv");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.svr.seed, 9u);
  EXPECT_EQ(c.svr.C, 10);
  EXPECT_FALSE(c.char_ngrams);
  EXPECT_EQ(*c.word_ngrams, (NgramRange{1, 2}));
  const auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  xlemo::testing::write_text(dir / "bad.json", R"({"method": "google", "emotion": "fear", "train": "a", "test": "b"})");
  EXPECT_THROW(load_experiment_config(dir / "bad.json"), ValidationError);
}

TEST(RunExperiment, BowSelfEvaluationFloor) {
  TempDir dir;
  Rng rng(5);
  std::vector<std::string> words;
  std::map<std::string, double> score;
  for (int k = 0; k < 60; ++k) {
    words.push_back(xlemo::testing::random_word(rng, 5));
    score[words.back()] = rng.uniform();
  }
  const Corpus train = scored_corpus(words, score, 400, 6, rng, "id", Emotion::anger);
  save_wassa_tsv(dir / "train.tsv", train);
  Corpus subset = train;
  subset.items.resize(100);
  save_wassa_tsv(dir / "en.mt.tsv", subset);

  ExperimentConfig c;
  c.method = Method::mt_bow;
  c.emotion = Emotion::anger;
  c.train = dir / "train.tsv";
  c.test = dir / "en.mt.tsv";
  const auto bow = run_experiment(c);
  EXPECT_GE(bow.pearson, 0.9);
  EXPECT_EQ(bow.predictions.size(), 100u);
  EXPECT_EQ(bow.test_language, "en");

  c.method = Method::mono;
  c.test = dir / "en.mt.tsv";
  EXPECT_GE(run_experiment(c).pearson, 0.9);
}

TEST(RunExperiment, CweWithIdentityEqualsMonoEmbeddingOnly) {
  TempDir dir;
  Rng rng(8);
  std::vector<std::string> words;
  std::map<std::string, double> score;
  for (int k = 0; k < 80; ++k) {
    words.push_back("w" + std::to_string(k));
    score[words.back()] = rng.uniform();
  }
  const Corpus train = scored_corpus(words, score, 200, 4, rng, "t");
  save_wassa_tsv(dir / "train.tsv", train);
  // Unit rows in +/- pairs: mean zero, so preprocessing is a fixed point up
  // to rounding and the alignment comes out as the identity.
  RowMatrixXd M(80, 12);
  for (Eigen::Index k = 0; k < 40; ++k) {
    const Eigen::RowVectorXd v = xlemo::testing::gaussian(1, 12, rng).row(0).normalized();
    M.row(2 * k) = v;
    M.row(2 * k + 1) = -v;
  }
  const EmbeddingTable table(words, M);
  save_table(dir / "emb.txt", table);
  std::ofstream dict(dir / "dict.tsv");
  for (const auto& w : words) dict << w << '\t' << w << '\n';
  dict.close();

  ExperimentConfig cwe;
  cwe.method = Method::cwe;
  cwe.emotion = Emotion::joy;
  cwe.train = dir / "train.tsv";
  cwe.test = dir / "train.tsv";
  cwe.test_language = "en";
  cwe.source_embeddings = dir / "emb.txt";
  cwe.target_embeddings = dir / "emb.txt";
  cwe.dictionary = dir / "dict.tsv";
  const auto a = run_experiment(cwe);

  ExperimentConfig mono = cwe;
  mono.method = Method::mono;
  mono.target_embeddings.reset();
  mono.dictionary.reset();
  mono.word_ngrams.reset();
  mono.char_ngrams.reset();
  const auto b = run_experiment(mono);
  EXPECT_NEAR(a.pearson, b.pearson, 1e-10);
  EXPECT_NEAR(a.spearman, b.spearman, 1e-10);
  ASSERT_EQ(a.predictions.size(), b.predictions.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) {
    EXPECT_NEAR(a.predictions[i].predicted, b.predictions[i].predicted, 1e-8);
  }
}

TEST(RunExperiment, ReportRowsReproduceByteIdentically) {
  LexiconWorld world;
  ExperimentConfig c = world.config;
  c.output = world.dir / "run1";
  const auto first = run_experiment(c);
  c.output = world.dir / "run2";
  run_experiment(c);
  const std::string name = "mt_full.en.joy.predictions.tsv";
  const std::string p1 = xlemo::testing::read_text(world.dir / "run1" / name);
  EXPECT_FALSE(p1.empty());
  EXPECT_EQ(p1, xlemo::testing::read_text(world.dir / "run2" / name));

  const auto sidecar = nlohmann::json::parse(xlemo::testing::read_text(world.dir / "run1" / "report.json"));
  ASSERT_EQ(sidecar.size(), 1u);
  EXPECT_EQ(sidecar[0]["config"]["seed"], 3);
  EXPECT_EQ(sidecar[0]["config"]["method"], "mt_full");
  EXPECT_TRUE(sidecar[0]["config"].contains("feature_config"));

  // The recorded config alone re-runs to the same predictions.
  ExperimentConfig again = ExperimentConfig::from_json(sidecar[0]["config"]);
  again.output = world.dir / "run3";
  run_experiment(again);
  EXPECT_EQ(p1, xlemo::testing::read_text(world.dir / "run3" / name));
  EXPECT_NE(xlemo::testing::read_text(world.dir / "run1" / "report.tsv").find("mt_full\ten\tjoy\t"), std::string::npos);
  EXPECT_GT(first.pearson, 0.8);
}

TEST(RunExperiment, MtFullAndUnsupFullShareCodePath) {
  LexiconWorld world;
  std::filesystem::copy_file(world.dir / "en.mt.tsv", world.dir / "en.unsup.tsv");
  ExperimentConfig mt = world.config;
  ExperimentConfig unsup = world.config;
  unsup.method = Method::unsup_full;
  unsup.test = world.dir / "en.unsup.tsv";
  auto a = run_experiment(mt);
  auto b = run_experiment(unsup);
  EXPECT_EQ(a.pearson, b.pearson);
  for (auto* r : {&a, &b}) {
    r->resolved_config.erase("method");
    r->resolved_config.erase("test");
  }
  EXPECT_EQ(a.resolved_config, b.resolved_config);
}

TEST(Ablation, LexiconSignalCollapsesOnlyWhenRemoved) {
  LexiconWorld world;
  const auto table = run_ablation(world.config, AblationSpec{});
  EXPECT_GT(table.all.pearson, 0.8);
  EXPECT_LT(row(table, FeatureGroup::emo_lex).pearson, 0.2);
  EXPECT_LT(row(table, FeatureGroup::all_lex).pearson, 0.2);
  for (FeatureGroup g : {FeatureGroup::ngrams, FeatureGroup::chars, FeatureGroup::embs, FeatureGroup::hashtag_lex,
                         FeatureGroup::sent_lex}) {
    EXPECT_GT(row(table, g).pearson, 0.8) << to_string(g);
  }
  for (const auto& r : table.rows) EXPECT_EQ(r.delta, r.pearson - table.all.pearson);

  // ALL equals a plain run of the same config, exactly.
  EXPECT_EQ(table.all.pearson, run_experiment(world.config).pearson);
  const std::string text = format_ablation_table(std::vector<AblationTable>{table});
  EXPECT_NE(text.find("-emo"), std::string::npos);
  EXPECT_NE(text.find("-all lex"), std::string::npos);
}

TEST(Ablation, InertEmbeddingBlockHasZeroDelta) {
  LexiconWorld world(false);
  AblationSpec spec;
  spec.groups = {FeatureGroup::embs};
  const auto table = run_ablation(world.config, spec);
  EXPECT_NEAR(table.rows.at(0).delta, 0.0, 1e-12);
}

TEST(Ablation, AbsentGroupIsAnError) {
  LexiconWorld world;
  ExperimentConfig c = world.config;
  c.lexicons.pop_back();  // no sent lexicon
  AblationSpec spec;
  spec.groups = {FeatureGroup::sent_lex};
  EXPECT_THROW(run_ablation(c, spec), ValidationError);
  c.method = Method::mt_bow;
  EXPECT_THROW(run_ablation(c, AblationSpec{}), ValidationError);
}

TEST(ResultsTable, AverageOverFourEmotions) {
  std::vector<ReportRow> rows;
  const double values[] = {0.60, 0.55, 0.50, 0.45};
  const Emotion emotions[] = {Emotion::anger, Emotion::fear, Emotion::joy, Emotion::sadness};
  for (int k = 0; k < 4; ++k) {
    ReportRow r;
    r.method = Method::mono;
    r.emotion = emotions[k];
    r.test_language = "en";
    r.pearson = values[k];
    rows.push_back(r);
  }
  const std::string text = format_results_table(rows);
  EXPECT_NE(text.find("mono\ten\t0.60\t0.55\t0.50\t0.45\t0.53"), std::string::npos) << text;
}

TEST(ErrorTally, EmptyInputIsAllZeros) {
  const auto rows = tally_errors({});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.total, 0);
    for (int c : r.counts) EXPECT_EQ(c, 0);
  }
  EXPECT_EQ(rows[0].language, "ca");
  EXPECT_EQ(rows[0].system, TranslationSystem::mt);
  EXPECT_EQ(rows[3].language, "es");
  EXPECT_EQ(rows[3].system, TranslationSystem::unsup);
}

TEST(ErrorTally, TwoFlagsEachCountTwice) {
  using C = ErrorCategory;
  const std::vector<ErrorRecord> records{{"1", TranslationSystem::unsup, "es", {C::hashtags, C::slang}},
                                         {"2", TranslationSystem::unsup, "es", {C::hashtags, C::names}},
                                         {"3", TranslationSystem::unsup, "es", {C::lexical, C::slang}}};
  const auto rows = tally_errors(records);
  const auto& es = rows[3];
  EXPECT_EQ(es.counts[static_cast<int>(C::hashtags)], 2);
  EXPECT_EQ(es.counts[static_cast<int>(C::slang)], 2);
  EXPECT_EQ(es.counts[static_cast<int>(C::names)], 1);
  EXPECT_EQ(es.counts[static_cast<int>(C::lexical)], 1);
  EXPECT_EQ(es.total, 6);
}

TEST(ErrorTally, DistinctTweetsPerCategory) {
  using C = ErrorCategory;
  const std::vector<ErrorRecord> records{{"1", TranslationSystem::mt, "ca", {C::numbers}},
                                         {"1", TranslationSystem::mt, "ca", {C::numbers, C::deletions}}};
  const auto rows = tally_errors(records);
  EXPECT_EQ(rows[0].counts[static_cast<int>(C::numbers)], 1);
  EXPECT_EQ(rows[0].total, 2);
}

TEST(ErrorTally, RecordValidation) {
  EXPECT_THROW(tally_errors(std::vector<ErrorRecord>{{"1", TranslationSystem::mt, "ca", {}}}), ValidationError);
  EXPECT_THROW(tally_errors(std::vector<ErrorRecord>{{"1", TranslationSystem::mt, "fr", {ErrorCategory::names}}}),
               ValidationError);
  EXPECT_THROW(error_record_from_json(nlohmann::json::parse(
                   R"({"tweet_id":"1","system":"mt","language":"ca","flags":["typos"]})")),
               ValidationError);
  const auto r = error_record_from_json(
      nlohmann::json::parse(R"({"tweet_id":"9","system":"unsup","language":"es","flags":["untranslated"]})"));
  EXPECT_EQ(r.system, TranslationSystem::unsup);
  EXPECT_EQ(r.flags.at(0), ErrorCategory::untranslated);
}
