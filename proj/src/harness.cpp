#include "xlemo/harness.hpp"

#include "xlemo/errors.hpp"
#include "xlemo/metrics.hpp"
#include "io_util.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace xlemo::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 7> kMethods{{
    {Method::mono, "mono"},
    {Method::mt_bow, "mt_bow"},
    {Method::mt_full, "mt_full"},
    {Method::unsup_bow, "unsup_bow"},
    {Method::unsup_full, "unsup_full"},
    {Method::cwe, "cwe"},
    {Method::blse, "blse"},
}};

constexpr std::array<std::pair<FeatureGroup, std::string_view>, 7> kFeatureGroups{{
    {FeatureGroup::ngrams, "ngrams"},
    {FeatureGroup::chars, "char"},
    {FeatureGroup::embs, "embs"},
    {FeatureGroup::hashtag_lex, "hashtag"},
    {FeatureGroup::emo_lex, "emo"},
    {FeatureGroup::sent_lex, "sent"},
    {FeatureGroup::all_lex, "all lex"},
}};

constexpr std::array<std::string_view, kErrorCategoryCount> kErrorCategories{
    "hashtags", "lexical", "insertions", "deletions", "untranslated", "slang", "names", "numbers"};

constexpr std::array<Emotion, 4> kRegressionEmotions{Emotion::anger, Emotion::fear, Emotion::joy, Emotion::sadness};

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string signed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

/// "<lang>.<system>.tsv" -> (lang, system)
std::optional<std::pair<std::string, std::string>> translated_name(const fs::path& path) {
  const std::string name = path.filename().string();
  const std::string suffix = ".tsv";
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  const std::string stem = name.substr(0, name.size() - suffix.size());
  const auto dot = stem.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == stem.size()) return std::nullopt;
  const std::string system = stem.substr(dot + 1);
  std::string lang = stem.substr(0, dot);
  if (const auto inner = lang.rfind('.'); inner != std::string::npos) lang = lang.substr(inner + 1);
  return std::make_pair(lang, system);
}

Corpus filter_emotion(const Corpus& corpus, Emotion emotion) {
  Corpus out;
  out.split = corpus.split;
  out.language = corpus.language;
  std::copy_if(corpus.items.begin(), corpus.items.end(), std::back_inserter(out.items),
               [&](const Item& it) { return it.emotion == emotion; });
  return out;
}

std::string report_language(const ExperimentConfig& c) {
  if (is_translation(c.method)) {
    if (auto parts = translated_name(c.test)) return parts->first;
  }
  return c.test_language;
}

json optional_path(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

std::optional<fs::path> path_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return fs::path(j.at(key).get<std::string>());
}

Correlations score(std::span<const Prediction> predictions) {
  std::vector<double> p;
  std::vector<double> g;
  for (const auto& pr : predictions) {
    p.push_back(pr.predicted);
    g.push_back(pr.gold);
  }
  return correlate(p, g);
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [method, name] : kMethods) {
    if (method == m) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [method, n] : kMethods) {
    if (n == name) return method;
  }
  throw ValidationError("unknown method '" + std::string(name) + "'");
}

bool is_bow(Method m) { return m == Method::mt_bow || m == Method::unsup_bow; }

bool is_translation(Method m) {
  return m == Method::mt_bow || m == Method::mt_full || m == Method::unsup_bow || m == Method::unsup_full;
}

std::string_view to_string(LexiconGroup g) {
  switch (g) {
    case LexiconGroup::hashtag: return "hashtag";
    case LexiconGroup::emo: return "emo";
    case LexiconGroup::sent: return "sent";
  }
  return "unknown";
}

LexiconGroup parse_lexicon_group(std::string_view name) {
  if (name == "hashtag") return LexiconGroup::hashtag;
  if (name == "emo") return LexiconGroup::emo;
  if (name == "sent") return LexiconGroup::sent;
  throw ValidationError("unknown lexicon group '" + std::string(name) + "' (expected hashtag, emo or sent)");
}

std::string_view to_string(FeatureGroup g) {
  for (const auto& [group, name] : kFeatureGroups) {
    if (group == g) return name;
  }
  return "unknown";
}

FeatureGroup parse_feature_group(std::string_view name) {
  if (!name.empty() && name.front() == '-') name.remove_prefix(1);
  if (name == "all_lex" || name == "all-lex") return FeatureGroup::all_lex;
  if (name == "chars") return FeatureGroup::chars;
  for (const auto& [group, n] : kFeatureGroups) {
    if (n == name) return group;
  }
  throw ValidationError("unknown feature group '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("experiment config (" + std::string(to_string(method)) + "): " + msg);
  };
  if (!is_regression_emotion(emotion)) fail("emotion must be anger, fear, joy or sadness");
  if (train.empty()) fail("train corpus path is required");
  if (test.empty()) fail("test corpus path is required");
  if (word_ngrams && (word_ngrams->low < 1 || word_ngrams->low > word_ngrams->high)) fail("bad word n-gram range");
  if (char_ngrams && (char_ngrams->low < 1 || char_ngrams->low > char_ngrams->high)) fail("bad char n-gram range");
  if (min_document_frequency < 1) fail("min_document_frequency must be >= 1");
  svr.validate();
  blse.validate();

  if (is_bow(method) && (source_embeddings || target_embeddings || !lexicons.empty())) {
    fail("bag-of-words methods do not use embedding or lexicon features");
  }
  if (is_translation(method)) {
    const auto parts = translated_name(test);
    const std::string want = (method == Method::mt_bow || method == Method::mt_full) ? "mt" : "unsup";
    if (!parts || parts->second != want) {
      fail("test corpus must be a translated file named <lang>." + want + ".tsv, got '" +
           test.filename().string() + "'");
    }
  }
  if (method == Method::cwe || method == Method::blse) {
    if (!dictionary) fail("a bilingual dictionary is required");
    if (!source_embeddings || !target_embeddings) fail("source and target embeddings are required");
    if (!lexicons.empty()) fail("embedding transfer methods take no lexicon features");
  }
  if (method == Method::blse && dev.empty()) fail("a source-language dev corpus is required for model selection");
  if (method != Method::cwe && method != Method::blse && target_embeddings) {
    fail("target embeddings only apply to cwe and blse");
  }
}

json ExperimentConfig::to_json() const {
  json lex = json::array();
  for (const auto& l : lexicons) lex.push_back({{"path", l.path.string()}, {"group", std::string(to_string(l.group))}});
  auto range = [](const std::optional<NgramRange>& r) { return r ? json::array({r->low, r->high}) : json(nullptr); };
  return json{{"method", std::string(to_string(method))},
              {"emotion", std::string(xlemo::to_string(emotion))},
              {"train", train.string()},
              {"dev", dev.string()},
              {"test", test.string()},
              {"test_language", test_language},
              {"source_embeddings", optional_path(source_embeddings)},
              {"target_embeddings", optional_path(target_embeddings)},
              {"lexicons", lex},
              {"dictionary", optional_path(dictionary)},
              {"seed", seed},
              {"output", optional_path(output)},
              {"features",
               {{"word_ngram_range", range(word_ngrams)},
                {"char_ngram_range", range(char_ngrams)},
                {"min_document_frequency", min_document_frequency}}},
              {"svr", svr::to_json(svr)},
              {"blse", xling::to_json(blse)}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.method = parse_method(j.at("method").get<std::string>());
    // A multi-emotion run file lists "emotions"; the first is the default row.
    const json& emotion = j.contains("emotion") || !j.contains("emotions") ? j.at("emotion") : j.at("emotions").at(0);
    c.emotion = parse_emotion(emotion.get<std::string>());
    c.train = j.at("train").get<std::string>();
    c.dev = j.value("dev", std::string());
    c.test = j.at("test").get<std::string>();
    c.test_language = j.value("test_language", c.test_language);
    c.source_embeddings = path_field(j, "source_embeddings");
    c.target_embeddings = path_field(j, "target_embeddings");
    c.dictionary = path_field(j, "dictionary");
    c.output = path_field(j, "output");
    c.seed = j.value("seed", c.seed);
    for (const auto& l : j.value("lexicons", json::array())) {
      c.lexicons.push_back({l.at("path").get<std::string>(), parse_lexicon_group(l.at("group").get<std::string>())});
    }
    if (j.contains("features")) {
      const json& f = j.at("features");
      auto range = [](const json& r) -> std::optional<NgramRange> {
        if (r.is_null()) return std::nullopt;
        const auto v = r.get<std::vector<int>>();
        if (v.size() != 2) throw ValidationError("n-gram range must be [low, high]");
        return NgramRange{v[0], v[1]};
      };
      if (f.contains("word_ngram_range")) c.word_ngrams = range(f.at("word_ngram_range"));
      if (f.contains("char_ngram_range")) c.char_ngrams = range(f.at("char_ngram_range"));
      c.min_document_frequency = f.value("min_document_frequency", c.min_document_frequency);
    }
    if (j.contains("svr")) c.svr = svr::svr_config_from_json(j.at("svr"));
    if (j.contains("blse")) c.blse = xling::blse_config_from_json(j.at("blse"));
    c.svr.seed = c.seed;
    c.blse.seed = c.seed;
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig c = ExperimentConfig::from_json(j);
  const fs::path base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(c.train);
  resolve(c.dev);
  resolve(c.test);
  for (auto* p : {&c.source_embeddings, &c.target_embeddings, &c.dictionary, &c.output}) {
    if (*p) resolve(**p);
  }
  for (auto& l : c.lexicons) resolve(l.path);
  return c;
}

Resources load_resources(const ExperimentConfig& config) {
  config.validate();
  Resources r;
  r.train = load_wassa_tsv(config.train, Split::train, "en");
  if (!config.dev.empty()) r.dev = load_wassa_tsv(config.dev, Split::dev, "en");
  const bool original_target = config.method == Method::cwe || config.method == Method::blse;
  r.test = load_wassa_tsv(config.test, Split::test, original_target ? config.test_language : "en");
  if (config.source_embeddings) {
    r.source_embeddings = std::make_shared<const EmbeddingTable>(load_embeddings(*config.source_embeddings));
  }
  if (config.target_embeddings) {
    r.target_embeddings = std::make_shared<const EmbeddingTable>(load_embeddings(*config.target_embeddings));
  }
  for (const auto& spec : config.lexicons) {
    r.lexicons.emplace_back(spec.group, std::make_shared<const Lexicon>(load_lexicon(spec.path)));
  }
  if (config.dictionary) r.dictionary = load_dictionary(*config.dictionary);
  return r;
}

ReportRow run_experiment(const ExperimentConfig& config) { return run_experiment(config, load_resources(config)); }

ReportRow run_experiment(const ExperimentConfig& config, const Resources& resources) {
  config.validate();
  const Corpus train = filter_emotion(resources.train, config.emotion);
  const Corpus test = filter_emotion(resources.test, config.emotion);
  if (train.empty()) throw ValidationError("no training items for " + std::string(xlemo::to_string(config.emotion)));
  if (test.size() < 2) throw ValidationError("need at least 2 test items for " + std::string(xlemo::to_string(config.emotion)));
  if (!train.labeled()) throw ValidationError("training corpus has items without gold scores");
  if (!test.labeled()) throw ValidationError("test corpus has items without gold scores");

  ReportRow row;
  row.method = config.method;
  row.emotion = config.emotion;
  row.test_language = report_language(config);
  row.resolved_config = config.to_json();

  std::vector<double> predictions;
  if (config.method == Method::blse) {
    if (!resources.source_embeddings || !resources.target_embeddings || !resources.dictionary) {
      throw ValidationError("blse resources missing");
    }
    const Corpus dev = filter_emotion(resources.dev, config.emotion);
    xling::BlseConfig bc = config.blse;
    bc.seed = config.seed;
    const xling::BlseModel model = xling::train_blse(train, *resources.source_embeddings, *resources.target_embeddings,
                                                     *resources.dictionary, dev, bc);
    for (const Item& item : test.items) {
      predictions.push_back(xling::predict_blse(model, item, *resources.target_embeddings, xling::Side::target));
    }
    row.resolved_config["blse_best_epoch"] = model.best_epoch;
  } else {
    FeatureConfig fc;
    std::shared_ptr<const EmbeddingTable> train_table = resources.source_embeddings;
    std::shared_ptr<const EmbeddingTable> test_table = resources.source_embeddings;
    std::vector<std::shared_ptr<const Lexicon>> lexicons;
    if (config.method == Method::cwe) {
      if (!resources.source_embeddings || !resources.target_embeddings || !resources.dictionary) {
        throw ValidationError("cwe resources missing");
      }
      const xling::AlignmentMap map =
          xling::procrustes_align(*resources.source_embeddings, *resources.target_embeddings, *resources.dictionary);
      train_table = std::make_shared<const EmbeddingTable>(xling::map_embeddings(map, *resources.source_embeddings));
      test_table = std::make_shared<const EmbeddingTable>(xling::preprocess(*resources.target_embeddings));
      fc.word_ngrams = std::nullopt;
      fc.char_ngrams = std::nullopt;
      fc.use_embeddings = true;
      row.resolved_config["alignment_pairs_used"] = map.pairs_used;
      row.resolved_config["alignment_pairs_dropped"] = map.pairs_dropped;
    } else if (is_bow(config.method)) {
      fc = FeatureConfig::bag_of_words();
    } else {
      fc.word_ngrams = config.word_ngrams;
      fc.char_ngrams = config.char_ngrams;
      fc.use_embeddings = static_cast<bool>(resources.source_embeddings);
      for (const auto& [group, lex] : resources.lexicons) {
        fc.lexicons.push_back(lex->name);
        lexicons.push_back(lex);
      }
    }
    fc.min_document_frequency = config.min_document_frequency;
    const FittedVectorizer vectorizer = fit(train, fc, train_table, lexicons);
    const FittedVectorizer test_vectorizer =
        config.method == Method::cwe ? vectorizer.with_embeddings(test_table) : vectorizer;

    std::vector<double> y;
    for (const Item& item : train.items) y.push_back(*item.gold_score);
    svr::SvrConfig sc = config.svr;
    sc.seed = config.seed;
    const svr::SvrModel model = svr::train(vectorizer.transform(train), y, sc);
    for (const Item& item : test.items) predictions.push_back(svr::predict(model, test_vectorizer.transform(item)));
    row.resolved_config["feature_config"] = to_json(fc);
    row.resolved_config["total_dim"] = vectorizer.total_dim();
    row.resolved_config["svr_passes"] = model.passes;
    row.resolved_config["svr_converged"] = model.converged;
  }

  for (std::size_t i = 0; i < test.size(); ++i) {
    row.predictions.push_back({test.items[i].id, predictions[i], *test.items[i].gold_score});
  }
  const Correlations c = score(row.predictions);
  row.pearson = c.pearson;
  row.spearman = c.spearman;
  if (config.output) write_report(*config.output, std::span<const ReportRow>(&row, 1));
  return row;
}

AblationTable run_ablation(const ExperimentConfig& config, const AblationSpec& spec) {
  return run_ablation(config, load_resources(config), spec);
}

AblationTable run_ablation(const ExperimentConfig& config, const Resources& resources, const AblationSpec& spec) {
  if (config.method != Method::mono && config.method != Method::mt_full && config.method != Method::unsup_full) {
    throw ValidationError("ablation needs a full-feature SVR method (mono, mt_full, unsup_full)");
  }
  auto has_group = [&](LexiconGroup g) {
    return std::any_of(resources.lexicons.begin(), resources.lexicons.end(),
                       [&](const auto& entry) { return entry.first == g; });
  };
  // Fail before any computation when a removal has nothing to remove.
  for (FeatureGroup g : spec.groups) {
    const bool present = [&] {
      switch (g) {
        case FeatureGroup::ngrams: return config.word_ngrams.has_value();
        case FeatureGroup::chars: return config.char_ngrams.has_value();
        case FeatureGroup::embs: return static_cast<bool>(resources.source_embeddings);
        case FeatureGroup::hashtag_lex: return has_group(LexiconGroup::hashtag);
        case FeatureGroup::emo_lex: return has_group(LexiconGroup::emo);
        case FeatureGroup::sent_lex: return has_group(LexiconGroup::sent);
        case FeatureGroup::all_lex: return !resources.lexicons.empty();
      }
      return false;
    }();
    if (!present) {
      throw ValidationError("cannot remove '" + std::string(to_string(g)) + "': not part of the base configuration");
    }
  }

  AblationTable table;
  table.method = config.method;
  table.emotion = config.emotion;
  ExperimentConfig base = config;
  base.output.reset();
  table.all = run_experiment(base, resources);

  for (FeatureGroup g : spec.groups) {
    ExperimentConfig cfg = base;
    Resources res = resources;
    auto drop_lexicons = [&](std::optional<LexiconGroup> which) {
      std::erase_if(res.lexicons, [&](const auto& entry) { return !which || entry.first == *which; });
      std::erase_if(cfg.lexicons, [&](const LexiconSpec& l) { return !which || l.group == *which; });
    };
    switch (g) {
      case FeatureGroup::ngrams: cfg.word_ngrams.reset(); break;
      case FeatureGroup::chars: cfg.char_ngrams.reset(); break;
      case FeatureGroup::embs:
        cfg.source_embeddings.reset();
        res.source_embeddings.reset();
        break;
      case FeatureGroup::hashtag_lex: drop_lexicons(LexiconGroup::hashtag); break;
      case FeatureGroup::emo_lex: drop_lexicons(LexiconGroup::emo); break;
      case FeatureGroup::sent_lex: drop_lexicons(LexiconGroup::sent); break;
      case FeatureGroup::all_lex: drop_lexicons(std::nullopt); break;
    }
    const ReportRow r = run_experiment(cfg, res);
    table.rows.push_back({g, r.pearson, r.pearson - table.all.pearson});
  }
  return table;
}

void write_report(const fs::path& dir, std::span<const ReportRow> rows, bool clip) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + dir.string() + "': " + ec.message());

  auto tsv = detail::open_output(dir / "report.tsv");
  tsv << "method\tlanguage\temotion\tpearson\tspearman\tn\n";
  json sidecar = json::array();
  for (const ReportRow& r : rows) {
    tsv << to_string(r.method) << '\t' << r.test_language << '\t' << xlemo::to_string(r.emotion) << '\t'
        << format_decimal(r.pearson) << '\t' << format_decimal(r.spearman) << '\t' << r.predictions.size() << '\n';
    sidecar.push_back({{"method", std::string(to_string(r.method))},
                       {"language", r.test_language},
                       {"emotion", std::string(xlemo::to_string(r.emotion))},
                       {"pearson", r.pearson},
                       {"spearman", r.spearman},
                       {"config", r.resolved_config}});

    const std::string name = std::string(to_string(r.method)) + "." + r.test_language + "." +
                             std::string(xlemo::to_string(r.emotion)) + ".predictions.tsv";
    auto pred = detail::open_output(dir / name);
    for (const auto& p : r.predictions) {
      pred << p.id << '\t' << format_decimal(clip ? svr::clip_unit(p.predicted) : p.predicted) << '\t'
           << format_decimal(p.gold) << '\n';
    }
    detail::close_output(pred, dir / name);
  }
  // avg. over the four emotions, per (method, language) with a complete set
  std::map<std::pair<std::string, std::string>, std::map<Emotion, double>> grouped;
  for (const ReportRow& r : rows) grouped[{std::string(to_string(r.method)), r.test_language}][r.emotion] = r.pearson;
  for (const auto& [key, by_emotion] : grouped) {
    if (by_emotion.size() != kRegressionEmotions.size()) continue;
    double sum = 0.0;
    for (const auto& [e, p] : by_emotion) sum += p;
    tsv << key.first << '\t' << key.second << "\tavg.\t" << format_decimal(sum / 4.0) << "\t\t\n";
  }
  detail::close_output(tsv, dir / "report.tsv");

  auto js = detail::open_output(dir / "report.json");
  js << sidecar.dump(2) << '\n';
  detail::close_output(js, dir / "report.json");
}

std::string format_results_table(std::span<const ReportRow> rows) {
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::map<Emotion, double>> grouped;
  for (const ReportRow& r : rows) {
    std::pair<std::string, std::string> key{std::string(to_string(r.method)), r.test_language};
    if (!grouped.count(key)) keys.push_back(key);
    grouped[key][r.emotion] = r.pearson;
  }
  std::ostringstream out;
  out << "method\tlang\tanger\tfear\tjoy\tsadness\tavg.\n";
  for (const auto& key : keys) {
    const auto& by_emotion = grouped[key];
    out << key.first << '\t' << key.second;
    double sum = 0.0;
    for (Emotion e : kRegressionEmotions) {
      auto it = by_emotion.find(e);
      out << '\t' << (it == by_emotion.end() ? std::string("-") : fmt2(it->second));
      if (it != by_emotion.end()) sum += it->second;
    }
    out << '\t' << (by_emotion.size() == 4 ? fmt2(sum / 4.0) : std::string("-")) << '\n';
  }
  return out.str();
}

std::string format_ablation_table(std::span<const AblationTable> tables) {
  std::ostringstream out;
  out << "emotion\tmethod\tALL";
  std::vector<FeatureGroup> columns;
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      if (std::find(columns.begin(), columns.end(), r.removed) == columns.end()) columns.push_back(r.removed);
    }
  }
  for (FeatureGroup g : columns) out << "\t-" << to_string(g);
  out << '\n';
  for (const auto& t : tables) {
    out << xlemo::to_string(t.emotion) << '\t' << to_string(t.method) << '\t' << fmt2(t.all.pearson);
    for (FeatureGroup g : columns) {
      auto it = std::find_if(t.rows.begin(), t.rows.end(), [&](const AblationRow& r) { return r.removed == g; });
      out << '\t' << (it == t.rows.end() ? std::string("") : signed2(it->delta));
    }
    out << '\n';
  }
  return out.str();
}

std::string_view to_string(ErrorCategory c) { return kErrorCategories[static_cast<std::size_t>(c)]; }

ErrorCategory parse_error_category(std::string_view name) {
  for (std::size_t i = 0; i < kErrorCategories.size(); ++i) {
    if (kErrorCategories[i] == name) return static_cast<ErrorCategory>(i);
  }
  throw ValidationError("unknown error category '" + std::string(name) + "'");
}

std::string_view to_string(TranslationSystem s) { return s == TranslationSystem::mt ? "mt" : "unsup"; }

void ErrorRecord::validate() const {
  if (tweet_id.empty()) throw ValidationError("error record without tweet id");
  if (language != "ca" && language != "es") {
    throw ValidationError("error record '" + tweet_id + "': language must be ca or es");
  }
  if (flags.empty()) throw ValidationError("error record '" + tweet_id + "' has no error flags");
}

std::vector<ErrorTallyRow> tally_errors(std::span<const ErrorRecord> records) {
  using Key = std::pair<std::string, TranslationSystem>;
  std::map<Key, std::array<std::set<std::string>, kErrorCategoryCount>> tweets;
  // The four rows of the published table are always present, zero or not.
  for (const char* lang : {"ca", "es"}) {
    for (TranslationSystem s : {TranslationSystem::mt, TranslationSystem::unsup}) tweets[{lang, s}];
  }
  for (const ErrorRecord& r : records) {
    r.validate();
    auto& sets = tweets[{r.language, r.system}];
    for (ErrorCategory c : r.flags) sets[static_cast<std::size_t>(c)].insert(r.tweet_id);
  }
  std::vector<ErrorTallyRow> rows;
  for (const auto& [key, sets] : tweets) {
    ErrorTallyRow row;
    row.language = key.first;
    row.system = key.second;
    for (std::size_t c = 0; c < kErrorCategoryCount; ++c) {
      row.counts[c] = static_cast<int>(sets[c].size());
      row.total += row.counts[c];
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_error_table(std::span<const ErrorTallyRow> rows) {
  std::ostringstream out;
  out << "lang\tsystem";
  for (auto name : kErrorCategories) out << '\t' << name;
  out << "\tTotal\n";
  for (const auto& r : rows) {
    out << r.language << '\t' << to_string(r.system);
    for (int c : r.counts) out << '\t' << c;
    out << '\t' << r.total << '\n';
  }
  return out.str();
}

ErrorRecord error_record_from_json(const json& j) {
  try {
    ErrorRecord r;
    r.tweet_id = j.at("tweet_id").get<std::string>();
    const auto system = j.at("system").get<std::string>();
    if (system == "mt") {
      r.system = TranslationSystem::mt;
    } else if (system == "unsup") {
      r.system = TranslationSystem::unsup;
    } else {
      throw ValidationError("error record '" + r.tweet_id + "': system must be mt or unsup");
    }
    r.language = j.at("language").get<std::string>();
    for (const auto& f : j.at("flags")) r.flags.push_back(parse_error_category(f.get<std::string>()));
    r.validate();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed error record: ") + e.what());
  }
}

std::vector<ErrorRecord> load_error_records(const fs::path& path) {
  auto in = detail::open_input(path);
  std::vector<ErrorRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(error_record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace xlemo::harness
