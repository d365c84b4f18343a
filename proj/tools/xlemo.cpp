// xlemo: command-line front end for annotation, regression and transfer.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include "xlemo/annotation_service.hpp"
#include "xlemo/bws.hpp"
#include "xlemo/crosslingual.hpp"
#include "xlemo/data_model.hpp"
#include "xlemo/errors.hpp"
#include "xlemo/features.hpp"
#include "xlemo/harness.hpp"
#include "xlemo/metrics.hpp"
#include "xlemo/svr.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xlemo;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json load_json(const fs::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Runs `body` with a stream bound to `path`, or stdout when empty.
void with_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  body(out);
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

void save_json(const std::string& path, const json& doc) {
  with_output(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

std::optional<NgramRange> parse_range(const std::string& text) {
  if (text == "none" || text == "off") return std::nullopt;
  const auto comma = text.find_first_of(",-:");
  try {
    if (comma == std::string::npos) {
      const int n = std::stoi(text);
      return NgramRange{n, n};
    }
    return NgramRange{std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ValidationError("bad n-gram range '" + text + "' (expected LOW,HIGH or none)");
  }
}

std::vector<std::shared_ptr<const Lexicon>> load_lexicons(const std::vector<std::string>& paths) {
  std::vector<std::shared_ptr<const Lexicon>> out;
  for (const auto& p : paths) out.push_back(std::make_shared<const Lexicon>(load_lexicon(p)));
  return out;
}

std::shared_ptr<const EmbeddingTable> maybe_embeddings(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const EmbeddingTable>(load_embeddings(path));
}

Corpus load_for_emotion(const std::string& path, const std::string& emotion, Split split,
                        const std::string& language = "en") {
  Corpus corpus = load_wassa_tsv(path, split, language);
  if (emotion.empty()) return corpus;
  const Emotion e = parse_emotion(emotion);
  std::erase_if(corpus.items, [&](const Item& it) { return it.emotion != e; });
  return corpus;
}

/// Flat config keys become "--key value" tokens right after the
/// subcommand, so explicit flags (parsed later, last one wins) override them.
std::vector<std::string> inject_config(std::vector<std::string> args) {
  if (args.size() < 2) return args;
  const std::string& sub = args[1];
  if (sub == "run" || sub == "ablate") return args;
  std::optional<std::string> path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  const json doc = load_json(*path);
  if (!doc.is_object()) throw ValidationError("config '" + *path + "' must be a JSON object");
  std::vector<std::string> tokens;
  auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : doc.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value.is_null()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        tokens.push_back(flag);
        tokens.push_back(scalar(v));
      }
    } else if (value.is_object()) {
      throw ValidationError("config key '" + key + "' must be a scalar or a list");
    } else {
      tokens.push_back(flag);
      tokens.push_back(scalar(value));
    }
  }
  args.insert(args.begin() + 2, tokens.begin(), tokens.end());
  return args;
}

struct Common {
  std::uint64_t seed = 0;
  std::string config;
};

CLI::App* subcommand(CLI::App& app, const char* name, const char* about, Common& common) {
  CLI::App* sub = app.add_subcommand(name, about);
  sub->add_option("--seed", common.seed, "Random seed");
  sub->add_option("--config", common.config, "JSON config file");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xlemo: emotion intensity annotation, regression and cross-lingual transfer"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Common common;

  // tuples
  std::string items_path, out_path, emotion_name;
  int appearances = 8;
  auto* tuples_cmd = subcommand(app, "tuples", "Generate balanced BWS 4-tuples", common);
  tuples_cmd->add_option("--items", items_path, "Annotation corpus (WASSA TSV)")->required();
  tuples_cmd->add_option("--emotion", emotion_name, "Emotion the tuples are annotated for")->required();
  tuples_cmd->add_option("--appearances", appearances, "Appearances per item");
  tuples_cmd->add_option("--out", out_path, "Output JSONL (default stdout)");

  // score / reliability
  std::string tuples_path, judgments_path;
  int iterations = bws::kDefaultReliabilityIterations;
  auto* score_cmd = subcommand(app, "score", "Best-minus-worst scores from judgments", common);
  score_cmd->add_option("--tuples", tuples_path)->required();
  score_cmd->add_option("--judgments", judgments_path)->required();
  score_cmd->add_option("--emotion", emotion_name, "Emotion (needed when tuples mix emotions)");
  score_cmd->add_option("--items", items_path, "Corpus to take item texts from");
  score_cmd->add_option("--out", out_path, "Output WASSA TSV (default stdout)");

  auto* rel_cmd = subcommand(app, "reliability", "Split-half reliability", common);
  rel_cmd->add_option("--tuples", tuples_path)->required();
  rel_cmd->add_option("--judgments", judgments_path)->required();
  rel_cmd->add_option("--emotion", emotion_name);
  rel_cmd->add_option("--iterations", iterations);

  // featurize / train / predict / eval
  std::string train_path, dev_path, test_path, embeddings_path, vectorizer_path, model_path, input_path;
  std::vector<std::string> lexicon_paths;
  std::string word_range = "1,4", char_range = "3,5";
  int min_df = 1;
  bool bow = false, clip = false;
  auto* feat_cmd = subcommand(app, "featurize", "Fit a feature vectorizer on a training corpus", common);
  feat_cmd->add_option("--train", train_path)->required();
  feat_cmd->add_option("--emotion", emotion_name);
  feat_cmd->add_option("--embeddings", embeddings_path, "word2vec text table");
  feat_cmd->add_option("--lexicon", lexicon_paths, "Lexicon TSV (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  feat_cmd->add_option("--word-ngrams", word_range, "LOW,HIGH or none");
  feat_cmd->add_option("--char-ngrams", char_range, "LOW,HIGH or none");
  feat_cmd->add_option("--min-df", min_df, "Minimum document frequency");
  feat_cmd->add_flag("--bow", bow, "Word unigrams only");
  feat_cmd->add_option("--out", out_path, "Vectorizer JSON")->required();

  svr::SvrConfig svr_config;
  auto* train_cmd = subcommand(app, "train", "Train an epsilon-SVR on vectorized features", common);
  train_cmd->add_option("--train", train_path)->required();
  train_cmd->add_option("--emotion", emotion_name);
  train_cmd->add_option("--vectorizer", vectorizer_path)->required();
  train_cmd->add_option("--embeddings", embeddings_path);
  train_cmd->add_option("--lexicon", lexicon_paths)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  train_cmd->add_option("--C", svr_config.C);
  train_cmd->add_option("--epsilon", svr_config.epsilon);
  train_cmd->add_option("--tolerance", svr_config.tolerance);
  train_cmd->add_option("--max-iterations", svr_config.max_iterations);
  train_cmd->add_option("--out", out_path, "Model JSON")->required();

  auto* predict_cmd = subcommand(app, "predict", "Predict intensities with a trained model", common);
  predict_cmd->add_option("--model", model_path)->required();
  predict_cmd->add_option("--vectorizer", vectorizer_path)->required();
  predict_cmd->add_option("--input", input_path, "WASSA TSV to score")->required();
  predict_cmd->add_option("--emotion", emotion_name);
  predict_cmd->add_option("--embeddings", embeddings_path);
  predict_cmd->add_option("--lexicon", lexicon_paths)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  predict_cmd->add_flag("--clip", clip, "Clip predictions to [0,1]");
  predict_cmd->add_option("--out", out_path, "Predictions TSV (default stdout)");

  std::string predictions_path, gold_path;
  auto* eval_cmd = subcommand(app, "eval", "Pearson and Spearman of predictions against gold", common);
  eval_cmd->add_option("--predictions", predictions_path, "id<TAB>prediction[...] TSV")->required();
  eval_cmd->add_option("--gold", gold_path, "Gold WASSA TSV")->required();
  eval_cmd->add_option("--emotion", emotion_name);

  // align / blse
  std::string src_emb_path, tgt_emb_path, dict_path, mapped_out, test_language = "es";
  auto* align_cmd = subcommand(app, "align", "Orthogonal Procrustes alignment with a seed dictionary", common);
  align_cmd->add_option("--source-embeddings", src_emb_path)->required();
  align_cmd->add_option("--target-embeddings", tgt_emb_path)->required();
  align_cmd->add_option("--dictionary", dict_path)->required();
  align_cmd->add_option("--out", out_path, "Alignment JSON")->required();
  align_cmd->add_option("--mapped-out", mapped_out, "Write the mapped source table here");

  xling::BlseConfig blse_config;
  auto* blse_cmd = subcommand(app, "blse", "Train joint bilingual regression (BLSE-MSE)", common);
  blse_cmd->add_option("--train", train_path)->required();
  blse_cmd->add_option("--dev", dev_path)->required();
  blse_cmd->add_option("--test", test_path, "Target-language corpus to score");
  blse_cmd->add_option("--test-language", test_language);
  blse_cmd->add_option("--emotion", emotion_name)->required();
  blse_cmd->add_option("--source-embeddings", src_emb_path)->required();
  blse_cmd->add_option("--target-embeddings", tgt_emb_path)->required();
  blse_cmd->add_option("--dictionary", dict_path)->required();
  blse_cmd->add_option("--epochs", blse_config.epochs);
  blse_cmd->add_option("--learning-rate", blse_config.learning_rate);
  blse_cmd->add_option("--alpha", blse_config.alpha, "Weight of the projection loss");
  blse_cmd->add_option("--batch-size", blse_config.batch_size);
  blse_cmd->add_option("--out", out_path, "Model JSON")->required();
  blse_cmd->add_option("--predictions-out", predictions_path, "Test predictions TSV");

  // run / ablate
  std::string output_dir, method_name;
  std::vector<std::string> groups;
  auto* run_cmd = subcommand(app, "run", "Run an experiment config and print the results table", common);
  run_cmd->add_option("--emotion", emotion_name, "Run only this emotion");
  run_cmd->add_option("--method", method_name, "Override the configured method");
  run_cmd->add_option("--output", output_dir, "Report directory");
  run_cmd->add_flag("--clip", clip, "Clip exported predictions to [0,1]");

  auto* ablate_cmd = subcommand(app, "ablate", "Feature ablation over an experiment config", common);
  ablate_cmd->add_option("--emotion", emotion_name, "Run only this emotion");
  ablate_cmd->add_option("--groups", groups, "Groups to remove (ngrams char embs hashtag emo sent all-lex)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',');

  // error-tally
  std::string records_path;
  auto* tally_cmd = subcommand(app, "error-tally", "Tally translation-error annotations", common);
  tally_cmd->add_option("--records", records_path, "JSONL error records")->required();

  // serve
  std::string campaign_id = "default", log_path, host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = subcommand(app, "serve", "Serve an annotation campaign over HTTP", common);
  serve_cmd->add_option("--campaign", campaign_id);
  serve_cmd->add_option("--items", items_path)->required();
  serve_cmd->add_option("--tuples", tuples_path)->required();
  serve_cmd->add_option("--log", log_path, "Judgment log (JSONL, appended)")->required();
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = inject_config(std::move(args));
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  auto emotion_filter = [&](const std::vector<bws::Tuple4>& tuples) {
    if (!emotion_name.empty()) return bws::tuples_for(tuples, parse_emotion(emotion_name));
    return tuples;
  };

  try {
    if (*tuples_cmd) {
      const Corpus items = load_wassa_tsv(items_path, Split::train);
      std::vector<std::string> ids;
      for (const Item& it : items.items) ids.push_back(it.id);
      const auto tuples = bws::generate_tuples(ids, appearances, common.seed, parse_emotion(emotion_name));
      with_output(out_path, [&](std::ostream& out) { bws::write_tuples_jsonl(out, tuples); });
      std::cerr << tuples.size() << " tuples over " << ids.size() << " items\n";
    } else if (*score_cmd) {
      const auto tuples = emotion_filter(bws::load_tuples_jsonl(tuples_path));
      const auto judgments = bws::judgments_for(tuples, bws::load_judgments_jsonl(judgments_path));
      const auto table = bws::aggregate_scores(tuples, judgments);
      std::optional<Corpus> items;
      if (!items_path.empty()) items = load_wassa_tsv(items_path, Split::train);
      const Corpus scored = bws::to_corpus(table, items ? &*items : nullptr);
      with_output(out_path, [&](std::ostream& out) { write_wassa_tsv(out, scored); });
    } else if (*rel_cmd) {
      const auto tuples = emotion_filter(bws::load_tuples_jsonl(tuples_path));
      const auto judgments = bws::judgments_for(tuples, bws::load_judgments_jsonl(judgments_path));
      const auto r = bws::split_half_reliability(tuples, judgments, iterations, common.seed);
      std::cout << "pearson\t" << bws::format_mean_std(r.pearson) << "\nspearman\t"
                << bws::format_mean_std(r.spearman) << '\n';
    } else if (*feat_cmd) {
      const Corpus train = load_for_emotion(train_path, emotion_name, Split::train);
      FeatureConfig fc;
      if (bow) {
        fc = FeatureConfig::bag_of_words();
        if (!embeddings_path.empty() || !lexicon_paths.empty()) {
          throw ValidationError("--bow takes no embeddings or lexicons");
        }
      } else {
        fc.word_ngrams = parse_range(word_range);
        fc.char_ngrams = parse_range(char_range);
        fc.use_embeddings = !embeddings_path.empty();
      }
      fc.min_document_frequency = min_df;
      const auto lexicons = load_lexicons(lexicon_paths);
      for (const auto& l : lexicons) fc.lexicons.push_back(l->name);
      const auto vectorizer = fit(train, fc, maybe_embeddings(embeddings_path), lexicons);
      save_json(out_path, vectorizer.to_json());
      std::cerr << "feature dimension " << vectorizer.total_dim() << '\n';
    } else if (*train_cmd) {
      const Corpus train = load_for_emotion(train_path, emotion_name, Split::train);
      if (!train.labeled()) throw ValidationError("training corpus has unlabeled items");
      const auto vectorizer = FittedVectorizer::from_json(load_json(vectorizer_path), maybe_embeddings(embeddings_path),
                                                          load_lexicons(lexicon_paths));
      std::vector<double> y;
      for (const Item& it : train.items) y.push_back(*it.gold_score);
      svr_config.seed = common.seed;
      const auto model = svr::train(vectorizer.transform(train), y, svr_config);
      save_json(out_path, model.to_json());
      std::cerr << "passes " << model.passes << (model.converged ? " (converged)" : " (iteration cap)") << '\n';
    } else if (*predict_cmd) {
      const auto model = svr::SvrModel::from_json(load_json(model_path));
      const auto vectorizer = FittedVectorizer::from_json(load_json(vectorizer_path), maybe_embeddings(embeddings_path),
                                                          load_lexicons(lexicon_paths));
      const Corpus input = load_for_emotion(input_path, emotion_name, Split::test);
      with_output(out_path, [&](std::ostream& out) {
        for (const Item& it : input.items) {
          double p = svr::predict(model, vectorizer.transform(it));
          if (clip) p = svr::clip_unit(p);
          out << it.id << '\t' << format_decimal(p) << '\n';
        }
      });
    } else if (*eval_cmd) {
      const Corpus gold = load_for_emotion(gold_path, emotion_name, Split::test);
      std::map<std::string, double> predicted;
      std::istringstream lines(slurp(predictions_path));
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ValidationError("predictions line " + std::to_string(line_no) + ": no tab");
        const auto rest = line.substr(tab + 1);
        const auto value = parse_decimal(rest.substr(0, rest.find('\t')));
        if (!value) throw ValidationError("predictions line " + std::to_string(line_no) + ": bad number");
        predicted[line.substr(0, tab)] = *value;
      }
      std::vector<double> p, g;
      for (const Item& it : gold.items) {
        if (!it.gold_score) continue;
        auto found = predicted.find(it.id);
        if (found == predicted.end()) throw ValidationError("no prediction for gold item '" + it.id + "'");
        p.push_back(found->second);
        g.push_back(*it.gold_score);
      }
      const Correlations c = correlate(p, g);
      std::cout << "n\t" << p.size() << "\npearson\t" << format_decimal(c.pearson) << "\nspearman\t"
                << format_decimal(c.spearman) << '\n';
    } else if (*align_cmd) {
      const auto src = load_embeddings(src_emb_path);
      const auto map = xling::procrustes_align(src, load_embeddings(tgt_emb_path), load_dictionary(dict_path));
      save_json(out_path, map.to_json());
      if (!mapped_out.empty()) {
        with_output(mapped_out, [&](std::ostream& out) { write_embeddings(out, xling::map_embeddings(map, src)); });
      }
      std::cerr << "pairs used " << map.pairs_used << ", dropped " << map.pairs_dropped << '\n';
    } else if (*blse_cmd) {
      const auto src = load_embeddings(src_emb_path);
      const auto tgt = load_embeddings(tgt_emb_path);
      const Corpus train = load_for_emotion(train_path, emotion_name, Split::train);
      const Corpus dev = load_for_emotion(dev_path, emotion_name, Split::dev);
      blse_config.seed = common.seed;
      const auto model = xling::train_blse(train, src, tgt, load_dictionary(dict_path), dev, blse_config);
      save_json(out_path, model.to_json());
      std::cerr << "best epoch " << model.best_epoch + 1 << " of " << model.history.size() << '\n';
      if (!test_path.empty()) {
        const Corpus test = load_for_emotion(test_path, emotion_name, Split::test, test_language);
        std::vector<double> p, g;
        with_output(predictions_path, [&](std::ostream& out) {
          for (const Item& it : test.items) {
            const double v = xling::predict_blse(model, it, tgt, xling::Side::target);
            out << it.id << '\t' << format_decimal(v) << '\n';
            if (it.gold_score) {
              p.push_back(v);
              g.push_back(*it.gold_score);
            }
          }
        });
        if (p.size() >= 2) std::cerr << "test pearson " << format_decimal(pearson(std::span<const double>(p), std::span<const double>(g))) << '\n';
      }
    } else if (*run_cmd || *ablate_cmd) {
      if (common.config.empty()) throw ValidationError("--config <experiment.json> is required");
      harness::ExperimentConfig base = harness::load_experiment_config(common.config);
      if (run_cmd->count("--seed")) base.seed = common.seed;
      if (!method_name.empty()) base.method = harness::parse_method(method_name);
      std::vector<Emotion> emotions;
      if (!emotion_name.empty()) {
        emotions.push_back(parse_emotion(emotion_name));
      } else {
        const json raw = load_json(common.config);
        if (raw.contains("emotions")) {
          for (const auto& e : raw.at("emotions")) emotions.push_back(parse_emotion(e.get<std::string>()));
        } else {
          emotions.push_back(base.emotion);
        }
      }
      base.emotion = emotions.front();
      const harness::Resources resources = harness::load_resources(base);
      if (*run_cmd) {
        if (!output_dir.empty()) base.output = output_dir;
        const std::optional<fs::path> dir = base.output;
        base.output.reset();
        std::vector<harness::ReportRow> rows;
        for (Emotion e : emotions) {
          base.emotion = e;
          rows.push_back(harness::run_experiment(base, resources));
        }
        if (dir) harness::write_report(*dir, rows, clip);
        std::cout << harness::format_results_table(rows);
      } else {
        if (ablate_cmd->count("--seed")) base.seed = common.seed;
        harness::AblationSpec spec;
        if (!groups.empty()) {
          spec.groups.clear();
          for (const auto& g : groups) spec.groups.push_back(harness::parse_feature_group(g));
        }
        std::vector<harness::AblationTable> tables;
        for (Emotion e : emotions) {
          base.emotion = e;
          tables.push_back(harness::run_ablation(base, resources, spec));
        }
        std::cout << harness::format_ablation_table(tables);
      }
    } else if (*tally_cmd) {
      const auto records = harness::load_error_records(records_path);
      std::cout << harness::format_error_table(harness::tally_errors(records));
    } else if (*serve_cmd) {
      auto campaign = std::make_shared<service::Campaign>(campaign_id, load_wassa_tsv(items_path, Split::train),
                                                          bws::load_tuples_jsonl(tuples_path), log_path);
      auto registry = std::make_shared<service::Registry>();
      registry->add(campaign);
      service::HttpServer server(registry);
      const int bound = server.bind(host, port);
      std::cerr << "campaign '" << campaign_id << "': " << campaign->tuple_count() << " tuples, "
                << campaign->snapshot().size() << " judgments replayed";
      if (campaign->recovered_bytes() > 0) std::cerr << ", torn tail of " << campaign->recovered_bytes() << " bytes dropped";
      std::cerr << "\nlistening on http://" << host << ':' << bound << '\n';
      server.listen();
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
