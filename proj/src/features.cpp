#include "xlemo/features.hpp"

#include "xlemo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <utility>

namespace xlemo {

using nlohmann::json;

namespace {

constexpr int kVectorizerVersion = 1;

struct CodePoint {
  char32_t value;
  std::size_t length;
};

CodePoint decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  // Invalid byte: keep it as an opaque one-byte unit.
  return {0xFFFD, 1};
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0xA0 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x3000;
}

bool is_word(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  if (c == 0xFFFD) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  if (c >= 0x250 && c < 0x2000) return true;
  return (c >= 0x3040 && c <= 0x9FFF) || (c >= 0xAC00 && c <= 0xD7AF);
}

bool is_punct(char32_t c) {
  if (c < 0x80) return !is_word(c) && !is_space(c) && c >= 0x21 && c != 0x7F;
  return (c >= 0xA1 && c <= 0xBF) || c == 0xD7 || c == 0xF7 || (c >= 0x2010 && c <= 0x206F);
}

bool is_emoji_modifier(char32_t c) {
  return (c >= 0xFE00 && c <= 0xFE0F) || (c >= 0x1F3FB && c <= 0x1F3FF) || c == 0x20E3;
}

bool starts_with_ci(std::string_view text, std::size_t pos, std::string_view prefix) {
  if (text.size() - pos < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    char c = text[pos + k];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[k]) return false;
  }
  return true;
}

std::size_t consume_word(std::string_view text, std::size_t pos, std::string* out) {
  while (pos < text.size()) {
    const CodePoint cp = decode(text, pos);
    if (is_word(cp.value)) {
      if (out) encode(to_lower(cp.value), *out);
      pos += cp.length;
      continue;
    }
    // Apostrophes inside words ("don't") stay attached.
    if ((cp.value == '\'' || cp.value == 0x2019) && pos + cp.length < text.size() &&
        is_word(decode(text, pos + cp.length).value)) {
      if (out) encode(cp.value, *out);
      pos += cp.length;
      continue;
    }
    break;
  }
  return pos;
}

std::string join(std::span<const std::string> tokens, std::size_t from, std::size_t n) {
  std::string key = tokens[from];
  for (std::size_t k = 1; k < n; ++k) {
    key += ' ';
    key += tokens[from + k];
  }
  return key;
}

void check_range(const NgramRange& r, std::string_view what) {
  if (r.low < 1 || r.low > r.high) {
    throw ValidationError(std::string(what) + " range must satisfy 1 <= low <= high");
  }
}

std::vector<std::string> keys_in_index_order(const std::map<std::string, Eigen::Index>& vocab) {
  std::vector<std::string> keys(vocab.size());
  for (const auto& [key, idx] : vocab) keys[static_cast<std::size_t>(idx)] = key;
  return keys;
}

std::map<std::string, Eigen::Index> vocab_from_keys(const std::vector<std::string>& keys) {
  std::map<std::string, Eigen::Index> vocab;
  for (std::size_t i = 0; i < keys.size(); ++i) vocab.emplace(keys[i], static_cast<Eigen::Index>(i));
  return vocab;
}

json range_json(const std::optional<NgramRange>& r) {
  if (!r) return nullptr;
  return json::array({r->low, r->high});
}

std::optional<NgramRange> range_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 2) throw ValidationError("n-gram range must be [low, high]");
  return NgramRange{v[0], v[1]};
}

}  // namespace

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const CodePoint cp = decode(text, pos);
    if (cp.value == 0xFFFD && cp.length == 1) {
      out += text[pos];
    } else {
      encode(to_lower(cp.value), out);
    }
    pos += cp.length;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const CodePoint cp = decode(text, pos);
    if (is_space(cp.value)) {
      pos += cp.length;
      continue;
    }
    if (starts_with_ci(text, pos, "http://") || starts_with_ci(text, pos, "https://") ||
        starts_with_ci(text, pos, "www.")) {
      while (pos < text.size()) {
        const CodePoint c = decode(text, pos);
        if (is_space(c.value)) break;
        pos += c.length;
      }
      tokens.emplace_back("<url>");
      continue;
    }
    if ((cp.value == '@' || cp.value == '#') && pos + 1 < text.size() && is_word(decode(text, pos + 1).value)) {
      if (cp.value == '@') {
        pos = consume_word(text, pos + 1, nullptr);
        tokens.emplace_back("@user");
      } else {
        std::string tag = "#";
        pos = consume_word(text, pos + 1, &tag);
        tokens.push_back(std::move(tag));
      }
      continue;
    }
    if (is_word(cp.value)) {
      std::string word;
      pos = consume_word(text, pos, &word);
      tokens.push_back(std::move(word));
      continue;
    }
    if (is_punct(cp.value)) {
      std::string run;
      while (pos < text.size()) {
        const CodePoint c = decode(text, pos);
        if (!is_punct(c.value)) break;
        // A '#' or '@' that opens a hashtag or mention ends the run.
        if ((c.value == '#' || c.value == '@') && !run.empty() && pos + 1 < text.size() &&
            is_word(decode(text, pos + 1).value)) {
          break;
        }
        encode(c.value, run);
        pos += c.length;
      }
      tokens.push_back(std::move(run));
      continue;
    }
    // Emoji and other symbols: one token per symbol, modifiers attached.
    std::string symbol;
    encode(cp.value, symbol);
    pos += cp.length;
    while (pos < text.size()) {
      const CodePoint c = decode(text, pos);
      if (is_emoji_modifier(c.value)) {
        encode(c.value, symbol);
        pos += c.length;
      } else if (c.value == 0x200D && pos + c.length < text.size()) {
        encode(c.value, symbol);
        pos += c.length;
        const CodePoint next = decode(text, pos);
        encode(next.value, symbol);
        pos += next.length;
      } else {
        break;
      }
    }
    tokens.push_back(std::move(symbol));
  }
  return tokens;
}

std::optional<Eigen::Index> lookup_embedding(const EmbeddingTable& table, const std::string& token) {
  if (auto i = table.find(token)) return i;
  if (token.size() > 1 && token.front() == '#') return table.find(token.substr(1));
  return std::nullopt;
}

const std::map<std::size_t, double>* lookup_lexicon(const Lexicon& lexicon, const std::string& token) {
  if (auto* e = lexicon.find(token)) return e;
  if (token.size() > 1 && token.front() == '#') return lexicon.find(token.substr(1));
  return nullptr;
}

Eigen::VectorXd average_embedding(const EmbeddingTable& table, std::span<const std::string> tokens) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.dim());
  int matched = 0;
  for (const auto& tok : tokens) {
    if (auto i = lookup_embedding(table, tok)) {
      sum += table.row(*i).transpose();
      ++matched;
    }
  }
  if (matched > 0) sum /= static_cast<double>(matched);
  return sum;
}

std::vector<std::string> word_ngrams(std::span<const std::string> tokens, NgramRange range) {
  std::vector<std::string> out;
  for (int n = range.low; n <= range.high; ++n) {
    const auto len = static_cast<std::size_t>(n);
    if (tokens.size() < len) break;
    for (std::size_t i = 0; i + len <= tokens.size(); ++i) out.push_back(join(tokens, i, len));
  }
  return out;
}

std::vector<std::string> char_ngrams(std::string_view text, NgramRange range) {
  const std::string lower = lowercase(text);
  std::vector<std::size_t> starts;
  for (std::size_t pos = 0; pos < lower.size();) {
    starts.push_back(pos);
    pos += decode(lower, pos).length;
  }
  const std::size_t count = starts.size();
  starts.push_back(lower.size());
  std::vector<std::string> out;
  for (int n = range.low; n <= range.high; ++n) {
    const auto len = static_cast<std::size_t>(n);
    if (count < len) break;
    for (std::size_t i = 0; i + len <= count; ++i) {
      out.push_back(lower.substr(starts[i], starts[i + len] - starts[i]));
    }
  }
  return out;
}

FeatureConfig FeatureConfig::bag_of_words() {
  FeatureConfig c;
  c.word_ngrams = NgramRange{1, 1};
  c.char_ngrams = std::nullopt;
  c.use_embeddings = false;
  c.lexicons.clear();
  return c;
}

void FeatureConfig::validate() const {
  if (word_ngrams) check_range(*word_ngrams, "word n-gram");
  if (char_ngrams) check_range(*char_ngrams, "character n-gram");
  if (min_document_frequency < 1) throw ValidationError("min_document_frequency must be >= 1");
  std::set<std::string> names(lexicons.begin(), lexicons.end());
  if (names.size() != lexicons.size()) throw ValidationError("lexicon listed twice in feature config");
}

const Block* FittedVectorizer::block(std::string_view name) const {
  for (const Block& b : blocks_) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

Eigen::Index FittedVectorizer::total_dim() const {
  return blocks_.empty() ? 0 : blocks_.back().offset + blocks_.back().width;
}

void FittedVectorizer::layout() {
  blocks_.clear();
  Eigen::Index offset = 0;
  auto add = [&](std::string name, Eigen::Index width) {
    blocks_.push_back(Block{std::move(name), offset, width});
    offset += width;
  };
  if (config_.word_ngrams) add("word_ngrams", static_cast<Eigen::Index>(word_vocab_.size()));
  if (config_.char_ngrams) add("char_ngrams", static_cast<Eigen::Index>(char_vocab_.size()));
  if (config_.use_embeddings) add("embeddings", embedding_dim_);
  for (const auto& lex : lexicons_) {
    add("lexicon:" + lex->name, static_cast<Eigen::Index>(lex->dimensions.size()) + 1);
  }
}

FittedVectorizer fit(const Corpus& corpus, const FeatureConfig& config,
                     std::shared_ptr<const EmbeddingTable> embeddings,
                     std::vector<std::shared_ptr<const Lexicon>> available) {
  config.validate();
  if (corpus.empty()) throw ValidationError("cannot fit features on an empty corpus");
  if (config.use_embeddings && !embeddings) {
    throw ValidationError("embedding features requested but no embedding table supplied");
  }

  FittedVectorizer v;
  v.config_ = config;
  if (config.use_embeddings) {
    v.embedding_dim_ = embeddings->dim();
    v.embeddings_ = std::move(embeddings);
  }
  for (const auto& name : config.lexicons) {
    auto it = std::find_if(available.begin(), available.end(),
                           [&](const auto& lex) { return lex && lex->name == name; });
    if (it == available.end()) throw ValidationError("lexicon '" + name + "' not supplied");
    v.lexicons_.push_back(*it);
  }

  std::map<std::string, int> word_df;
  std::map<std::string, int> char_df;
  for (const Item& item : corpus.items) {
    if (config.word_ngrams) {
      const auto tokens = tokenize(item.text);
      const auto grams = word_ngrams(tokens, *config.word_ngrams);
      for (const auto& g : std::set<std::string>(grams.begin(), grams.end())) ++word_df[g];
    }
    if (config.char_ngrams) {
      const auto grams = char_ngrams(item.text, *config.char_ngrams);
      for (const auto& g : std::set<std::string>(grams.begin(), grams.end())) ++char_df[g];
    }
  }
  auto build = [&](const std::map<std::string, int>& df, std::map<std::string, Eigen::Index>& vocab) {
    Eigen::Index next = 0;
    for (const auto& [key, count] : df) {
      if (count >= config.min_document_frequency) vocab.emplace(key, next++);
    }
  };
  build(word_df, v.word_vocab_);
  build(char_df, v.char_vocab_);
  v.layout();
  return v;
}

FeatureVector FittedVectorizer::transform(std::string_view text) const {
  std::vector<std::pair<Eigen::Index, double>> entries;
  const auto tokens = tokenize(text);

  auto add_counts = [&](const std::vector<std::string>& grams, const std::map<std::string, Eigen::Index>& vocab,
                        Eigen::Index offset) {
    std::map<Eigen::Index, double> counts;
    for (const auto& g : grams) {
      auto it = vocab.find(g);
      if (it != vocab.end()) counts[it->second] += 1.0;
    }
    for (const auto& [idx, c] : counts) entries.emplace_back(offset + idx, c);
  };

  for (const Block& b : blocks_) {
    if (b.name == "word_ngrams") {
      add_counts(word_ngrams(tokens, *config_.word_ngrams), word_vocab_, b.offset);
    } else if (b.name == "char_ngrams") {
      add_counts(char_ngrams(text, *config_.char_ngrams), char_vocab_, b.offset);
    } else if (b.name == "embeddings") {
      const Eigen::VectorXd avg = average_embedding(*embeddings_, tokens);
      for (Eigen::Index k = 0; k < avg.size(); ++k) {
        if (avg(k) != 0.0) entries.emplace_back(b.offset + k, avg(k));
      }
    }
  }
  for (std::size_t l = 0; l < lexicons_.size(); ++l) {
    const Lexicon& lex = *lexicons_[l];
    const Block* b = block("lexicon:" + lex.name);
    std::vector<double> sums(lex.dimensions.size(), 0.0);
    double matches = 0.0;
    for (const auto& tok : tokens) {
      if (const auto* scores = lookup_lexicon(lex, tok)) {
        for (const auto& [dim, score] : *scores) sums[dim] += score;
        matches += 1.0;
      }
    }
    for (std::size_t d = 0; d < sums.size(); ++d) {
      if (sums[d] != 0.0) entries.emplace_back(b->offset + static_cast<Eigen::Index>(d), sums[d]);
    }
    if (matches > 0.0) entries.emplace_back(b->offset + b->width - 1, matches);
  }

  std::sort(entries.begin(), entries.end());
  FeatureVector x(total_dim());
  x.reserve(static_cast<Eigen::Index>(entries.size()));
  for (const auto& [idx, value] : entries) x.insertBack(idx) = value;
  return x;
}

std::vector<FeatureVector> FittedVectorizer::transform(const Corpus& corpus) const {
  std::vector<FeatureVector> rows;
  rows.reserve(corpus.size());
  for (const Item& item : corpus.items) rows.push_back(transform(item));
  return rows;
}

FittedVectorizer FittedVectorizer::with_embeddings(std::shared_ptr<const EmbeddingTable> table) const {
  if (!config_.use_embeddings) throw ValidationError("vectorizer has no embedding block");
  if (!table || table->dim() != embedding_dim_) {
    throw ValidationError("replacement embedding table must have dimension " + std::to_string(embedding_dim_));
  }
  FittedVectorizer copy = *this;
  copy.embeddings_ = std::move(table);
  return copy;
}

json to_json(const FeatureConfig& c) {
  return json{{"word_ngram_range", range_json(c.word_ngrams)},
              {"char_ngram_range", range_json(c.char_ngrams)},
              {"use_embeddings", c.use_embeddings},
              {"use_lexicons", c.lexicons},
              {"min_document_frequency", c.min_document_frequency}};
}

FeatureConfig feature_config_from_json(const json& j) {
  try {
    FeatureConfig c;
    if (j.contains("word_ngram_range")) c.word_ngrams = range_from_json(j.at("word_ngram_range"));
    if (j.contains("char_ngram_range")) c.char_ngrams = range_from_json(j.at("char_ngram_range"));
    c.use_embeddings = j.value("use_embeddings", c.use_embeddings);
    c.lexicons = j.value("use_lexicons", c.lexicons);
    c.min_document_frequency = j.value("min_document_frequency", c.min_document_frequency);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad feature config: ") + e.what());
  }
}

json FittedVectorizer::to_json() const {
  json blocks = json::array();
  for (const Block& b : blocks_) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"width", b.width}});
  json lexicons = json::array();
  for (const auto& lex : lexicons_) lexicons.push_back({{"name", lex->name}, {"dimensions", lex->dimensions}});
  return json{{"format", "xlemo.vectorizer"},
              {"version", kVectorizerVersion},
              {"config", xlemo::to_json(config_)},
              {"blocks", blocks},
              {"total_dim", total_dim()},
              {"embedding_dim", embedding_dim_},
              {"lexicons", lexicons},
              {"word_vocabulary", keys_in_index_order(word_vocab_)},
              {"char_vocabulary", keys_in_index_order(char_vocab_)}};
}

FittedVectorizer FittedVectorizer::from_json(const json& doc, std::shared_ptr<const EmbeddingTable> embeddings,
                                             std::vector<std::shared_ptr<const Lexicon>> lexicons) {
  try {
    if (doc.value("format", "") != "xlemo.vectorizer") throw ValidationError("not a vectorizer document");
    if (doc.at("version").get<int>() != kVectorizerVersion) {
      throw ValidationError("unsupported vectorizer version " + doc.at("version").dump());
    }
    FittedVectorizer v;
    v.config_ = feature_config_from_json(doc.at("config"));
    v.word_vocab_ = vocab_from_keys(doc.at("word_vocabulary").get<std::vector<std::string>>());
    v.char_vocab_ = vocab_from_keys(doc.at("char_vocabulary").get<std::vector<std::string>>());
    if (v.config_.use_embeddings) {
      v.embedding_dim_ = doc.at("embedding_dim").get<Eigen::Index>();
      if (!embeddings) throw ValidationError("vectorizer needs an embedding table");
      if (embeddings->dim() != v.embedding_dim_) {
        throw ValidationError("embedding table dimension " + std::to_string(embeddings->dim()) +
                              " does not match vectorizer dimension " + std::to_string(v.embedding_dim_));
      }
      v.embeddings_ = std::move(embeddings);
    }
    for (const auto& rec : doc.at("lexicons")) {
      const auto name = rec.at("name").get<std::string>();
      const auto dims = rec.at("dimensions").get<std::vector<std::string>>();
      auto it = std::find_if(lexicons.begin(), lexicons.end(),
                             [&](const auto& lex) { return lex && lex->name == name; });
      if (it == lexicons.end()) throw ValidationError("vectorizer needs lexicon '" + name + "'");
      if ((*it)->dimensions != dims) throw ValidationError("lexicon '" + name + "' dimensions changed since fit");
      v.lexicons_.push_back(*it);
    }
    v.layout();
    if (v.total_dim() != doc.at("total_dim").get<Eigen::Index>()) {
      throw ValidationError("vectorizer layout does not match recorded total_dim");
    }
    return v;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed vectorizer document: ") + e.what());
  }
}

}  // namespace xlemo
