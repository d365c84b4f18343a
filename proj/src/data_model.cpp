#include "xlemo/data_model.hpp"

#include "xlemo/errors.hpp"
#include "io_util.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace xlemo {

namespace {

constexpr std::array<std::pair<Emotion, std::string_view>, 6> kEmotionNames{{
    {Emotion::anger, "anger"},
    {Emotion::fear, "fear"},
    {Emotion::joy, "joy"},
    {Emotion::sadness, "sadness"},
    {Emotion::disgust, "disgust"},
    {Emotion::surprise, "surprise"},
}};

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

std::string_view to_string(Emotion e) {
  for (const auto& [emotion, name] : kEmotionNames) {
    if (emotion == e) return name;
  }
  return "unknown";
}

std::optional<Emotion> try_parse_emotion(std::string_view name) {
  const std::string lower = ascii_lower(name);
  for (const auto& [emotion, n] : kEmotionNames) {
    if (n == lower) return emotion;
  }
  return std::nullopt;
}

Emotion parse_emotion(std::string_view name) {
  if (auto e = try_parse_emotion(name)) return *e;
  throw ValidationError("unknown emotion '" + std::string(name) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  const std::string lower = ascii_lower(name);
  if (lower == "train") return Split::train;
  if (lower == "dev") return Split::dev;
  if (lower == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

bool Corpus::labeled() const {
  return std::all_of(items.begin(), items.end(),
                     [](const Item& it) { return it.gold_score.has_value(); });
}

void validate(const Corpus& corpus) {
  std::set<std::string_view> seen;
  for (const Item& item : corpus.items) {
    if (!seen.insert(item.id).second) {
      throw ValidationError("duplicate item id '" + item.id + "'");
    }
    if (item.language != corpus.language) {
      throw ValidationError("item '" + item.id + "' has language " + item.language +
                            " in a " + corpus.language + " corpus");
    }
    if (item.gold_score && !(*item.gold_score >= 0.0 && *item.gold_score <= 1.0)) {
      throw ValidationError("item '" + item.id + "' score outside [0,1]");
    }
  }
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, RowMatrixXd vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows()) {
    throw ValidationError("embedding table has " + std::to_string(words_.size()) + " words but " +
                          std::to_string(vectors_.rows()) + " vectors");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<Eigen::Index>(i)).second) {
      throw ValidationError("duplicate embedding word '" + words_[i] + "'");
    }
  }
}

std::optional<Eigen::Index> EmbeddingTable::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::map<std::size_t, double>* Lexicon::find(const std::string& term) const {
  auto it = entries.find(term);
  return it == entries.end() ? nullptr : &it->second;
}

std::optional<double> parse_decimal(std::string_view s) {
  std::string_view body = s;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) body.remove_prefix(1);
  if (body.empty()) return std::nullopt;
  bool digits = false;
  bool dot = false;
  for (char c : body) {
    if (c >= '0' && c <= '9') {
      digits = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      return std::nullopt;
    }
  }
  if (!digits) return std::nullopt;
  return parse_real(s);
}

std::string format_decimal(double v) {
  std::array<char, 512> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
  if (ec != std::errc()) throw ValidationError("cannot format score");
  return std::string(buf.data(), ptr);
}

Corpus read_wassa_tsv(std::istream& in, Split split, std::string language) {
  Corpus corpus;
  corpus.split = split;
  corpus.language = language;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 4) {
      throw ValidationError(at_line(line_no) + "expected 4 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    Item item;
    item.id = std::string(fields[0]);
    item.text = std::string(fields[1]);
    item.language = language;
    auto emotion = try_parse_emotion(fields[2]);
    if (!emotion) throw ValidationError(at_line(line_no) + "unknown emotion '" + std::string(fields[2]) + "'");
    item.emotion = *emotion;
    if (fields[3] != "NONE") {
      auto score = parse_decimal(fields[3]);
      if (!score) throw ValidationError(at_line(line_no) + "unparseable score '" + std::string(fields[3]) + "'");
      if (*score < 0.0 || *score > 1.0) {
        throw ValidationError(at_line(line_no) + "score " + std::string(fields[3]) + " outside [0,1]");
      }
      item.gold_score = *score;
    }
    if (item.id.empty()) throw ValidationError(at_line(line_no) + "empty id");
    if (!ids.insert(item.id).second) throw ValidationError(at_line(line_no) + "duplicate id '" + item.id + "'");
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

Corpus load_wassa_tsv(const std::filesystem::path& path, Split split, std::string language) {
  auto in = detail::open_input(path);
  return read_wassa_tsv(in, split, std::move(language));
}

void write_wassa_tsv(std::ostream& out, const Corpus& corpus) {
  for (const Item& item : corpus.items) {
    for (const std::string* field : {&item.id, &item.text}) {
      if (field->find_first_of("\t\n") != std::string::npos) {
        throw ValidationError("item '" + item.id + "' contains a tab or newline");
      }
    }
    out << item.id << '\t' << item.text << '\t' << to_string(item.emotion) << '\t'
        << (item.gold_score ? format_decimal(*item.gold_score) : std::string("NONE")) << '\n';
  }
}

void save_wassa_tsv(const std::filesystem::path& path, const Corpus& corpus) {
  auto out = detail::open_output(path);
  write_wassa_tsv(out, corpus);
  detail::close_output(out, path);
}

EmbeddingTable read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("embedding file is empty (missing 'V D' header)");
  std::istringstream header(line);
  long long vocab = -1;
  long long dim = -1;
  if (!(header >> vocab >> dim) || vocab < 0 || dim <= 0) {
    throw ValidationError("bad embedding header '" + line + "'");
  }

  std::vector<std::string> words;
  std::vector<double> values;
  std::set<std::string> seen;
  std::size_t duplicates = 0;
  while (static_cast<long long>(words.size()) < vocab && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tokens = detail::split_spaces(line);
    if (tokens.empty()) continue;
    const std::string word(tokens.front());
    if (static_cast<long long>(tokens.size()) - 1 != dim) {
      throw ValidationError("embedding for '" + word + "' has " + std::to_string(tokens.size() - 1) +
                            " values, expected " + std::to_string(dim));
    }
    if (seen.count(word)) {
      ++duplicates;
      continue;
    }
    const std::size_t start = values.size();
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      auto v = parse_real(tokens[k]);
      if (!v) {
        values.resize(start);
        throw ValidationError("embedding for '" + word + "' has unparseable value '" +
                              std::string(tokens[k]) + "'");
      }
      values.push_back(*v);
    }
    seen.insert(word);
    words.push_back(word);
  }
  RowMatrixXd vectors = Eigen::Map<RowMatrixXd>(values.data(), static_cast<Eigen::Index>(words.size()), dim);
  EmbeddingTable table(std::move(words), std::move(vectors));
  table.duplicates_ignored = duplicates;
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words()[i];
    for (Eigen::Index k = 0; k < table.dim(); ++k) {
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(),
                                     table.vectors()(static_cast<Eigen::Index>(i), k));
      out << ' ' << std::string_view(buf.data(), static_cast<std::size_t>(ptr - buf.data()));
    }
    out << '\n';
  }
}

Lexicon read_lexicon(std::istream& in, std::string name) {
  Lexicon lex;
  lex.name = std::move(name);
  std::unordered_map<std::string, std::size_t> dim_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) {
      throw ValidationError(at_line(line_no) + "expected term<TAB>dimension<TAB>score");
    }
    auto score = parse_real(fields[2]);
    if (!score) throw ValidationError(at_line(line_no) + "unparseable score '" + std::string(fields[2]) + "'");
    const std::string dimension(fields[1]);
    auto [it, inserted] = dim_index.emplace(dimension, lex.dimensions.size());
    if (inserted) lex.dimensions.push_back(dimension);
    lex.entries[std::string(fields[0])].emplace(it->second, *score);
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_lexicon(in, path.stem().string());
}

BilingualDictionary read_dictionary(std::istream& in) {
  BilingualDictionary dict;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ValidationError(at_line(line_no) + "expected source_word<TAB>target_word");
    }
    std::pair<std::string, std::string> pair{std::string(fields[0]), std::string(fields[1])};
    if (seen.insert(pair).second) dict.pairs.push_back(std::move(pair));
  }
  if (dict.pairs.empty()) throw ValidationError("bilingual dictionary is empty");
  return dict;
}

BilingualDictionary load_dictionary(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_dictionary(in);
}

}  // namespace xlemo
