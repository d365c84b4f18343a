#include "xlemo/bws.hpp"

#include "xlemo/errors.hpp"
#include "xlemo/metrics.hpp"
#include "xlemo/random.hpp"
#include "io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

namespace xlemo::bws {

using nlohmann::json;

bool Tuple4::contains(const std::string& item_id) const {
  return std::find(item_ids.begin(), item_ids.end(), item_id) != item_ids.end();
}

namespace {

std::string make_tuple_id(Emotion emotion, std::size_t index, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(5, std::to_string(count).size());
  std::string n = std::to_string(index + 1);
  return std::string(to_string(emotion)) + "-" + std::string(width - n.size(), '0') + n;
}

struct Tally {
  std::unordered_map<std::string, int> best;
  std::unordered_map<std::string, int> worst;
  std::unordered_map<std::string, int> exposure;

  void add(const Tuple4& t, const Judgment& j) {
    ++best[j.best];
    ++worst[j.worst];
    for (const auto& id : t.item_ids) ++exposure[id];
  }
};

ScoreTable finish(const Tally& tally, Emotion emotion) {
  ScoreTable table;
  table.emotion = emotion;
  for (const auto& [id, n] : tally.exposure) {
    const auto b = tally.best.find(id);
    const auto w = tally.worst.find(id);
    const int nb = b == tally.best.end() ? 0 : b->second;
    const int nw = w == tally.worst.end() ? 0 : w->second;
    const double raw = static_cast<double>(nb - nw) / static_cast<double>(n);
    table.raw[id] = raw;
    table.scores[id] = (raw + 1.0) / 2.0;
    table.appearances[id] = n;
  }
  return table;
}

std::unordered_map<std::string, const Tuple4*> index_tuples(std::span<const Tuple4> tuples) {
  std::unordered_map<std::string, const Tuple4*> index;
  for (const Tuple4& t : tuples) {
    if (!index.emplace(t.tuple_id, &t).second) {
      throw ValidationError("duplicate tuple id '" + t.tuple_id + "'");
    }
  }
  return index;
}

Emotion common_emotion(std::span<const Tuple4> tuples) {
  if (tuples.empty()) return Emotion::anger;
  const Emotion e = tuples.front().emotion;
  for (const Tuple4& t : tuples) {
    if (t.emotion != e) {
      throw ValidationError("tuples mix emotions (" + std::string(to_string(e)) + " and " +
                            std::string(to_string(t.emotion)) + "); score one emotion at a time");
    }
  }
  return e;
}

}  // namespace

std::vector<Tuple4> generate_tuples(std::span<const std::string> item_ids, int appearances_per_item,
                                    std::uint64_t seed, Emotion emotion) {
  const std::size_t n = item_ids.size();
  if (n < 4) throw ValidationError("need at least 4 items to build 4-tuples, got " + std::to_string(n));
  if (appearances_per_item < 1) throw ValidationError("appearances per item must be >= 1");
  {
    std::set<std::string_view> seen;
    for (const auto& id : item_ids) {
      if (!seen.insert(id).second) throw ValidationError("duplicate item id '" + id + "'");
    }
  }

  Rng rng(seed);
  std::vector<int> quota(n, appearances_per_item);
  const std::size_t slots = n * static_cast<std::size_t>(appearances_per_item);
  if (slots % 4 != 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t k = 0; k < 4 - slots % 4; ++k) ++quota[order[k]];
  }
  const std::size_t count = (slots + 3) / 4;
  const std::vector<int> initial_quota = quota;
  if (n < 1000) {
    const std::size_t distinct = n * (n - 1) * (n - 2) * (n - 3) / 24;
    if (count > distinct) {
      throw ValidationError(std::to_string(count) + " tuples requested but " + std::to_string(n) + " items form only " +
                            std::to_string(distinct) + " distinct 4-item sets");
    }
  }

  // Greedy placement can paint itself into a corner on the last few tuples
  // (the only items left form a set already used); start the design over.
  std::size_t stuck_at = 0;
  for (int restart = 0; restart < kTupleDesignRestarts; ++restart) {
    quota = initial_quota;
    std::set<std::array<std::size_t, 4>> used;
    std::vector<Tuple4> tuples;
    tuples.reserve(count);
    std::vector<std::size_t> candidates;
    bool complete = true;
    for (std::size_t t = 0; t < count; ++t) {
      std::vector<std::size_t> available;
      for (std::size_t i = 0; i < n; ++i) {
        if (quota[i] > 0) available.push_back(i);
      }
      bool placed = false;
      if (available.size() < 4) {
        stuck_at = t;
        complete = false;
        break;
      }
      for (int attempt = 0; attempt < kTupleRetryBudget && !placed; ++attempt) {
        candidates = available;
        rng.shuffle(candidates.begin(), candidates.end());
        // Most-remaining-first keeps the design balanced; the second half of
        // the budget falls back to uniform picks to escape repeated sets.
        if (attempt < kTupleRetryBudget / 2) {
          std::stable_sort(candidates.begin(), candidates.end(),
                           [&](std::size_t a, std::size_t b) { return quota[a] > quota[b]; });
        }
        std::array<std::size_t, 4> key{candidates[0], candidates[1], candidates[2], candidates[3]};
        std::array<std::size_t, 4> order = key;
        std::sort(key.begin(), key.end());
        if (used.count(key)) continue;
        used.insert(key);
        Tuple4 tuple;
        tuple.tuple_id = make_tuple_id(emotion, t, count);
        tuple.emotion = emotion;
        for (std::size_t k = 0; k < 4; ++k) {
          tuple.item_ids[k] = item_ids[order[k]];
          --quota[order[k]];
        }
        tuples.push_back(std::move(tuple));
        placed = true;
      }
      if (!placed) {
        stuck_at = t;
        complete = false;
        break;
      }
    }
    if (complete) return tuples;
  }
  throw ValidationError("tuple " + std::to_string(stuck_at + 1) + ": no unused item set found after " +
                        std::to_string(kTupleDesignRestarts) + " restarts of " + std::to_string(kTupleRetryBudget) +
                        " attempts (constraint: no two tuples share the same 4 items)");
}

void validate_judgment(const Judgment& j, const Tuple4& tuple) {
  if (j.best == j.worst) {
    throw ValidationError("judgment by '" + j.annotator_id + "' on tuple '" + j.tuple_id +
                          "': best and worst are the same item");
  }
  if (!tuple.contains(j.best)) {
    throw ValidationError("judgment on tuple '" + j.tuple_id + "': best item '" + j.best + "' not in tuple");
  }
  if (!tuple.contains(j.worst)) {
    throw ValidationError("judgment on tuple '" + j.tuple_id + "': worst item '" + j.worst + "' not in tuple");
  }
}

ScoreTable aggregate_scores(std::span<const Tuple4> tuples, std::span<const Judgment> judgments) {
  const auto index = index_tuples(tuples);
  const Emotion emotion = common_emotion(tuples);
  Tally tally;
  for (const Judgment& j : judgments) {
    auto it = index.find(j.tuple_id);
    if (it == index.end()) throw NotFoundError("judgment references unknown tuple '" + j.tuple_id + "'");
    validate_judgment(j, *it->second);
    tally.add(*it->second, j);
  }
  return finish(tally, emotion);
}

Reliability split_half_reliability(std::span<const Tuple4> tuples, std::span<const Judgment> judgments,
                                   int iterations, std::uint64_t seed) {
  if (iterations < 1) throw ValidationError("reliability needs at least 1 iteration");
  const auto index = index_tuples(tuples);
  const Emotion emotion = common_emotion(tuples);

  std::unordered_map<std::string, std::vector<std::size_t>> by_tuple;
  for (std::size_t k = 0; k < judgments.size(); ++k) {
    const Judgment& j = judgments[k];
    auto it = index.find(j.tuple_id);
    if (it == index.end()) throw NotFoundError("judgment references unknown tuple '" + j.tuple_id + "'");
    validate_judgment(j, *it->second);
    by_tuple[j.tuple_id].push_back(k);
  }
  for (const Tuple4& t : tuples) {
    const auto it = by_tuple.find(t.tuple_id);
    const std::size_t have = it == by_tuple.end() ? 0 : it->second.size();
    if (have < 2) {
      throw ValidationError("tuple '" + t.tuple_id + "' has " + std::to_string(have) +
                            " judgment(s); split-half reliability needs at least 2 per tuple");
    }
  }

  std::vector<double> pearsons;
  std::vector<double> spearmans;
  for (int iter = 0; iter < iterations; ++iter) {
    Rng rng(seed, static_cast<std::uint64_t>(iter));
    Tally first;
    Tally second;
    for (const Tuple4& t : tuples) {
      std::vector<std::size_t> ks = by_tuple.at(t.tuple_id);
      rng.shuffle(ks.begin(), ks.end());
      const std::size_t half = (ks.size() + 1) / 2;
      for (std::size_t m = 0; m < ks.size(); ++m) {
        (m < half ? first : second).add(t, judgments[ks[m]]);
      }
    }
    const ScoreTable a = finish(first, emotion);
    const ScoreTable b = finish(second, emotion);
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [id, score] : a.scores) {
      auto it = b.scores.find(id);
      if (it == b.scores.end()) continue;
      xs.push_back(score);
      ys.push_back(it->second);
    }
    pearsons.push_back(pearson(xs, ys));
    spearmans.push_back(spearman(xs, ys));
  }

  auto summarize = [](const std::vector<double>& v) {
    MeanStd m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(v.size()));
    return m;
  };
  Reliability r;
  r.pearson = summarize(pearsons);
  r.spearman = summarize(spearmans);
  r.iterations = iterations;
  return r;
}

std::string format_mean_std(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f)", m.mean, m.stddev);
  return buf;
}

std::string to_json_line(const Tuple4& t) {
  json j{{"tuple_id", t.tuple_id},
         {"emotion", std::string(to_string(t.emotion))},
         {"item_ids", t.item_ids}};
  return j.dump();
}

std::string to_json_line(const Judgment& j) {
  json o{{"tuple_id", j.tuple_id},
         {"annotator_id", j.annotator_id},
         {"best", j.best},
         {"worst", j.worst},
         {"timestamp", j.timestamp}};
  return o.dump();
}

Tuple4 tuple_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    Tuple4 t;
    t.tuple_id = j.at("tuple_id").get<std::string>();
    t.emotion = parse_emotion(j.at("emotion").get<std::string>());
    const auto ids = j.at("item_ids").get<std::vector<std::string>>();
    if (ids.size() != 4) throw ValidationError("tuple '" + t.tuple_id + "' must have exactly 4 item ids");
    std::copy(ids.begin(), ids.end(), t.item_ids.begin());
    std::set<std::string> distinct(ids.begin(), ids.end());
    if (distinct.size() != 4) throw ValidationError("tuple '" + t.tuple_id + "' repeats an item");
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed tuple record: ") + e.what());
  }
}

Judgment judgment_from_json(std::string_view line) {
  try {
    const json o = json::parse(line);
    Judgment j;
    j.tuple_id = o.at("tuple_id").get<std::string>();
    j.annotator_id = o.at("annotator_id").get<std::string>();
    j.best = o.at("best").get<std::string>();
    j.worst = o.at("worst").get<std::string>();
    j.timestamp = o.value("timestamp", std::int64_t{0});
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed judgment record: ") + e.what());
  }
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, Parse parse) {
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse(line));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Tuple4> read_tuples_jsonl(std::istream& in) { return read_jsonl<Tuple4>(in, tuple_from_json); }

std::vector<Tuple4> load_tuples_jsonl(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_tuples_jsonl(in);
}

void write_tuples_jsonl(std::ostream& out, std::span<const Tuple4> tuples) {
  for (const Tuple4& t : tuples) out << to_json_line(t) << '\n';
}

std::vector<Judgment> read_judgments_jsonl(std::istream& in) {
  return read_jsonl<Judgment>(in, judgment_from_json);
}

std::vector<Judgment> load_judgments_jsonl(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_judgments_jsonl(in);
}

void write_judgments_jsonl(std::ostream& out, std::span<const Judgment> judgments) {
  for (const Judgment& j : judgments) out << to_json_line(j) << '\n';
}

std::vector<Tuple4> tuples_for(std::span<const Tuple4> tuples, Emotion emotion) {
  std::vector<Tuple4> out;
  std::copy_if(tuples.begin(), tuples.end(), std::back_inserter(out),
               [&](const Tuple4& t) { return t.emotion == emotion; });
  return out;
}

std::vector<Judgment> judgments_for(std::span<const Tuple4> tuples, std::span<const Judgment> judgments) {
  std::set<std::string_view> ids;
  for (const Tuple4& t : tuples) ids.insert(t.tuple_id);
  std::vector<Judgment> out;
  std::copy_if(judgments.begin(), judgments.end(), std::back_inserter(out),
               [&](const Judgment& j) { return ids.count(j.tuple_id) != 0; });
  return out;
}

Corpus to_corpus(const ScoreTable& table, const Corpus* items) {
  Corpus corpus;
  corpus.split = Split::test;
  std::unordered_map<std::string, const Item*> lookup;
  if (items) {
    corpus.language = items->language;
    for (const Item& it : items->items) lookup.emplace(it.id, &it);
  }
  for (const auto& [id, score] : table.scores) {
    Item item;
    item.id = id;
    item.language = corpus.language;
    item.emotion = table.emotion;
    item.gold_score = score;
    if (auto it = lookup.find(id); it != lookup.end()) item.text = it->second->text;
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

}  // namespace xlemo::bws
