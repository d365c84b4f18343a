#include "xlemo/annotation_service.hpp"

#include "xlemo/errors.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>

namespace xlemo::service {

using nlohmann::json;

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

[[noreturn]] void throw_errno(const std::string& what, const std::filesystem::path& path) {
  throw IoError(what + " '" + path.string() + "': " + std::strerror(errno));
}

}  // namespace

JudgmentStore::JudgmentStore(std::filesystem::path path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw_errno("cannot open judgment log", path_);

  std::string content;
  char buf[1 << 16];
  while (true) {
    const ssize_t n = ::read(fd_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int saved = errno;
      ::close(fd_);
      errno = saved;
      throw_errno("cannot read judgment log", path_);
    }
    if (n == 0) break;
    content.append(buf, static_cast<std::size_t>(n));
  }

  // A crash mid-append leaves a final line without its newline; that record
  // was never acknowledged, so it is cut.
  const std::size_t last_newline = content.rfind('\n');
  const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (keep < content.size()) {
    recovered_bytes_ = content.size() - keep;
    if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0 || ::fsync(fd_) != 0) {
      const int saved = errno;
      ::close(fd_);
      errno = saved;
      throw_errno("cannot truncate torn judgment log", path_);
    }
    content.resize(keep);
  }

  try {
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < content.size()) {
      const std::size_t end = content.find('\n', start);
      const std::string_view line(content.data() + start, end - start);
      ++line_no;
      start = end + 1;
      if (line.empty()) continue;
      bws::Judgment j;
      try {
        j = bws::judgment_from_json(line);
      } catch (const ValidationError& e) {
        throw IoError("judgment log '" + path_.string() + "' line " + std::to_string(line_no) + ": " + e.what());
      }
      if (contains(j.tuple_id, j.annotator_id)) {
        throw IoError("judgment log '" + path_.string() + "' line " + std::to_string(line_no) +
                      ": duplicate judgment by '" + j.annotator_id + "' on '" + j.tuple_id + "'");
      }
      index(j);
      records_.push_back(std::move(j));
    }
  } catch (...) {
    ::close(fd_);
    throw;
  }
}

JudgmentStore::~JudgmentStore() {
  if (fd_ >= 0) ::close(fd_);
}

void JudgmentStore::index(const bws::Judgment& j) {
  by_pair_.emplace(j.tuple_id, j.annotator_id);
  ++per_tuple_[j.tuple_id];
}

void JudgmentStore::append(const bws::Judgment& j) {
  const std::string line = bws::to_json_line(j) + '\n';
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw_errno("cannot stat judgment log", path_);
  const off_t before = st.st_size;

  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int saved = errno;
      // Leave no partial record behind for the next append to run into.
      const int rc = ::ftruncate(fd_, before);
      static_cast<void>(rc);
      errno = saved;
      throw_errno("cannot append to judgment log", path_);
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd_) != 0) throw_errno("cannot sync judgment log", path_);
  index(j);
  records_.push_back(j);
}

bool JudgmentStore::contains(const std::string& tuple_id, const std::string& annotator_id) const {
  return by_pair_.count({tuple_id, annotator_id}) != 0;
}

std::size_t JudgmentStore::judgments_on(const std::string& tuple_id) const {
  auto it = per_tuple_.find(tuple_id);
  return it == per_tuple_.end() ? 0 : it->second;
}

std::size_t JudgmentStore::judged_by(const std::string& annotator_id) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const bws::Judgment& j) {
    return j.annotator_id == annotator_id;
  }));
}

Campaign::Campaign(std::string id, Corpus items, std::vector<bws::Tuple4> tuples, std::filesystem::path log_path)
    : id_(std::move(id)), tuples_(std::move(tuples)), store_(std::move(log_path)), clock_(now_ms) {
  if (id_.empty()) throw ValidationError("campaign id must not be empty");
  if (tuples_.empty()) throw ValidationError("campaign '" + id_ + "' has no tuples");
  for (Item& item : items.items) texts_.emplace(item.id, std::move(item.text));

  std::sort(tuples_.begin(), tuples_.end(),
            [](const bws::Tuple4& a, const bws::Tuple4& b) { return a.tuple_id < b.tuple_id; });
  for (std::size_t k = 0; k < tuples_.size(); ++k) {
    const bws::Tuple4& t = tuples_[k];
    if (!tuple_index_.emplace(t.tuple_id, k).second) {
      throw ValidationError("campaign '" + id_ + "': duplicate tuple id '" + t.tuple_id + "'");
    }
    for (std::size_t a = 0; a < 4; ++a) {
      if (!texts_.count(t.item_ids[a])) {
        throw ValidationError("tuple '" + t.tuple_id + "' references unknown item '" + t.item_ids[a] + "'");
      }
      for (std::size_t b = a + 1; b < 4; ++b) {
        if (t.item_ids[a] == t.item_ids[b]) {
          throw ValidationError("tuple '" + t.tuple_id + "' repeats item '" + t.item_ids[a] + "'");
        }
      }
    }
  }
  for (const bws::Judgment& j : store_.records()) {
    auto it = tuple_index_.find(j.tuple_id);
    if (it == tuple_index_.end()) {
      throw IoError("judgment log '" + store_.path().string() + "' references unknown tuple '" + j.tuple_id + "'");
    }
    try {
      bws::validate_judgment(j, tuples_[it->second]);
    } catch (const ValidationError& e) {
      throw IoError("judgment log '" + store_.path().string() + "': " + e.what());
    }
  }
}

bool Campaign::has_emotion(Emotion emotion) const {
  return std::any_of(tuples_.begin(), tuples_.end(), [&](const bws::Tuple4& t) { return t.emotion == emotion; });
}

std::optional<Assignment> Campaign::next_tuple(const std::string& annotator_id, Emotion emotion) const {
  if (annotator_id.empty()) throw ValidationError("annotator id must not be empty");
  std::shared_lock lock(mutex_);
  if (!has_emotion(emotion)) {
    throw ValidationError("campaign '" + id_ + "' has no tuples for " + std::string(to_string(emotion)));
  }
  const bws::Tuple4* best = nullptr;
  std::size_t best_count = 0;
  for (const bws::Tuple4& t : tuples_) {
    if (t.emotion != emotion || store_.contains(t.tuple_id, annotator_id)) continue;
    const std::size_t n = store_.judgments_on(t.tuple_id);
    if (!best || n < best_count) {
      best = &t;
      best_count = n;
    }
  }
  if (!best) return std::nullopt;
  Assignment a;
  a.annotator_id = annotator_id;
  a.tuple = *best;
  for (std::size_t k = 0; k < 4; ++k) a.texts[k] = texts_.at(best->item_ids[k]);
  a.served_at = clock_();
  return a;
}

Acknowledgment Campaign::submit_judgment(bws::Judgment j) {
  if (j.annotator_id.empty()) throw ValidationError("annotator id must not be empty");
  if (j.tuple_id.empty()) throw ValidationError("tuple id must not be empty");
  std::unique_lock lock(mutex_);
  auto it = tuple_index_.find(j.tuple_id);
  if (it == tuple_index_.end()) throw NotFoundError("unknown tuple '" + j.tuple_id + "'");
  const bws::Tuple4& tuple = tuples_[it->second];
  bws::validate_judgment(j, tuple);
  if (store_.contains(j.tuple_id, j.annotator_id)) {
    throw ConflictError("annotator '" + j.annotator_id + "' already judged tuple '" + j.tuple_id + "'");
  }
  if (j.timestamp == 0) j.timestamp = clock_();
  store_.append(j);

  Acknowledgment ack;
  ack.progress.annotator_id = j.annotator_id;
  ack.progress.emotion = tuple.emotion;
  for (const bws::Tuple4& t : tuples_) {
    if (t.emotion != tuple.emotion) continue;
    ++ack.progress.total;
    if (store_.contains(t.tuple_id, j.annotator_id)) ++ack.progress.judged;
  }
  ack.judgment = std::move(j);
  return ack;
}

Progress Campaign::progress(const std::string& annotator_id, std::optional<Emotion> emotion) const {
  if (annotator_id.empty()) throw ValidationError("annotator id must not be empty");
  std::shared_lock lock(mutex_);
  if (emotion && !has_emotion(*emotion)) {
    throw ValidationError("campaign '" + id_ + "' has no tuples for " + std::string(to_string(*emotion)));
  }
  Progress p;
  p.annotator_id = annotator_id;
  p.emotion = emotion;
  for (const bws::Tuple4& t : tuples_) {
    if (emotion && t.emotion != *emotion) continue;
    ++p.total;
    if (store_.contains(t.tuple_id, annotator_id)) ++p.judged;
  }
  return p;
}

std::vector<bws::Judgment> Campaign::snapshot() const {
  std::shared_lock lock(mutex_);
  return store_.records();
}

std::vector<bws::Tuple4> Campaign::tuples(Emotion emotion) const {
  auto out = bws::tuples_for(tuples_, emotion);
  if (out.empty()) {
    throw ValidationError("campaign '" + id_ + "' has no tuples for " + std::string(to_string(emotion)));
  }
  return out;
}

bws::ScoreTable Campaign::scores(Emotion emotion) const {
  const auto tuples = this->tuples(emotion);
  const auto judgments = bws::judgments_for(tuples, snapshot());
  if (judgments.empty()) {
    throw ValidationError("no judgments yet for " + std::string(to_string(emotion)) + " in campaign '" + id_ + "'");
  }
  return bws::aggregate_scores(tuples, judgments);
}

bws::Reliability Campaign::reliability(Emotion emotion, int iterations, std::uint64_t seed) const {
  const auto tuples = this->tuples(emotion);
  const auto judgments = bws::judgments_for(tuples, snapshot());
  return bws::split_half_reliability(tuples, judgments, iterations, seed);
}

void Registry::add(std::shared_ptr<Campaign> campaign) {
  std::unique_lock lock(mutex_);
  const std::string id = campaign->id();
  if (!campaigns_.emplace(id, std::move(campaign)).second) {
    throw ConflictError("campaign '" + id + "' is already loaded");
  }
}

std::shared_ptr<Campaign> Registry::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = campaigns_.find(id);
  if (it == campaigns_.end()) throw NotFoundError("unknown campaign '" + id + "'");
  return it->second;
}

std::vector<std::string> Registry::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, c] : campaigns_) out.push_back(id);
  return out;
}

json to_json(const bws::Judgment& j) {
  return json{{"tuple_id", j.tuple_id},
              {"annotator_id", j.annotator_id},
              {"best", j.best},
              {"worst", j.worst},
              {"timestamp", j.timestamp}};
}

json to_json(const Assignment& a) {
  json items = json::array();
  for (std::size_t k = 0; k < 4; ++k) items.push_back({{"id", a.tuple.item_ids[k]}, {"text", a.texts[k]}});
  return json{{"done", false},
              {"annotator_id", a.annotator_id},
              {"tuple",
               {{"tuple_id", a.tuple.tuple_id},
                {"emotion", std::string(to_string(a.tuple.emotion))},
                {"item_ids", a.tuple.item_ids}}},
              {"items", items},
              {"served_at", a.served_at}};
}

json to_json(const Progress& p) {
  return json{{"annotator_id", p.annotator_id},
              {"emotion", p.emotion ? json(std::string(to_string(*p.emotion))) : json(nullptr)},
              {"judged", p.judged},
              {"total", p.total}};
}

json to_json(const Acknowledgment& a) {
  return json{{"judgment", to_json(a.judgment)}, {"progress", to_json(a.progress)}};
}

json to_json(const bws::ScoreTable& t) {
  json items = json::array();
  for (const auto& [id, score] : t.scores) {
    items.push_back({{"id", id}, {"score", score}, {"raw", t.raw.at(id)}, {"appearances", t.appearances.at(id)}});
  }
  return json{{"emotion", std::string(to_string(t.emotion))}, {"items", items}};
}

json to_json(const bws::Reliability& r) {
  return json{{"iterations", r.iterations},
              {"pearson", {{"mean", r.pearson.mean}, {"stddev", r.pearson.stddev}}},
              {"spearman", {{"mean", r.spearman.mean}, {"stddev", r.spearman.stddev}}},
              {"formatted",
               {{"pearson", bws::format_mean_std(r.pearson)}, {"spearman", bws::format_mean_std(r.spearman)}}}};
}

}  // namespace xlemo::service
