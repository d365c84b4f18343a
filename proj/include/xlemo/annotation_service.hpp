#pragma once

#include "xlemo/bws.hpp"
#include "xlemo/data_model.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace xlemo::service {

/// Append-only JSONL judgment log. Each append is written and fsync'd
/// before it returns.
class JudgmentStore {
 public:
  /// Replays an existing log (created if missing). A torn final line
  /// (no trailing newline) is dropped and cut from the file; any other
  /// malformed line is an error.
  explicit JudgmentStore(std::filesystem::path path);
  ~JudgmentStore();
  JudgmentStore(const JudgmentStore&) = delete;
  JudgmentStore& operator=(const JudgmentStore&) = delete;

  void append(const bws::Judgment& j);

  const std::vector<bws::Judgment>& records() const { return records_; }
  bool contains(const std::string& tuple_id, const std::string& annotator_id) const;
  std::size_t judgments_on(const std::string& tuple_id) const;
  std::size_t judged_by(const std::string& annotator_id) const;
  const std::filesystem::path& path() const { return path_; }
  /// Bytes dropped from a torn tail during replay.
  std::size_t recovered_bytes() const { return recovered_bytes_; }

 private:
  void index(const bws::Judgment& j);

  std::filesystem::path path_;
  int fd_ = -1;
  std::vector<bws::Judgment> records_;
  std::set<std::pair<std::string, std::string>> by_pair_;
  std::unordered_map<std::string, std::size_t> per_tuple_;
  std::size_t recovered_bytes_ = 0;
};

struct Assignment {
  std::string annotator_id;
  bws::Tuple4 tuple;
  std::array<std::string, 4> texts;
  std::int64_t served_at = 0;  // ms since epoch
};

struct Progress {
  std::string annotator_id;
  std::optional<Emotion> emotion;  // unset: whole campaign
  std::size_t judged = 0;
  std::size_t total = 0;
};

struct Acknowledgment {
  bws::Judgment judgment;
  Progress progress;  // over tuples of the judged tuple's emotion
};

class Campaign {
 public:
  /// Items must cover every tuple item id; the log is replayed and each
  /// record checked against the tuples.
  Campaign(std::string id, Corpus items, std::vector<bws::Tuple4> tuples, std::filesystem::path log_path);

  const std::string& id() const { return id_; }

  /// Least-judged tuple this annotator has not judged (ties: lowest id);
  /// nullopt when none remain.
  std::optional<Assignment> next_tuple(const std::string& annotator_id, Emotion emotion) const;
  /// ValidationError on a bad judgment, NotFoundError on an unknown tuple,
  /// ConflictError when (tuple, annotator) is already judged.
  Acknowledgment submit_judgment(bws::Judgment j);
  Progress progress(const std::string& annotator_id, std::optional<Emotion> emotion = std::nullopt) const;

  bws::ScoreTable scores(Emotion emotion) const;
  bws::Reliability reliability(Emotion emotion, int iterations, std::uint64_t seed) const;

  /// Copy of the log taken under the read lock.
  std::vector<bws::Judgment> snapshot() const;
  std::vector<bws::Tuple4> tuples(Emotion emotion) const;
  std::size_t tuple_count() const { return tuples_.size(); }
  std::size_t recovered_bytes() const { return store_.recovered_bytes(); }

  /// Clock used for served_at and missing judgment timestamps.
  void set_clock(std::function<std::int64_t()> clock) { clock_ = std::move(clock); }

 private:
  bool has_emotion(Emotion emotion) const;

  std::string id_;
  std::unordered_map<std::string, std::string> texts_;
  std::vector<bws::Tuple4> tuples_;  // sorted by tuple id
  std::unordered_map<std::string, std::size_t> tuple_index_;
  mutable std::shared_mutex mutex_;
  JudgmentStore store_;
  std::function<std::int64_t()> clock_;
};

class Registry {
 public:
  void add(std::shared_ptr<Campaign> campaign);
  /// NotFoundError for an unknown id.
  std::shared_ptr<Campaign> find(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Campaign>> campaigns_;
};

nlohmann::json to_json(const Assignment& a);
nlohmann::json to_json(const Progress& p);
nlohmann::json to_json(const Acknowledgment& a);
nlohmann::json to_json(const bws::ScoreTable& t);
nlohmann::json to_json(const bws::Reliability& r);
nlohmann::json to_json(const bws::Judgment& j);

/// HTTP front end over a registry. Routes:
///   GET  /campaigns/{id}/next?annotator=&emotion=
///   POST /campaigns/{id}/judgments
///   GET  /campaigns/{id}/scores?emotion=
///   GET  /campaigns/{id}/reliability?emotion=&iterations=&seed=
///   GET  /campaigns/{id}/progress?annotator=[&emotion=]
/// Errors are {"code", "message"} with status 400, 404, 409 or 500.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<Registry> registry);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xlemo::service
