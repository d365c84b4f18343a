// Seeded synthetic data shared by the unit tests and the acceptance runner.
#pragma once

#include "xlemo/data_model.hpp"
#include "xlemo/features.hpp"
#include "xlemo/random.hpp"

#include <Eigen/Dense>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace xlemo::testing {

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "xlemo-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix).
inline Eigen::MatrixXd random_orthogonal(Eigen::Index d, Rng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(d, d, rng));
  Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (R(k, k) < 0) Q.col(k) *= -1.0;
  }
  return Q;
}

inline FeatureVector dense_row(const Eigen::VectorXd& v) {
  FeatureVector x(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v(k) != 0.0) x.insertBack(k) = v(k);
  }
  return x;
}

struct LinearTask {
  std::vector<FeatureVector> X_train, X_test;
  std::vector<double> y_train, y_test;
  Eigen::VectorXd w;
  double b = 0.0;
};

/// y = w.x + b with Gaussian x and w, no noise.
inline LinearTask linear_task(int dims, int n_train, int n_test, std::uint64_t seed) {
  Rng rng(seed);
  LinearTask t;
  t.w = gaussian(dims, 1, rng).col(0);
  t.b = rng.normal();
  auto draw = [&](int n, std::vector<FeatureVector>& X, std::vector<double>& y) {
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = gaussian(dims, 1, rng).col(0);
      X.push_back(dense_row(x));
      y.push_back(t.w.dot(x) + t.b);
    }
  };
  draw(n_train, t.X_train, t.y_train);
  draw(n_test, t.X_test, t.y_test);
  return t;
}

inline Corpus make_corpus(const std::vector<std::string>& texts, const std::vector<double>& gold, Emotion emotion,
                          const std::string& prefix, const std::string& language = "en") {
  Corpus c;
  c.language = language;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Item it;
    it.id = prefix + std::to_string(i);
    it.text = texts[i];
    it.language = language;
    it.emotion = emotion;
    it.gold_score = gold[i];
    c.items.push_back(std::move(it));
  }
  return c;
}

/// Source words s<i>, target words t<i> with t_i = s_i Q for a random
/// orthogonal Q. Gold is a fixed linear function of the source-side average
/// embedding, rescaled into [0,1]; test texts use target words only.
struct TransferTask {
  EmbeddingTable source;
  EmbeddingTable target;
  BilingualDictionary dictionary;
  Corpus train, dev, test;
  Eigen::MatrixXd Q;
};

inline TransferTask transfer_task(std::uint64_t seed, int d = 20, int vocab = 300, int n_train = 400, int n_dev = 100,
                                  int n_test = 200, int bag = 6) {
  Rng rng(seed);
  const Eigen::MatrixXd S = gaussian(vocab, d, rng);
  TransferTask task;
  task.Q = random_orthogonal(d, rng);
  const Eigen::MatrixXd T = S * task.Q;
  const Eigen::VectorXd w = gaussian(d, 1, rng).col(0);

  std::vector<std::string> src_words, tgt_words;
  for (int i = 0; i < vocab; ++i) {
    src_words.push_back("s" + std::to_string(i));
    tgt_words.push_back("t" + std::to_string(i));
    task.dictionary.pairs.emplace_back(src_words.back(), tgt_words.back());
  }
  task.source = EmbeddingTable(src_words, RowMatrixXd(S));
  task.target = EmbeddingTable(tgt_words, RowMatrixXd(T));

  struct Bag {
    std::vector<int> words;
    double value;
  };
  auto draw = [&](int n) {
    std::vector<Bag> out;
    for (int i = 0; i < n; ++i) {
      std::vector<int> idx(static_cast<std::size_t>(vocab));
      for (int k = 0; k < vocab; ++k) idx[static_cast<std::size_t>(k)] = k;
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(static_cast<std::size_t>(bag));
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(d);
      for (int k : idx) avg += S.row(k).transpose();
      avg /= bag;
      out.push_back({idx, w.dot(avg)});
    }
    return out;
  };
  const auto train = draw(n_train), dev = draw(n_dev), test = draw(n_test);
  double lo = 1e300, hi = -1e300;
  for (const auto* set : {&train, &dev, &test}) {
    for (const Bag& b : *set) {
      lo = std::min(lo, b.value);
      hi = std::max(hi, b.value);
    }
  }
  auto corpus = [&](const std::vector<Bag>& bags, const std::vector<std::string>& words, const std::string& prefix,
                    const std::string& lang) {
    std::vector<std::string> texts;
    std::vector<double> gold;
    for (const Bag& b : bags) {
      std::string text;
      for (int k : b.words) text += (text.empty() ? "" : " ") + words[static_cast<std::size_t>(k)];
      texts.push_back(text);
      gold.push_back((b.value - lo) / (hi - lo));
    }
    return make_corpus(texts, gold, Emotion::joy, prefix, lang);
  };
  task.train = corpus(train, src_words, "tr", "en");
  task.dev = corpus(dev, src_words, "dv", "en");
  task.test = corpus(test, tgt_words, "te", "es");
  return task;
}

/// Lowercase pseudo-word of `len` letters.
inline std::string random_word(Rng& rng, int len) {
  std::string w;
  for (int k = 0; k < len; ++k) w.push_back(static_cast<char>('a' + rng.below(26)));
  return w;
}

}  // namespace xlemo::testing
