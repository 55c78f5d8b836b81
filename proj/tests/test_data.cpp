#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mran/data.hpp"

using namespace mran;
namespace fs = std::filesystem;

TEST_CASE("parse_review_line basics") {
  RawExample ex = parse_review_line("great:2 movie:1 #label#:positive", 1);
  CHECK(ex.counts.at("great") == 2.0);
  CHECK(ex.counts.at("movie") == 1.0);
  REQUIRE(ex.label.has_value());
  CHECK(*ex.label == 1);

  RawExample neg = parse_review_line("bad:1 #label#:negative", 2);
  CHECK(neg.counts.at("bad") == 1.0);
  CHECK(*neg.label == 0);

  RawExample dup = parse_review_line("a:1 a:2.5 b:1", 3);
  CHECK(dup.counts.at("a") == 3.5);
  CHECK_FALSE(dup.label.has_value());

  RawExample unl = parse_review_line("x:1 #label#:unlabeled", 4);
  CHECK_FALSE(unl.label.has_value());

  // Bigram-style tokens keep everything before the last colon.
  RawExample bi = parse_review_line("not:good:2", 5);
  CHECK(bi.counts.at("not:good") == 2.0);
}

TEST_CASE("parse_review_line errors name the offending pair and line") {
  CHECK_THROWS_WITH_AS(parse_review_line("oops:x", 7),
                       "line 7: non-numeric count in pair 'oops:x'", ParseError);
  CHECK_THROWS_AS(parse_review_line("nocolon", 1), ParseError);
  CHECK_THROWS_AS(parse_review_line("trailing: ", 1), ParseError);
  CHECK_THROWS_AS(parse_review_line("#label#:maybe", 1), ParseError);
}

TEST_CASE("vocabulary ranking, ties and cutoff") {
  std::vector<RawExample> corpus;
  corpus.push_back(parse_review_line("a:3 b:1 c:2", 1));
  Vocabulary top2 = build_vocabulary({&corpus}, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2.features()[0] == "a");
  CHECK(top2.features()[1] == "c");

  // Equal counts fall back to lexicographic order.
  std::vector<RawExample> tied;
  tied.push_back(parse_review_line("zebra:2 apple:2 mango:2", 1));
  Vocabulary v = build_vocabulary({&tied}, 2);
  CHECK(v.features()[0] == "apple");
  CHECK(v.features()[1] == "mango");

  // Requesting more features than exist keeps them all.
  Vocabulary all = build_vocabulary({&corpus}, 10);
  CHECK(all.size() == 3);
}

TEST_CASE("vocabulary serialization round-trips ids") {
  const fs::path dir = fs::temp_directory_path() / "mran_vocab_test";
  fs::create_directories(dir);
  std::vector<RawExample> corpus;
  corpus.push_back(parse_review_line("nice:4 plot:2 dull:1", 1));
  Vocabulary v = build_vocabulary({&corpus}, 3);
  v.save((dir / "vocab.txt").string());
  Vocabulary loaded = Vocabulary::load((dir / "vocab.txt").string());
  REQUIRE(loaded.size() == v.size());
  for (const auto& f : v.features()) CHECK(loaded.id_of(f) == v.id_of(f));
  fs::remove_all(dir);
}

TEST_CASE("vectorize drops out-of-vocabulary tokens and densify keeps mass") {
  std::vector<RawExample> corpus;
  corpus.push_back(parse_review_line("a:3 b:2 c:1", 1));
  Vocabulary v = build_vocabulary({&corpus}, 2);  // keeps a, b

  RawExample ex = parse_review_line("a:2 c:9 d:1 #label#:positive", 1);
  SparseExample se = vectorize(ex, v, 0);
  REQUIRE(se.features.size() == 1);
  CHECK(se.features[0].first == v.id_of("a"));
  CHECK(se.features[0].second == 2.0);
  CHECK(*se.label == 1);

  RawExample oov = parse_review_line("zzz:5", 1);
  SparseExample empty = vectorize(oov, v, 0);
  CHECK(empty.features.empty());

  Tensor dense = densify({se, empty}, v.size());
  CHECK(dense.rows() == 2);
  CHECK(dense.cols() == v.size());
  double total = 0.0;
  for (double x : dense.values()) total += x;
  // In-vocabulary mass only, nothing invented or lost.
  CHECK(total == 2.0);
}

TEST_CASE("fold plan is a stratified partition") {
  SynthConfig sc;
  sc.domains = 2;
  sc.dim = 6;
  sc.labeled_per_domain = 2000;
  sc.unlabeled_per_domain = 0;
  sc.seed = 3;
  MultiDomainDataset ds = synth_generate(sc);
  const FoldPlan plan = make_folds(ds, 5, 17);

  for (int d = 0; d < 2; ++d) {
    std::set<int> seen;
    for (int f = 0; f < 5; ++f) {
      const auto idx = plan.indices_in(d, f);
      CHECK(idx.size() == 400);
      int pos = 0;
      for (int i : idx) {
        CHECK(seen.insert(i).second);  // pairwise disjoint
        if (*ds.domains[d].labeled[static_cast<size_t>(i)].label == 1) ++pos;
      }
      CHECK(std::abs(pos - 200) <= 1);  // label balance within one
    }
    CHECK(seen.size() == 2000);  // union covers everything
  }

  // Rotation designation: 3 train folds, 1 validation, 1 test.
  CHECK(plan.test_fold(2) == 2);
  CHECK(plan.validation_fold(2) == 3);
  CHECK(plan.train_indices(0, 2).size() == 1200);

  // Deterministic given the seed.
  const FoldPlan again = make_folds(ds, 5, 17);
  CHECK(again.assignment == plan.assignment);
  const FoldPlan other = make_folds(ds, 5, 18);
  CHECK(other.assignment != plan.assignment);
}

TEST_CASE("fold plan handles uneven sizes within one") {
  SynthConfig sc;
  sc.domains = 2;
  sc.dim = 6;
  sc.labeled_per_domain = 23;
  sc.unlabeled_per_domain = 0;
  sc.seed = 5;
  MultiDomainDataset ds = synth_generate(sc);
  const FoldPlan plan = make_folds(ds, 5, 1);
  std::vector<size_t> sizes;
  for (int f = 0; f < 5; ++f) sizes.push_back(plan.indices_in(0, f).size());
  const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
  CHECK(*mx - *mn <= 1);
  CHECK_THROWS_AS(make_folds(MultiDomainDataset{}, 1, 0), ConfigError);
}

TEST_CASE("synthetic generator determinism and structure") {
  SynthConfig sc;
  sc.seed = 11;
  MultiDomainDataset a = synth_generate(sc);
  MultiDomainDataset b = synth_generate(sc);
  REQUIRE(a.domain_count() == 4);
  CHECK(a.feature_dim == 64);
  CHECK(a.domains[0].labeled.size() == 200);
  CHECK(a.domains[0].unlabeled.size() == 400);
  for (int d = 0; d < 4; ++d)
    for (size_t i = 0; i < a.domains[d].labeled.size(); ++i) {
      CHECK(a.domains[d].labeled[i].features == b.domains[d].labeled[i].features);
      CHECK(a.domains[d].labeled[i].label == b.domains[d].labeled[i].label);
    }
  // Labels are balanced and counts positive (canonical form).
  int pos = 0;
  for (const auto& ex : a.domains[1].labeled) {
    pos += *ex.label;
    int prev = -1;
    for (const auto& [id, count] : ex.features) {
      CHECK(count > 0.0);
      CHECK(id > prev);
      prev = id;
    }
  }
  CHECK(pos == 100);
}

TEST_CASE("zero domain shift gives statistically indistinguishable domains") {
  SynthConfig sc;
  sc.domain_shift = 0.0;
  sc.labeled_per_domain = 600;
  sc.unlabeled_per_domain = 0;
  sc.seed = 23;
  MultiDomainDataset ds = synth_generate(sc);

  // Per-coordinate empirical means across domains stay within 3 standard
  // errors of each other.
  const int dim = ds.feature_dim;
  std::vector<std::vector<double>> mean(4, std::vector<double>(static_cast<size_t>(dim), 0.0));
  std::vector<std::vector<double>> var(4, std::vector<double>(static_cast<size_t>(dim), 0.0));
  const double n = 600.0;
  for (int d = 0; d < 4; ++d) {
    for (const auto& ex : ds.domains[static_cast<size_t>(d)].labeled)
      for (const auto& [id, c] : ex.features) mean[static_cast<size_t>(d)][static_cast<size_t>(id)] += c;
    for (auto& m : mean[static_cast<size_t>(d)]) m /= n;
    for (const auto& ex : ds.domains[static_cast<size_t>(d)].labeled) {
      std::vector<double> row(static_cast<size_t>(dim), 0.0);
      for (const auto& [id, c] : ex.features) row[static_cast<size_t>(id)] = c;
      for (int j = 0; j < dim; ++j) {
        const double dv = row[static_cast<size_t>(j)] - mean[static_cast<size_t>(d)][static_cast<size_t>(j)];
        var[static_cast<size_t>(d)][static_cast<size_t>(j)] += dv * dv;
      }
    }
    for (auto& v : var[static_cast<size_t>(d)]) v /= (n - 1.0);
  }
  int violations = 0;
  for (int d = 1; d < 4; ++d)
    for (int j = 0; j < dim; ++j) {
      const double se = std::sqrt(var[0][static_cast<size_t>(j)] / n +
                                  var[static_cast<size_t>(d)][static_cast<size_t>(j)] / n);
      if (std::abs(mean[0][static_cast<size_t>(j)] - mean[static_cast<size_t>(d)][static_cast<size_t>(j)]) >
          3.0 * se)
        ++violations;
    }
  // 3 sigma two-sided leaves ~0.3% expected exceedances; allow a small count.
  CHECK(violations <= 4);
}

TEST_CASE("separable synthetic data admits a near-perfect linear classifier") {
  SynthConfig sc;
  sc.shared_signal = 2.0;
  sc.noise = 0.3;
  sc.domain_shift = 0.5;
  sc.labeled_per_domain = 150;
  sc.unlabeled_per_domain = 0;
  sc.seed = 31;
  MultiDomainDataset ds = synth_generate(sc);

  // Logistic regression by plain gradient descent over the pooled domains.
  const int dim = ds.feature_dim;
  std::vector<double> w(static_cast<size_t>(dim) + 1, 0.0);
  std::vector<std::pair<std::vector<double>, int>> data;
  for (const auto& dom : ds.domains)
    for (const auto& ex : dom.labeled) {
      std::vector<double> row(static_cast<size_t>(dim), 0.0);
      for (const auto& [id, c] : ex.features) row[static_cast<size_t>(id)] = c;
      data.emplace_back(std::move(row), *ex.label);
    }
  for (int epoch = 0; epoch < 200; ++epoch) {
    std::vector<double> grad(w.size(), 0.0);
    for (const auto& [row, y] : data) {
      double z = w.back();
      for (int j = 0; j < dim; ++j) z += w[static_cast<size_t>(j)] * row[static_cast<size_t>(j)];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = p - y;
      for (int j = 0; j < dim; ++j) grad[static_cast<size_t>(j)] += err * row[static_cast<size_t>(j)];
      grad.back() += err;
    }
    for (size_t j = 0; j < w.size(); ++j) w[j] -= 0.01 * grad[j] / static_cast<double>(data.size());
  }
  int correct = 0;
  for (const auto& [row, y] : data) {
    double z = w.back();
    for (int j = 0; j < dim; ++j) z += w[static_cast<size_t>(j)] * row[static_cast<size_t>(j)];
    if ((z > 0.0 ? 1 : 0) == y) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(data.size()) > 0.99);
}

TEST_CASE("dataset dump and reload round-trips through the parser") {
  const fs::path dir = fs::temp_directory_path() / "mran_dump_test";
  fs::remove_all(dir);
  SynthConfig sc;
  sc.domains = 2;
  sc.dim = 8;
  sc.labeled_per_domain = 20;
  sc.unlabeled_per_domain = 10;
  sc.seed = 47;
  MultiDomainDataset ds = synth_generate(sc);
  dump_dataset(ds, dir.string());

  CHECK(fs::exists(dir / "synth0" / "positive.review"));
  CHECK(fs::exists(dir / "synth0" / "negative.review"));
  CHECK(fs::exists(dir / "synth1" / "unlabeled.review"));

  MultiDomainDataset back = load_review_dataset(dir.string(), {"synth0", "synth1"}, 8);
  CHECK(back.feature_dim == 8);
  CHECK(back.domains[0].labeled.size() == 20);
  CHECK(back.domains[0].unlabeled.size() == 10);
  int pos = 0;
  for (const auto& ex : back.domains[0].labeled) pos += *ex.label;
  CHECK(pos == 10);

  // Dumping again from the same dataset produces identical files.
  const fs::path dir2 = fs::temp_directory_path() / "mran_dump_test2";
  fs::remove_all(dir2);
  dump_dataset(ds, dir2.string());
  for (const char* name : {"positive.review", "negative.review", "unlabeled.review"}) {
    std::ifstream f1(dir / "synth0" / name), f2(dir2 / "synth0" / name);
    std::string a((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(a == b);
    CHECK(!a.empty());
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("missing data directory produces an actionable error") {
  CHECK_THROWS_WITH_AS(load_review_dataset("/nonexistent_mran_dir", {"books"}, 100),
                       "missing data file: /nonexistent_mran_dir/books/positive.review "
                       "(expected <data-dir>/<domain>/{positive,negative,unlabeled}.review)",
                       Error);
}
