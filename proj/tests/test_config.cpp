#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mran/config.hpp"
#include "mran/experiment.hpp"

using namespace mran;

TEST_CASE("defaults match the reference setup") {
  ExperimentConfig c;
  CHECK(c.batch_size == 8);
  CHECK(c.max_epochs == 50);
  CHECK(c.learning_rate == 0.0001);
  CHECK(c.alpha == 0.2);
  CHECK(c.weights.lambda_d == 1.0);
  CHECK(c.weights.lambda_a == 0.001);
  CHECK(c.weights.lambda_u == 0.1);
  CHECK(c.weights.lambda_m == 0.00001);
  CHECK(c.dropout == 0.4);
  CHECK(c.k_d == 5);
  CHECK(c.vocab_size == 5000);
  CHECK(c.shared_dim == 128);
  CHECK(c.domain_dim == 64);
  CHECK(c.extractor_hidden == std::vector<int>{1000, 500});
  CHECK(c.folds == 5);
  CHECK(c.weight_decay == 0.0);
  CHECK(c.clip_norm == 0.0);
}

TEST_CASE("ablation flags translate to zero weights") {
  ExperimentConfig c;
  SUBCASE("dm zeroes lambda_m") {
    c.ablate_dm = true;
    const LossWeights w = effective_weights(c);
    CHECK(w.lambda_m == 0.0);
    CHECK(w.lambda_a == 0.001);
    CHECK(w.lambda_u == 0.1);
  }
  SUBCASE("lcm zeroes lambda_a") {
    c.ablate_lcm = true;
    const LossWeights w = effective_weights(c);
    CHECK(w.lambda_a == 0.0);
    CHECK(w.lambda_u == 0.1);
  }
  SUBCASE("ucm zeroes lambda_u") {
    c.ablate_ucm = true;
    const LossWeights w = effective_weights(c);
    CHECK(w.lambda_u == 0.0);
    CHECK(w.lambda_a == 0.001);
  }
  SUBCASE("cm zeroes both category terms") {
    c.ablate_cm = true;
    const LossWeights w = effective_weights(c);
    CHECK(w.lambda_a == 0.0);
    CHECK(w.lambda_u == 0.0);
    CHECK(w.lambda_m == 0.00001);
  }
}

TEST_CASE("config echo lists every field verbatim and is stable") {
  ExperimentConfig c;
  c.seed = 42;
  c.data_dir = "/tmp/corpus";
  const std::string echo = config_echo(c);
  CHECK(echo == config_echo(c));
  for (const char* key :
       {"data_dir = /tmp/corpus", "seed = 42", "batch_size = 8", "learning_rate = 1e-04",
        "alpha = 0.2", "lambda_d = 1", "lambda_a = 0.001", "lambda_u = 0.1", "lambda_m = 1e-05",
        "k_d = 5", "dropout = 0.4", "vocab_size = 5000", "shared_dim = 128", "domain_dim = 64",
        "extractor_hidden = 1000,500", "max_epochs = 50", "folds = 5", "domain_shift = 1",
        "ablate_dm = false"}) {
    CAPTURE(key);
    CHECK(echo.find(key) != std::string::npos);
  }
}

TEST_CASE("derived model and trainer views") {
  ExperimentConfig c;
  c.dropout = 0.25;
  c.k_d = 3;
  const ModelConfig m = model_config(c, 777, 6);
  CHECK(m.input_dim == 777);
  CHECK(m.domains == 6);
  CHECK(m.dropout == 0.25);
  const TrainerOptions t = trainer_options(c, 99);
  CHECK(t.k_d == 3);
  CHECK(t.seed == 99);
  CHECK(t.weights.lambda_u == 0.1);
}

TEST_CASE("summary statistics helpers") {
  CHECK(sample_std({}, 0.0) == 0.0);
  CHECK(sample_std({5.0}, 5.0) == 0.0);
  CHECK(sample_std({1.0, 3.0}, 2.0) == doctest::Approx(std::sqrt(2.0)));

  RunSummary s;
  s.domain_names = {"a", "b"};
  s.per_run = {{80.0, 90.0}, {82.0, 92.0}};
  const auto avgs = s.run_averages();
  CHECK(avgs[0] == doctest::Approx(85.0));
  CHECK(avgs[1] == doctest::Approx(87.0));
}

TEST_CASE("summary table has one row per domain plus AVG") {
  RunSummary s;
  s.domain_names = {"books", "dvd", "electronics", "kitchen"};
  s.per_run = {{84.60, 85.60, 89.10, 91.25}};
  s.domain_mean = {84.60, 85.60, 89.10, 91.25};
  s.domain_std = {0.18, 0.16, 0.05, 0.19};
  s.average_mean = 87.64;
  s.average_std = 0.08;
  const std::string table = format_summary_table(s);
  std::istringstream is(table);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 6);  // header + 4 domains + AVG
  CHECK(lines[0].rfind("Domain", 0) == 0);
  CHECK(lines[1].rfind("books", 0) == 0);
  CHECK(lines[5].rfind("AVG", 0) == 0);
  CHECK(lines[5].find("87.64") != std::string::npos);
}
