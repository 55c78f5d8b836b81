#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mran/gradcheck.hpp"
#include "mran/losses.hpp"
#include "mran/mixup.hpp"
#include "mran/model.hpp"

using namespace mran;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_dim = 8;
  c.domains = 4;
  c.extractor_hidden = {6, 5};
  c.shared_dim = 4;
  c.domain_dim = 3;
  c.dropout = 0.0;
  return c;
}

Tensor random_labels(int rows, Rng& rng) {
  Tensor y = Tensor::zeros({rows, 2});
  for (int i = 0; i < rows; ++i) y.values()[static_cast<size_t>(i) * 2 + rng.uniform_int(2)] = 1.0;
  return y;
}

}  // namespace

TEST_CASE("beta sampler statistics") {
  SUBCASE("alpha=1 is uniform (Kolmogorov-Smirnov)") {
    Rng rng(101);
    const int n = 100000;
    std::vector<double> draws(n);
    for (double& d : draws) d = sample_lambda(1.0, rng);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = draws[static_cast<size_t>(i)];
      ks = std::max(ks, std::abs((i + 1.0) / n - x));
      ks = std::max(ks, std::abs(x - static_cast<double>(i) / n));
    }
    CHECK(ks < 0.02);
  }
  SUBCASE("mean is 0.5 for several alphas") {
    for (double alpha : {0.2, 0.5, 1.0, 2.0}) {
      Rng rng(202);
      double mean = 0.0;
      const int n = 100000;
      for (int i = 0; i < n; ++i) mean += sample_lambda(alpha, rng);
      mean /= n;
      CHECK(std::abs(mean - 0.5) < 0.01);
    }
  }
  SUBCASE("variance at alpha=0.2 matches the closed form") {
    Rng rng(303);
    const int n = 100000;
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double l = sample_lambda(0.2, rng);
      CHECK(l >= 0.0);
      CHECK(l <= 1.0);
      mean += l;
      sq += l * l;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    const double expected = 1.0 / (4.0 * (2.0 * 0.2 + 1.0));  // alpha*beta/((a+b)^2 (a+b+1))
    CHECK(std::abs(var - expected) < 0.05 * expected);
  }
  SUBCASE("extreme shapes stay in range with the right mean") {
    for (double alpha : {0.05, 5.0, 50.0}) {
      Rng rng(404);
      double mean = 0.0;
      const int n = 100000;
      for (int i = 0; i < n; ++i) {
        const double l = sample_lambda(alpha, rng);
        CHECK(l >= 0.0);
        CHECK(l <= 1.0);
        mean += l;
      }
      CHECK(std::abs(mean / n - 0.5) < 0.01);
    }
  }
  CHECK_THROWS_AS([] { Rng r(1); return sample_lambda(0.0, r); }(), ConfigError);
}

TEST_CASE("mix endpoints and hand values") {
  MixPair pair;
  pair.x_first = Tensor::from_values({1, 2}, {0, 2});
  pair.x_second = Tensor::from_values({1, 2}, {2, 0});
  pair.y_first = Tensor::from_values({1, 2}, {1, 0});
  pair.y_second = Tensor::from_values({1, 2}, {0, 1});

  pair.lambda = 1.0;
  Mixed at_one = mix(pair);
  CHECK(at_one.x.values()[0] == 0.0);
  CHECK(at_one.x.values()[1] == 2.0);
  CHECK(at_one.y->values()[0] == 1.0);

  pair.lambda = 0.5;
  Mixed mid = mix(pair);
  CHECK(mid.x.values()[0] == doctest::Approx(1.0));
  CHECK(mid.x.values()[1] == doctest::Approx(1.0));

  pair.lambda = 0.3;
  Mixed blend = mix(pair);
  CHECK(blend.y->values()[0] == doctest::Approx(0.3));
  CHECK(blend.y->values()[1] == doctest::Approx(0.7));

  // Blended labels stay on the simplex.
  Rng rng(7);
  for (int t = 0; t < 1000; ++t) {
    pair.lambda = rng.uniform();
    Mixed m = mix(pair);
    double s = 0.0;
    for (double v : m.y->values()) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }

  pair.x_second = Tensor::zeros({1, 3});
  CHECK_THROWS_AS(mix(pair), DimensionError);
}

TEST_CASE("labeled mixup collapses to the plain loss at lambda=1") {
  MranModel model(tiny_config(), 5);
  Rng rng(11);
  Tensor xk = Tensor::uniform({6, 8}, 0, 2, rng);
  Tensor xs = Tensor::uniform({6, 8}, 0, 2, rng);
  Tensor yk = random_labels(6, rng);
  Tensor ys = random_labels(6, rng);

  const double one[1] = {1.0};
  Graph g;
  const double mixed = labeled_category_mixup_loss(g, model, 2, xk, yk, xs, ys, one, false, nullptr).item();
  const double plain = classification_nll(g, model, 2, xk, yk, false, nullptr).item();
  CHECK(std::abs(mixed - plain) < 1e-10);
}

TEST_CASE("degenerate pair equals the plain loss for any lambda") {
  MranModel model(tiny_config(), 6);
  Rng rng(12);
  Tensor x = Tensor::uniform({4, 8}, 0, 2, rng);
  Tensor y = random_labels(4, rng);
  for (double lambda : {0.0, 0.2, 0.5, 0.9}) {
    const double ls[1] = {lambda};
    Graph g;
    const double mixed = labeled_category_mixup_loss(g, model, 0, x, y, x, y, ls, false, nullptr).item();
    const double plain = classification_nll(g, model, 0, x, y, false, nullptr).item();
    CHECK(std::abs(mixed - plain) < 1e-10);
  }
}

TEST_CASE("labeled mixup obeys soft-target linearity") {
  MranModel model(tiny_config(), 7);
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    Tensor xk = Tensor::uniform({3, 8}, 0, 2, rng);
    Tensor xs = Tensor::uniform({3, 8}, 0, 2, rng);
    Tensor yk = random_labels(3, rng);
    Tensor ys = random_labels(3, rng);
    const double lambda = rng.uniform();
    const double ls[1] = {lambda};
    Graph g;
    const double full =
        labeled_category_mixup_loss(g, model, 1, xk, yk, xs, ys, ls, false, nullptr).item();
    Tensor x_mix = mix_rows(xk, xs, ls);
    const double against_first = classification_nll(g, model, 1, x_mix, yk, false, nullptr).item();
    const double against_second = classification_nll(g, model, 1, x_mix, ys, false, nullptr).item();
    CHECK(full ==
          doctest::Approx(lambda * against_first + (1 - lambda) * against_second).epsilon(1e-9));
  }
}

TEST_CASE("consistency penalty vanishes for identical pairs and lambda endpoints") {
  MranModel model(tiny_config(), 8);
  Rng rng(14);
  Tensor x = Tensor::uniform({5, 8}, 0, 2, rng);
  Tensor other = Tensor::uniform({5, 8}, 0, 2, rng);
  for (double lambda : {0.0, 0.3, 0.7, 1.0}) {
    const double ls[1] = {lambda};
    Graph g;
    CHECK(unlabeled_consistency_loss(g, model, 0, x, x, ls, false, nullptr).item() < 1e-10);
  }
  const double one[1] = {1.0};
  Graph g;
  CHECK(unlabeled_consistency_loss(g, model, 0, x, other, one, false, nullptr).item() < 1e-10);
  const double zero[1] = {0.0};
  CHECK(unlabeled_consistency_loss(g, model, 0, x, other, zero, false, nullptr).item() < 1e-10);
}

TEST_CASE("consistency penalty is zero for a linear predictor, positive after log-softmax") {
  Rng rng(15);
  Tensor w = Tensor::uniform({8, 2}, -1, 1, rng);
  Tensor xk = Tensor::uniform({4, 8}, 0, 2, rng);
  Tensor xs = Tensor::uniform({4, 8}, 0, 2, rng);
  const double ls[1] = {0.35};
  Tensor x_mix = mix_rows(xk, xs, ls);

  Graph g;
  Tensor linear_mix = matmul(g, x_mix, w);
  Tensor linear_target = mix_rows(matmul(g, xk, w), matmul(g, xs, w), ls);
  CHECK(l1_distance(g, linear_mix, linear_target).item() < 1e-10);

  Tensor soft_mix = log_softmax(g, matmul(g, x_mix, w));
  Tensor soft_target =
      mix_rows(log_softmax(g, matmul(g, xk, w)), log_softmax(g, matmul(g, xs, w)), ls);
  CHECK(l1_distance(g, soft_mix, soft_target).item() > 1e-8);
}

TEST_CASE("domain mixup collapses to the plain adversarial loss at lambda=1") {
  MranModel model(tiny_config(), 9);
  Rng rng(16);
  StepBatch step;
  step.lambda = 1.0;
  for (int d = 0; d < 4; ++d) {
    DomainBatch b;
    b.domain = d;
    b.adv_x = Tensor::uniform({3, 8}, 0, 2, rng);
    b.adv_x2 = Tensor::uniform({3, 8}, 0, 2, rng);
    b.adv_lambdas = {1.0};
    step.domains.push_back(std::move(b));
  }
  Graph g;
  const double mixed = domain_mixup_adv_loss(g, model, step, false, nullptr, false).item();
  const double plain = adversarial_loss(g, model, step, false, nullptr, false).item();
  CHECK(std::abs(mixed - plain) < 1e-10);
}

TEST_CASE("uniform discriminator on M=4 gives summed loss M ln 4") {
  // Zero inputs flow through zero biases to zero logits, a uniform response.
  MranModel model(tiny_config(), 10);
  StepBatch step;
  for (int d = 0; d < 4; ++d) {
    DomainBatch b;
    b.domain = d;
    b.adv_x = Tensor::zeros({2, 8});
    b.adv_x2 = Tensor::zeros({2, 8});
    b.adv_lambdas = {0.4};
    step.domains.push_back(std::move(b));
  }
  Graph g;
  const double loss = domain_mixup_adv_loss(g, model, step, false, nullptr, false).item();
  CHECK(loss == doctest::Approx(4.0 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("swapping the pair and lambda leaves every mixup loss unchanged") {
  MranModel model(tiny_config(), 12);
  Rng rng(18);
  for (int t = 0; t < 200; ++t) {
    Tensor xk = Tensor::uniform({2, 8}, 0, 2, rng);
    Tensor xs = Tensor::uniform({2, 8}, 0, 2, rng);
    Tensor yk = random_labels(2, rng);
    Tensor ys = random_labels(2, rng);
    const double lambda = rng.uniform();
    const double fwd[1] = {lambda};
    const double rev[1] = {1.0 - lambda};

    Graph g;
    const double a1 =
        labeled_category_mixup_loss(g, model, 0, xk, yk, xs, ys, fwd, false, nullptr).item();
    const double a2 =
        labeled_category_mixup_loss(g, model, 0, xs, ys, xk, yk, rev, false, nullptr).item();
    CHECK(a1 == doctest::Approx(a2).epsilon(1e-10));

    const double u1 = unlabeled_consistency_loss(g, model, 1, xk, xs, fwd, false, nullptr).item();
    const double u2 = unlabeled_consistency_loss(g, model, 1, xs, xk, rev, false, nullptr).item();
    CHECK(u1 == doctest::Approx(u2).epsilon(1e-10));

    const double m1 =
        domain_mixup_adv_nll(g, model, 2, xk, xs, fwd, false, nullptr, false).item();
    const double m2 =
        domain_mixup_adv_nll(g, model, 2, xs, xk, rev, false, nullptr, false).item();
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-10));
  }
}

TEST_CASE("domain mixup gradient w.r.t. shared parameters matches the oracle") {
  MranModel model(tiny_config(), 13);
  Rng rng(19);
  StepBatch step;
  for (int d = 0; d < 4; ++d) {
    DomainBatch b;
    b.domain = d;
    b.adv_x = Tensor::uniform({2, 8}, 0, 2, rng);
    b.adv_x2 = Tensor::uniform({2, 8}, 0, 2, rng);
    b.adv_lambdas = {0.37};
    step.domains.push_back(std::move(b));
  }
  auto f = [&](Graph& g) { return domain_mixup_adv_loss(g, model, step, false, nullptr, false); };
  double worst = 0.0;
  for (const Tensor& p : model.shared_params()) worst = std::max(worst, finite_diff_check(f, p, 1e-5));
  CHECK(worst < 1e-4);
}

TEST_CASE("per-row coefficients blend each pair independently") {
  Rng rng(21);
  Tensor a = Tensor::uniform({3, 8}, 0, 2, rng);
  Tensor b = Tensor::uniform({3, 8}, 0, 2, rng);
  const std::vector<double> ls = {0.1, 0.5, 0.9};
  Tensor mixed = mix_rows(a, b, ls);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(mixed.at(i, j) ==
            doctest::Approx(ls[static_cast<size_t>(i)] * a.at(i, j) +
                            (1 - ls[static_cast<size_t>(i)]) * b.at(i, j)));

  // The losses accept per-row coefficients too.
  MranModel model(tiny_config(), 23);
  Tensor yk = random_labels(3, rng);
  Tensor ys = random_labels(3, rng);
  Graph g;
  const double lcm =
      labeled_category_mixup_loss(g, model, 0, a, yk, b, ys, ls, false, nullptr).item();
  CHECK(std::isfinite(lcm));
  const double ucm = unlabeled_consistency_loss(g, model, 1, a, b, ls, false, nullptr).item();
  CHECK(ucm >= 0.0);
  const std::vector<double> wrong_count = {0.2, 0.8};
  CHECK_THROWS_AS(unlabeled_consistency_loss(g, model, 1, a, b, wrong_count, false, nullptr),
                  UsageError);
}

TEST_CASE("propagating the consistency target changes gradients, not the value") {
  MranModel model(tiny_config(), 24);
  Rng rng(25);
  Tensor xk = Tensor::uniform({4, 8}, 0, 2, rng);
  Tensor xs = Tensor::uniform({4, 8}, 0, 2, rng);
  const double ls[1] = {0.4};

  ConsistencyOptions flow;
  flow.propagate_target = true;
  double detached_value = 0.0, flowing_value = 0.0;
  std::vector<double> detached_grad, flowing_grad;
  for (int mode = 0; mode < 2; ++mode) {
    for (Tensor& p : model.all_params()) p.zero_grad();
    Graph g;
    Tensor loss = unlabeled_consistency_loss(g, model, 0, xk, xs, ls, false, nullptr,
                                             mode == 0 ? ConsistencyOptions{} : flow);
    g.backward(loss);
    auto& value = mode == 0 ? detached_value : flowing_value;
    value = loss.item();
    auto& grad = mode == 0 ? detached_grad : flowing_grad;
    for (const Tensor& p : model.shared_params())
      grad.insert(grad.end(), p.grad().begin(), p.grad().end());
  }
  CHECK(detached_value == doctest::Approx(flowing_value).epsilon(1e-12));
  double diff = 0.0;
  for (size_t i = 0; i < detached_grad.size(); ++i)
    diff += std::abs(detached_grad[i] - flowing_grad[i]);
  CHECK(diff > 1e-8);
}

TEST_CASE("empty batches are rejected") {
  MranModel model(tiny_config(), 14);
  Graph g;
  const double ls[1] = {0.5};
  Tensor empty;
  CHECK_THROWS_AS(
      labeled_category_mixup_loss(g, model, 0, empty, empty, empty, empty, ls, false, nullptr),
      UsageError);
  CHECK_THROWS_AS(unlabeled_consistency_loss(g, model, 0, empty, empty, ls, false, nullptr),
                  UsageError);
}
