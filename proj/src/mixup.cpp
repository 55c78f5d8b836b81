#include "mran/mixup.hpp"

#include <cmath>

#include "mran/error.hpp"

namespace mran {

namespace {

double lambda_for_row(std::span<const double> lambdas, int row) {
  return lambdas.size() == 1 ? lambdas[0] : lambdas[static_cast<size_t>(row)];
}

void check_lambdas(std::span<const double> lambdas, int rows, const char* what) {
  if (lambdas.empty() || (lambdas.size() != 1 && static_cast<int>(lambdas.size()) != rows))
    throw UsageError(std::string(what) + ": need 1 or " + std::to_string(rows) +
                     " interpolation coefficients, got " + std::to_string(lambdas.size()));
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0))
      throw UsageError(std::string(what) + ": interpolation coefficient " + std::to_string(l) +
                       " outside [0, 1]");
}

void check_nonempty(const Tensor& x, const char* what) {
  if (!x.defined() || x.ndim() != 2 || x.dim(0) < 1)
    throw UsageError(std::string(what) + ": empty or non-matrix batch");
}

void check_distribution_rows(const Tensor& y, const char* what) {
  const int m = y.rows(), c = y.cols();
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      const double v = y.at(i, j);
      if (v < 0.0)
        throw ValidationError(std::string(what) + ": label row " + std::to_string(i) +
                              " has a negative entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw ValidationError(std::string(what) + ": label row " + std::to_string(i) + " sums to " +
                            std::to_string(s));
  }
}

}  // namespace

double sample_lambda(double alpha, Rng& rng) {
  if (alpha <= 0.0)
    throw ConfigError("mixup alpha must be positive, got " + std::to_string(alpha));
  return rng.beta(alpha, alpha);
}

Tensor mix_rows(const Tensor& a, const Tensor& b, std::span<const double> lambdas) {
  if (a.shape() != b.shape())
    throw DimensionError("mix_rows shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  const int m = a.rows(), c = a.cols();
  check_lambdas(lambdas, m, "mix_rows");
  Tensor out = Tensor::zeros({m, c});
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (int i = 0; i < m; ++i) {
    const double l = lambda_for_row(lambdas, i);
    const size_t off = static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) ov[off + j] = l * av[off + j] + (1.0 - l) * bv[off + j];
  }
  return out;
}

Mixed mix(const MixPair& pair) {
  if (!(pair.lambda >= 0.0 && pair.lambda <= 1.0))
    throw UsageError("mix: lambda " + std::to_string(pair.lambda) + " outside [0, 1]");
  if (pair.y_first.has_value() != pair.y_second.has_value())
    throw UsageError("mix: labels must be present for both instances or neither");
  const double ls[1] = {pair.lambda};
  Mixed out;
  out.x = mix_rows(pair.x_first, pair.x_second, ls);
  if (pair.y_first) {
    check_distribution_rows(*pair.y_first, "mix");
    check_distribution_rows(*pair.y_second, "mix");
    out.y = mix_rows(*pair.y_first, *pair.y_second, ls);
  }
  return out;
}

Tensor labeled_category_mixup_loss(Graph& g, const MranModel& model, int domain,
                                   const Tensor& x_first, const Tensor& y_first,
                                   const Tensor& x_second, const Tensor& y_second,
                                   std::span<const double> lambdas, bool training, Rng* rng) {
  check_nonempty(x_first, "labeled_category_mixup_loss");
  Tensor x_mix = mix_rows(x_first, x_second, lambdas);
  Tensor y_mix = mix_rows(y_first, y_second, lambdas);
  Tensor logp = model.class_log_probs(g, domain, x_mix, training, rng);
  return nll_soft(g, logp, y_mix);
}

Tensor unlabeled_consistency_loss(Graph& g, const MranModel& model, int domain,
                                  const Tensor& x_first, const Tensor& x_second,
                                  std::span<const double> lambdas, bool training, Rng* rng,
                                  const ConsistencyOptions& opts) {
  check_nonempty(x_first, "unlabeled_consistency_loss");
  check_lambdas(lambdas, x_first.rows(), "unlabeled_consistency_loss");
  Tensor x_mix = mix_rows(x_first, x_second, lambdas);
  Tensor p_mix = model.class_log_probs(g, domain, x_mix, training, rng);

  if (opts.frozen_target) return l1_distance(g, p_mix, *opts.frozen_target);

  if (opts.propagate_target) {
    Tensor p_first = model.class_log_probs(g, domain, x_first, training, rng);
    Tensor p_second = model.class_log_probs(g, domain, x_second, training, rng);
    const int m = p_first.rows(), c = p_first.cols();
    Tensor lam = Tensor::zeros({m, c});
    Tensor lam_c = Tensor::zeros({m, c});
    for (int i = 0; i < m; ++i) {
      const double l = lambda_for_row(lambdas, i);
      for (int j = 0; j < c; ++j) {
        lam.values()[static_cast<size_t>(i) * c + j] = l;
        lam_c.values()[static_cast<size_t>(i) * c + j] = 1.0 - l;
      }
    }
    Tensor target = add(g, mul(g, p_first, lam), mul(g, p_second, lam_c));
    return l1_distance(g, p_mix, target);
  }

  // Default: the interpolated-prediction target is a constant.
  Tensor target;
  {
    Graph local;
    Tensor p_first = model.class_log_probs(local, domain, x_first, training, rng);
    Tensor p_second = model.class_log_probs(local, domain, x_second, training, rng);
    target = mix_rows(p_first.detach(), p_second.detach(), lambdas);
  }
  return l1_distance(g, p_mix, target);
}

Tensor domain_mixup_adv_nll(Graph& g, const MranModel& model, int domain, const Tensor& x_first,
                            const Tensor& x_second, std::span<const double> lambdas, bool training,
                            Rng* rng, bool detach_shared) {
  check_nonempty(x_first, "domain_mixup_adv_nll");
  Tensor x_mix = mix_rows(x_first, x_second, lambdas);
  Tensor shared;
  if (detach_shared) {
    Graph local;
    shared = model.shared_features(local, x_mix, training, rng).detach();
  } else {
    shared = model.shared_features(g, x_mix, training, rng);
  }
  Tensor logd = model.discriminate(g, shared, training, rng);
  return nll_soft(g, logd, onehot_rows(domain, model.domain_count(), x_mix.rows()));
}

Tensor domain_mixup_adv_loss(Graph& g, const MranModel& model, const StepBatch& step,
                             bool training, Rng* rng, bool detach_shared) {
  if (step.domains.empty()) throw UsageError("domain_mixup_adv_loss: no domain batches");
  Tensor total;
  for (const DomainBatch& b : step.domains) {
    Tensor term = domain_mixup_adv_nll(g, model, b.domain, b.adv_x, b.adv_x2, b.adv_lambdas,
                                       training, rng, detach_shared);
    total = total.defined() ? add(g, total, term) : term;
  }
  return total;
}

}  // namespace mran
