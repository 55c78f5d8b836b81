#pragma once

#include <optional>
#include <span>

#include "mran/batch.hpp"
#include "mran/model.hpp"
#include "mran/rng.hpp"
#include "mran/tensor.hpp"

namespace mran {

// One draw from Beta(alpha, alpha) via two Gamma(alpha, 1) draws. alpha > 0.
double sample_lambda(double alpha, Rng& rng);

// Two instances (or stacked batches of instances), their optional soft
// labels, and the interpolation coefficient shared by the input mix and the
// label mix.
struct MixPair {
  Tensor x_first, x_second;
  std::optional<Tensor> y_first, y_second;
  double lambda = 0.5;
};

struct Mixed {
  Tensor x;
  std::optional<Tensor> y;
};

// lambda*x_first + (1-lambda)*x_second, and the same blend of the labels
// when both are present. Labels must be valid distributions per row.
Mixed mix(const MixPair& pair);

// Row-wise interpolation lambdas[i]*a[i] + (1-lambdas[i])*b[i]; lambdas has
// one entry per row or a single shared entry. Plain value math, no graph.
Tensor mix_rows(const Tensor& a, const Tensor& b, std::span<const double> lambdas);

// Labeled category mixup: mean NLL of the classifier on the blended inputs
// against the blended labels, for pairs drawn from one domain's labeled set.
Tensor labeled_category_mixup_loss(Graph& g, const MranModel& model, int domain,
                                   const Tensor& x_first, const Tensor& y_first,
                                   const Tensor& x_second, const Tensor& y_second,
                                   std::span<const double> lambdas, bool training, Rng* rng);

struct ConsistencyOptions {
  // Precomputed target log-probs (used by gradient checking, where the
  // target must stay fixed while parameters are perturbed).
  const Tensor* frozen_target = nullptr;
  // Let gradient flow through the interpolated-prediction target instead of
  // treating it as a constant.
  bool propagate_target = false;
};

// Unlabeled consistency: mean l1 discrepancy between the class log-probs at
// the blended input and the blend of the endpoint log-probs, for pairs from
// one domain's unlabeled set. The target side is gradient-detached unless
// opts say otherwise.
Tensor unlabeled_consistency_loss(Graph& g, const MranModel& model, int domain,
                                  const Tensor& x_first, const Tensor& x_second,
                                  std::span<const double> lambdas, bool training, Rng* rng,
                                  const ConsistencyOptions& opts = {});

// One domain's share of the domain mixup adversarial loss: mean NLL of the
// discriminator assigning the blended instances' shared features to that
// domain. Pairs must come from a single domain (its labeled ∪ unlabeled
// pool); the blended instances keep the domain label. With detach_shared the
// features are constants (discriminator-update view).
Tensor domain_mixup_adv_nll(Graph& g, const MranModel& model, int domain, const Tensor& x_first,
                            const Tensor& x_second, std::span<const double> lambdas, bool training,
                            Rng* rng, bool detach_shared);

// Sum over domains of domain_mixup_adv_nll on each batch's adversarial pairs.
Tensor domain_mixup_adv_loss(Graph& g, const MranModel& model, const StepBatch& step,
                             bool training, Rng* rng, bool detach_shared);

}  // namespace mran
