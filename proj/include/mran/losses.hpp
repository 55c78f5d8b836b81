#pragma once

#include "mran/batch.hpp"
#include "mran/model.hpp"
#include "mran/rng.hpp"
#include "mran/tensor.hpp"

namespace mran {

// Mean -log D_domain(F_s(x)) over one domain's instances. With detach_shared
// the shared features are constants (the discriminator-update view).
Tensor domain_adversarial_nll(Graph& g, const MranModel& model, int domain, const Tensor& x,
                              bool training, Rng* rng, bool detach_shared);

// Sum over domains of domain_adversarial_nll on each batch's adversarial pool.
Tensor adversarial_loss(Graph& g, const MranModel& model, const StepBatch& step, bool training,
                        Rng* rng, bool detach_shared);

// Mean classifier NLL on one domain's labeled instances.
Tensor classification_nll(Graph& g, const MranModel& model, int domain, const Tensor& x,
                          const Tensor& y, bool training, Rng* rng);

// Sum over domains of classification_nll on each batch's labeled set.
Tensor classification_loss(Graph& g, const MranModel& model, const StepBatch& step, bool training,
                           Rng* rng);

}  // namespace mran
