#include "mran/losses.hpp"

#include "mran/error.hpp"

namespace mran {

Tensor domain_adversarial_nll(Graph& g, const MranModel& model, int domain, const Tensor& x,
                              bool training, Rng* rng, bool detach_shared) {
  if (!x.defined() || x.ndim() != 2 || x.dim(0) < 1)
    throw UsageError("domain_adversarial_nll: empty batch");
  Tensor shared;
  if (detach_shared) {
    Graph local;
    shared = model.shared_features(local, x, training, rng).detach();
  } else {
    shared = model.shared_features(g, x, training, rng);
  }
  Tensor logd = model.discriminate(g, shared, training, rng);
  return nll_soft(g, logd, onehot_rows(domain, model.domain_count(), x.dim(0)));
}

Tensor adversarial_loss(Graph& g, const MranModel& model, const StepBatch& step, bool training,
                        Rng* rng, bool detach_shared) {
  if (step.domains.empty()) throw UsageError("adversarial_loss: no domain batches");
  Tensor total;
  for (const DomainBatch& b : step.domains) {
    Tensor term = domain_adversarial_nll(g, model, b.domain, b.adv_x, training, rng, detach_shared);
    total = total.defined() ? add(g, total, term) : term;
  }
  return total;
}

Tensor classification_nll(Graph& g, const MranModel& model, int domain, const Tensor& x,
                          const Tensor& y, bool training, Rng* rng) {
  if (!x.defined() || x.ndim() != 2 || x.dim(0) < 1)
    throw UsageError("classification_nll: empty batch");
  Tensor logp = model.class_log_probs(g, domain, x, training, rng);
  return nll_soft(g, logp, y);
}

Tensor classification_loss(Graph& g, const MranModel& model, const StepBatch& step, bool training,
                           Rng* rng) {
  if (step.domains.empty()) throw UsageError("classification_loss: no domain batches");
  Tensor total;
  for (const DomainBatch& b : step.domains) {
    Tensor term = classification_nll(g, model, b.domain, b.labeled_x, b.labeled_y, training, rng);
    total = total.defined() ? add(g, total, term) : term;
  }
  return total;
}

}  // namespace mran
