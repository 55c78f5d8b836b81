#include "mran/verify.hpp"

#include <algorithm>

#include "mran/error.hpp"
#include "mran/gradcheck.hpp"
#include "mran/losses.hpp"
#include "mran/mixup.hpp"

namespace mran {

std::vector<std::string> gradcheck_term_names() {
  return {"l_adv", "l_c", "l_a", "l_u", "l_m", "composite"};
}

GradCheckReport gradcheck_losses(uint64_t seed, const std::vector<std::string>& only_terms,
                                 const LossWeights& weights, double step) {
  const auto valid = gradcheck_term_names();
  for (const auto& t : only_terms)
    if (std::find(valid.begin(), valid.end(), t) == valid.end()) {
      std::string names;
      for (const auto& v : valid) names += (names.empty() ? "" : ", ") + v;
      throw ConfigError("unknown gradcheck term '" + t + "' (valid: " + names + ")");
    }
  auto wanted = [&](const std::string& t) {
    return only_terms.empty() || std::find(only_terms.begin(), only_terms.end(), t) != only_terms.end();
  };

  ModelConfig mc;
  mc.input_dim = 12;
  mc.domains = 3;
  mc.extractor_hidden = {10, 7};
  mc.shared_dim = 6;
  mc.domain_dim = 5;
  mc.dropout = 0.0;
  MranModel model(mc, seed);

  Rng rng(Rng::mix_seed(seed, 0x67636865636bull));
  const int b = 4;
  StepBatch step_batch;
  step_batch.lambda = 0.2 + 0.6 * rng.uniform();
  for (int d = 0; d < mc.domains; ++d) {
    DomainBatch db;
    db.domain = d;
    db.labeled_x = Tensor::uniform({b, mc.input_dim}, 0.0, 2.0, rng);
    db.labeled_x2 = Tensor::uniform({b, mc.input_dim}, 0.0, 2.0, rng);
    db.labeled_y = Tensor::zeros({b, 2});
    db.labeled_y2 = Tensor::zeros({b, 2});
    for (int i = 0; i < b; ++i) {
      db.labeled_y.values()[static_cast<size_t>(i) * 2 + rng.uniform_int(2)] = 1.0;
      db.labeled_y2.values()[static_cast<size_t>(i) * 2 + rng.uniform_int(2)] = 1.0;
    }
    db.adv_x = Tensor::uniform({b, mc.input_dim}, 0.0, 2.0, rng);
    db.adv_x2 = Tensor::uniform({b, mc.input_dim}, 0.0, 2.0, rng);
    db.cons_x = Tensor::uniform({b, mc.input_dim}, 0.0, 2.0, rng);
    db.cons_x2 = Tensor::uniform({b, mc.input_dim}, 0.0, 2.0, rng);
    db.labeled_lambdas = {step_batch.lambda};
    db.adv_lambdas = {step_batch.lambda};
    db.cons_lambdas = {step_batch.lambda};
    step_batch.domains.push_back(std::move(db));
  }

  // Fixed consistency targets, computed at the base parameters. The raw
  // interpolated target sits near the achievable predictions, i.e. near the
  // |.| kink of the l1 penalty, so each entry is displaced by a margin far
  // larger than the finite-difference step to keep the check at a
  // differentiable point.
  std::vector<Tensor> frozen_targets;
  for (const DomainBatch& db : step_batch.domains) {
    Graph g;
    Tensor p_first = model.class_log_probs(g, db.domain, db.cons_x, false, nullptr);
    Tensor p_second = model.class_log_probs(g, db.domain, db.cons_x2, false, nullptr);
    Tensor target = mix_rows(p_first.detach(), p_second.detach(), db.cons_lambdas);
    Tensor x_mix = mix_rows(db.cons_x, db.cons_x2, db.cons_lambdas);
    Tensor p_mix = model.class_log_probs(g, db.domain, x_mix, false, nullptr);
    for (int64_t i = 0; i < target.size(); ++i) {
      const double side = p_mix.values()[i] >= target.values()[i] ? 1.0 : -1.0;
      target.values()[i] -= 0.05 * side;
    }
    frozen_targets.push_back(target);
  }

  auto loss_adv = [&](Graph& g) {
    return adversarial_loss(g, model, step_batch, false, nullptr, false);
  };
  auto loss_c = [&](Graph& g) { return classification_loss(g, model, step_batch, false, nullptr); };
  auto loss_a = [&](Graph& g) {
    Tensor total;
    for (const DomainBatch& db : step_batch.domains) {
      Tensor t = labeled_category_mixup_loss(g, model, db.domain, db.labeled_x, db.labeled_y,
                                             db.labeled_x2, db.labeled_y2, db.labeled_lambdas,
                                             false, nullptr);
      total = total.defined() ? add(g, total, t) : t;
    }
    return total;
  };
  auto loss_u = [&](Graph& g) {
    Tensor total;
    for (size_t d = 0; d < step_batch.domains.size(); ++d) {
      const DomainBatch& db = step_batch.domains[d];
      ConsistencyOptions opts;
      opts.frozen_target = &frozen_targets[d];
      Tensor t = unlabeled_consistency_loss(g, model, db.domain, db.cons_x, db.cons_x2,
                                            db.cons_lambdas, false, nullptr, opts);
      total = total.defined() ? add(g, total, t) : t;
    }
    return total;
  };
  auto loss_m = [&](Graph& g) {
    return domain_mixup_adv_loss(g, model, step_batch, false, nullptr, false);
  };
  auto loss_composite = [&](Graph& g) {
    Tensor total = loss_c(g);
    if (weights.lambda_a > 0.0) total = add(g, total, scale(g, loss_a(g), weights.lambda_a));
    if (weights.lambda_u > 0.0) total = add(g, total, scale(g, loss_u(g), weights.lambda_u));
    if (weights.lambda_d > 0.0) {
      Tensor d_part = loss_adv(g);
      if (weights.lambda_m > 0.0)
        d_part = add(g, d_part, scale(g, loss_m(g), weights.lambda_m));
      total = add(g, total, scale(g, d_part, -weights.lambda_d));
    }
    return total;
  };

  std::vector<std::pair<std::string, LossFn>> terms;
  terms.emplace_back("l_adv", loss_adv);
  terms.emplace_back("l_c", loss_c);
  terms.emplace_back("l_a", loss_a);
  terms.emplace_back("l_u", loss_u);
  terms.emplace_back("l_m", loss_m);
  terms.emplace_back("composite", loss_composite);

  GradCheckReport report;
  for (auto& [name, fn] : terms) {
    if (!wanted(name)) continue;
    double worst = 0.0;
    for (const auto& [pname, param] : model.named_params())
      worst = std::max(worst, finite_diff_check(fn, param, step));
    report.terms.push_back({name, worst});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  return report;
}

}  // namespace mran
