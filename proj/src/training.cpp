#include "mran/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "mran/error.hpp"
#include "mran/losses.hpp"
#include "mran/mixup.hpp"

namespace mran {

// --- sampling ------------------------------------------------------------

CyclicSampler::CyclicSampler(int n, Rng* rng) : rng_(rng) {
  if (n <= 0) throw UsageError("cyclic sampler over an empty pool");
  order_.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order_[static_cast<size_t>(i)] = i;
  rng_->shuffle(order_);
}

int CyclicSampler::next() {
  if (pos_ == order_.size()) {
    rng_->shuffle(order_);
    pos_ = 0;
  }
  return order_[pos_++];
}

BatchSampler::BatchSampler(TrainingPools pools, const TrainerOptions& opts)
    : pools_(std::move(pools)),
      opts_(opts),
      data_rng_(Rng::mix_seed(opts.seed, 0x64617461ull)),
      mixup_rng_(Rng::mix_seed(opts.seed, 0x6d6978ull)) {
  if (pools_.domains.empty()) throw UsageError("no training pools");
  if (opts_.batch_size < 1) throw ConfigError("batch size must be at least 1");
  for (const DomainPools& dp : pools_.domains) {
    if (dp.labeled.empty() || dp.adversarial.empty() || dp.consistency.empty())
      throw UsageError("domain " + std::to_string(dp.domain) + " has an empty pool");
    DomainSamplers s;
    s.labeled = CyclicSampler(static_cast<int>(dp.labeled.size()), &data_rng_);
    s.adversarial = CyclicSampler(static_cast<int>(dp.adversarial.size()), &data_rng_);
    s.consistency = CyclicSampler(static_cast<int>(dp.consistency.size()), &data_rng_);
    samplers_.push_back(std::move(s));
  }
}

int BatchSampler::steps_per_epoch() const {
  size_t largest = 0;
  for (const DomainPools& dp : pools_.domains) largest = std::max(largest, dp.labeled.size());
  return static_cast<int>((largest + opts_.batch_size - 1) / opts_.batch_size);
}

Tensor BatchSampler::gather(const std::vector<const SparseExample*>& pool,
                            const std::vector<int>& idx) const {
  std::vector<const SparseExample*> rows;
  rows.reserve(idx.size());
  for (int i : idx) rows.push_back(pool[static_cast<size_t>(i)]);
  return densify(rows, pools_.feature_dim);
}

Tensor BatchSampler::gather_labels(const std::vector<const SparseExample*>& pool,
                                   const std::vector<int>& idx) const {
  Tensor y = Tensor::zeros({static_cast<int>(idx.size()), 2});
  for (size_t r = 0; r < idx.size(); ++r) {
    const SparseExample* ex = pool[static_cast<size_t>(idx[r])];
    if (!ex->label) throw UsageError("labeled pool contains an example without a label");
    y.values()[r * 2 + static_cast<size_t>(*ex->label)] = 1.0;
  }
  return y;
}

StepBatch BatchSampler::next_step() {
  StepBatch step;
  step.lambda = sample_lambda(opts_.alpha, mixup_rng_);
  for (size_t d = 0; d < pools_.domains.size(); ++d) {
    const DomainPools& dp = pools_.domains[d];
    DomainSamplers& s = samplers_[d];
    DomainBatch b;
    b.domain = dp.domain;

    auto draw = [&](CyclicSampler& sampler, size_t pool_size) {
      const int n = std::min<int>(opts_.batch_size, static_cast<int>(pool_size));
      std::vector<int> idx(static_cast<size_t>(n));
      for (int& i : idx) i = sampler.next();
      return idx;
    };
    auto permute = [&](const std::vector<int>& idx) {
      std::vector<int> perm = mixup_rng_.permutation(static_cast<int>(idx.size()));
      std::vector<int> out(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) out[i] = idx[static_cast<size_t>(perm[i])];
      return out;
    };
    auto lambdas = [&](size_t n) {
      if (!opts_.per_pair_lambda) return std::vector<double>{step.lambda};
      std::vector<double> ls(n);
      for (double& l : ls) l = sample_lambda(opts_.alpha, mixup_rng_);
      return ls;
    };

    const auto lab = draw(s.labeled, dp.labeled.size());
    const auto lab2 = permute(lab);
    b.labeled_x = gather(dp.labeled, lab);
    b.labeled_y = gather_labels(dp.labeled, lab);
    b.labeled_x2 = gather(dp.labeled, lab2);
    b.labeled_y2 = gather_labels(dp.labeled, lab2);
    b.labeled_lambdas = lambdas(lab.size());

    const auto adv = draw(s.adversarial, dp.adversarial.size());
    const auto adv2 = permute(adv);
    b.adv_x = gather(dp.adversarial, adv);
    b.adv_x2 = gather(dp.adversarial, adv2);
    b.adv_lambdas = lambdas(adv.size());

    const auto cons = draw(s.consistency, dp.consistency.size());
    const auto cons2 = permute(cons);
    b.cons_x = gather(dp.consistency, cons);
    b.cons_x2 = gather(dp.consistency, cons2);
    b.cons_lambdas = lambdas(cons.size());

    step.domains.push_back(std::move(b));
  }
  return step;
}

// --- trainer ---------------------------------------------------------------

namespace {

AdamConfig adam_config(const TrainerOptions& o) {
  return AdamConfig{o.learning_rate, o.adam_beta1, o.adam_beta2,
                    o.adam_epsilon, o.weight_decay, o.clip_norm};
}

}  // namespace

Trainer::Trainer(MranModel& model, TrainerOptions opts)
    : model_(model),
      opts_(opts),
      shared_opt_(model.shared_params(), adam_config(opts)),
      classifier_opt_(model.classifier_params(), adam_config(opts)),
      discriminator_opt_(model.discriminator_params(), adam_config(opts)),
      dropout_rng_(Rng::mix_seed(opts.seed, 0x64726f70ull)) {
  if (opts_.k_d < 1) throw ConfigError("k_d must be at least 1");
  if (opts_.batch_size < 1) throw ConfigError("batch size must be at least 1");
  for (int d = 0; d < model.domain_count(); ++d)
    domain_opts_.emplace_back(model.domain_params(d), adam_config(opts));
}

void Trainer::check_step(const StepBatch& step) const {
  if (static_cast<int>(step.domains.size()) != model_.domain_count())
    throw UsageError("expected one batch per domain (" + std::to_string(model_.domain_count()) +
                     "), got " + std::to_string(step.domains.size()));
  for (int d = 0; d < model_.domain_count(); ++d)
    if (step.domains[static_cast<size_t>(d)].domain != d)
      throw UsageError("domain batch " + std::to_string(d) + " carries domain index " +
                       std::to_string(step.domains[static_cast<size_t>(d)].domain));
}

void Trainer::zero_all_grads() {
  for (Tensor& p : model_.all_params()) p.zero_grad();
}

double Trainer::discriminator_step(const StepBatch& step) {
  check_step(step);
  zero_all_grads();
  Graph g;
  Tensor loss = adversarial_loss(g, model_, step, true, &dropout_rng_, /*detach_shared=*/true);
  if (opts_.weights.lambda_m > 0.0) {
    Tensor mixed = domain_mixup_adv_loss(g, model_, step, true, &dropout_rng_, /*detach_shared=*/true);
    loss = add(g, loss, scale(g, mixed, opts_.weights.lambda_m));
  }
  g.backward(loss);
  discriminator_opt_.step();
  return loss.item();
}

StepLosses Trainer::main_step(const StepBatch& step) {
  check_step(step);
  zero_all_grads();
  const LossWeights& w = opts_.weights;
  Graph g;
  StepLosses out;

  Tensor l_c = classification_loss(g, model_, step, true, &dropout_rng_);
  out.classification = l_c.item();
  Tensor total = l_c;

  if (w.lambda_a > 0.0) {
    Tensor l_a;
    for (const DomainBatch& b : step.domains) {
      Tensor term =
          labeled_category_mixup_loss(g, model_, b.domain, b.labeled_x, b.labeled_y, b.labeled_x2,
                                      b.labeled_y2, b.labeled_lambdas, true, &dropout_rng_);
      l_a = l_a.defined() ? add(g, l_a, term) : term;
    }
    out.labeled_mixup = l_a.item();
    total = add(g, total, scale(g, l_a, w.lambda_a));
  }

  if (w.lambda_u > 0.0) {
    ConsistencyOptions copts;
    copts.propagate_target = opts_.propagate_consistency_target;
    Tensor l_u;
    for (const DomainBatch& b : step.domains) {
      Tensor term = unlabeled_consistency_loss(g, model_, b.domain, b.cons_x, b.cons_x2,
                                               b.cons_lambdas, true, &dropout_rng_, copts);
      l_u = l_u.defined() ? add(g, l_u, term) : term;
    }
    out.consistency = l_u.item();
    total = add(g, total, scale(g, l_u, w.lambda_u));
  }

  if (w.lambda_d > 0.0) {
    // Discriminator NLL through the shared extractor, D frozen; the feature
    // side ascends it.
    Tensor l_adv = adversarial_loss(g, model_, step, true, &dropout_rng_, /*detach_shared=*/false);
    out.adversarial = l_adv.item();
    Tensor d_part = l_adv;
    if (w.lambda_m > 0.0) {
      Tensor l_m = domain_mixup_adv_loss(g, model_, step, true, &dropout_rng_, /*detach_shared=*/false);
      out.domain_mixup = l_m.item();
      d_part = add(g, d_part, scale(g, l_m, w.lambda_m));
    }
    total = add(g, total, scale(g, d_part, -w.lambda_d));
  }

  g.backward(total);
  shared_opt_.step();
  for (Adam& o : domain_opts_) o.step();
  classifier_opt_.step();
  ++main_steps_;
  out.total = total.item();
  // A zero weight keeps its term out of the graph entirely.
  if ((w.lambda_a == 0.0 && out.labeled_mixup != 0.0) ||
      (w.lambda_u == 0.0 && out.consistency != 0.0) ||
      (w.lambda_m == 0.0 && out.domain_mixup != 0.0) ||
      (w.lambda_d == 0.0 && out.adversarial != 0.0))
    throw Error("disabled loss term produced a nonzero contribution");
  return out;
}

EpochMetrics Trainer::train_epoch(BatchSampler& sampler) {
  EpochMetrics m;
  const int steps = sampler.steps_per_epoch();
  for (int s = 0; s < steps; ++s) {
    StepBatch step = sampler.next_step();
    double d_loss = 0.0;
    for (int k = 0; k < opts_.k_d; ++k) d_loss += discriminator_step(step);
    m.discriminator_loss += d_loss / opts_.k_d;
    const StepLosses sl = main_step(step);
    m.mean_losses.classification += sl.classification;
    m.mean_losses.adversarial += sl.adversarial;
    m.mean_losses.labeled_mixup += sl.labeled_mixup;
    m.mean_losses.consistency += sl.consistency;
    m.mean_losses.domain_mixup += sl.domain_mixup;
    m.mean_losses.total += sl.total;
  }
  m.steps = steps;
  if (steps > 0) {
    m.discriminator_loss /= steps;
    m.mean_losses.classification /= steps;
    m.mean_losses.adversarial /= steps;
    m.mean_losses.labeled_mixup /= steps;
    m.mean_losses.consistency /= steps;
    m.mean_losses.domain_mixup /= steps;
    m.mean_losses.total /= steps;
  }
  m.discriminator_accuracy = discriminator_accuracy(model_, sampler.pools());
  return m;
}

// --- evaluation --------------------------------------------------------

namespace {

constexpr int kEvalChunk = 128;

std::vector<const SparseExample*> strided_subset(const std::vector<const SparseExample*>& pool,
                                                 int cap) {
  if (static_cast<int>(pool.size()) <= cap) return pool;
  std::vector<const SparseExample*> out;
  out.reserve(static_cast<size_t>(cap));
  const double stride = static_cast<double>(pool.size()) / cap;
  for (int i = 0; i < cap; ++i)
    out.push_back(pool[static_cast<size_t>(i * stride)]);
  return out;
}

}  // namespace

EvalResult evaluate(const MranModel& model,
                    const std::vector<std::vector<const SparseExample*>>& per_domain,
                    int feature_dim) {
  if (static_cast<int>(per_domain.size()) != model.domain_count())
    throw UsageError("evaluate expects one split per domain");
  EvalResult r;
  for (int d = 0; d < model.domain_count(); ++d) {
    const auto& pool = per_domain[static_cast<size_t>(d)];
    if (pool.empty()) throw UsageError("empty evaluation split for domain " + std::to_string(d));
    int correct = 0;
    for (size_t off = 0; off < pool.size(); off += kEvalChunk) {
      const size_t n = std::min<size_t>(kEvalChunk, pool.size() - off);
      std::vector<const SparseExample*> rows(pool.begin() + static_cast<int64_t>(off),
                                             pool.begin() + static_cast<int64_t>(off + n));
      Tensor x = densify(rows, feature_dim);
      const std::vector<int> pred = model.predict(d, x);
      for (size_t i = 0; i < n; ++i) {
        if (!rows[i]->label) throw UsageError("evaluation split contains an unlabeled example");
        if (pred[i] == *rows[i]->label) ++correct;
      }
    }
    r.per_domain.push_back(static_cast<double>(correct) / static_cast<double>(pool.size()));
  }
  for (double a : r.per_domain) r.average += a;
  r.average /= static_cast<double>(r.per_domain.size());
  return r;
}

double discriminator_accuracy(const MranModel& model, const TrainingPools& pools, int cap) {
  int correct = 0, total = 0;
  for (const DomainPools& dp : pools.domains) {
    const auto subset = strided_subset(dp.adversarial, cap);
    for (size_t off = 0; off < subset.size(); off += kEvalChunk) {
      const size_t n = std::min<size_t>(kEvalChunk, subset.size() - off);
      std::vector<const SparseExample*> rows(subset.begin() + static_cast<int64_t>(off),
                                             subset.begin() + static_cast<int64_t>(off + n));
      Tensor x = densify(rows, pools.feature_dim);
      Graph g;
      Tensor logd = model.discriminate(g, model.shared_features(g, x, false, nullptr), false, nullptr);
      const int c = logd.cols();
      for (size_t i = 0; i < n; ++i) {
        const int pred = argmax_row(logd.values().subspan(i * static_cast<size_t>(c), static_cast<size_t>(c)));
        if (pred == dp.domain) ++correct;
        ++total;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

// --- metrics stream ----------------------------------------------------

MetricsWriter::MetricsWriter(const std::string& path, std::vector<std::string> domain_names)
    : out_(std::make_unique<std::ofstream>(path)), domain_names_(std::move(domain_names)) {
  if (!*out_) throw Error("cannot write metrics file: " + path);
  *out_ << "epoch,phase,domain,metric,value\n";
  out_->flush();
}

void MetricsWriter::row(int epoch, const std::string& phase, const std::string& domain,
                        const std::string& metric, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  *out_ << epoch << ',' << phase << ',' << domain << ',' << metric << ',' << buf << '\n';
}

void MetricsWriter::write_train(int epoch, const EpochMetrics& m) {
  row(epoch, "train", "all", "loss_c", m.mean_losses.classification);
  row(epoch, "train", "all", "loss_adv", m.mean_losses.adversarial);
  row(epoch, "train", "all", "loss_lcm", m.mean_losses.labeled_mixup);
  row(epoch, "train", "all", "loss_ucm", m.mean_losses.consistency);
  row(epoch, "train", "all", "loss_dm", m.mean_losses.domain_mixup);
  row(epoch, "train", "all", "loss_total", m.mean_losses.total);
  row(epoch, "train", "all", "loss_d", m.discriminator_loss);
  row(epoch, "train", "all", "d_accuracy", m.discriminator_accuracy);
  out_->flush();
}

void MetricsWriter::write_eval(int epoch, const std::string& phase, const EvalResult& r) {
  for (size_t d = 0; d < r.per_domain.size(); ++d)
    row(epoch, phase, domain_names_[d], "accuracy", r.per_domain[d]);
  row(epoch, phase, "average", "accuracy", r.average);
  out_->flush();
}

// --- fit ------------------------------------------------------------------

FitResult fit(MranModel& model, const SplitView& split, const FitOptions& opts,
              MetricsWriter* metrics) {
  if (opts.max_epochs < 0) throw ConfigError("max_epochs must be nonnegative");
  Trainer trainer(model, opts.trainer);
  BatchSampler sampler(split.train, opts.trainer);

  FitResult result;
  std::vector<std::vector<double>> best = model.snapshot();
  result.best_epoch = 0;
  result.best_validation = -1.0;

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = trainer.train_epoch(sampler);
    rec.validation = evaluate(model, split.validation, split.train.feature_dim);
    if (metrics) {
      metrics->write_train(epoch, rec.train);
      metrics->write_eval(epoch, "validation", rec.validation);
    }
    if (rec.validation.average > result.best_validation) {
      result.best_validation = rec.validation.average;
      result.best_epoch = epoch;
      best = model.snapshot();
    }
    result.history.push_back(std::move(rec));
  }

  model.restore(best);
  result.test = evaluate(model, split.test, split.train.feature_dim);
  if (metrics) metrics->write_eval(result.best_epoch, "test", result.test);
  return result;
}

}  // namespace mran
