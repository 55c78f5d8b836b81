#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "mran/adam.hpp"
#include "mran/batch.hpp"
#include "mran/data.hpp"
#include "mran/model.hpp"
#include "mran/rng.hpp"

namespace mran {

// Balancing weights of the combined objective. A weight of exactly 0
// disables its term: the term is never built into the graph, so its gradient
// contribution is exactly zero.
struct LossWeights {
  double lambda_d = 1.0;      // adversarial feedback into the features
  double lambda_a = 0.001;    // labeled category mixup
  double lambda_u = 0.1;      // unlabeled consistency
  double lambda_m = 0.00001;  // domain mixup adversarial
};

struct TrainerOptions {
  LossWeights weights;
  double learning_rate = 0.0001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 0.0;
  double alpha = 0.2;  // Beta(alpha, alpha) for the mixup draw
  int k_d = 5;         // discriminator steps per main step
  int batch_size = 8;
  bool per_pair_lambda = false;
  bool propagate_consistency_target = false;
  uint64_t seed = 0;
};

// Loss term values from one main step. Terms whose weight is 0 report 0.
struct StepLosses {
  double classification = 0.0;
  double adversarial = 0.0;
  double labeled_mixup = 0.0;
  double consistency = 0.0;
  double domain_mixup = 0.0;
  double total = 0.0;
};

struct EpochMetrics {
  StepLosses mean_losses;
  double discriminator_loss = 0.0;
  double discriminator_accuracy = 0.0;
  int steps = 0;
};

struct EvalResult {
  std::vector<double> per_domain;  // accuracy in [0, 1]
  double average = 0.0;            // unweighted mean over domains
};

// Per-domain training pools. `adversarial` draws from labeled ∪ unlabeled,
// `consistency` from the unlabeled pool (or the training fold with labels
// hidden when no unlabeled data exists).
struct DomainPools {
  int domain = 0;
  std::vector<const SparseExample*> labeled;
  std::vector<const SparseExample*> adversarial;
  std::vector<const SparseExample*> consistency;
};

struct TrainingPools {
  std::vector<DomainPools> domains;
  int feature_dim = 0;
  bool unlabeled_fallback = false;  // consistency pool is the hidden-label training fold
};

// Cycles a shuffled index order, reshuffling on wrap, so smaller pools
// resample while larger pools are covered evenly.
class CyclicSampler {
 public:
  CyclicSampler() = default;
  CyclicSampler(int n, Rng* rng);
  int next();

 private:
  std::vector<int> order_;
  size_t pos_ = 0;
  Rng* rng_ = nullptr;
};

// Draws one StepBatch per call: a shared Beta(alpha, alpha) coefficient and,
// per domain, labeled/adversarial/consistency batches with their within-batch
// permutation partners.
class BatchSampler {
 public:
  BatchSampler(TrainingPools pools, const TrainerOptions& opts);

  StepBatch next_step();
  // One pass over the largest labeled pool.
  int steps_per_epoch() const;
  const TrainingPools& pools() const { return pools_; }

 private:
  struct DomainSamplers {
    CyclicSampler labeled, adversarial, consistency;
  };
  Tensor gather(const std::vector<const SparseExample*>& pool, const std::vector<int>& idx) const;
  Tensor gather_labels(const std::vector<const SparseExample*>& pool,
                       const std::vector<int>& idx) const;

  TrainingPools pools_;
  TrainerOptions opts_;
  Rng data_rng_;
  Rng mixup_rng_;
  std::vector<DomainSamplers> samplers_;
};

// The alternating min-max optimization: k_d discriminator steps per main
// step. A discriminator step lowers L_Adv + lambda_m * L_Adv^M on frozen
// shared features and updates only the discriminator; a main step updates
// the extractors and classifier on
//   L_c + lambda_a*L_a + lambda_u*L_u - lambda_d*(L_Adv + lambda_m*L_Adv^M)
// with the discriminator frozen. One Adam state per component.
class Trainer {
 public:
  Trainer(MranModel& model, TrainerOptions opts);

  double discriminator_step(const StepBatch& step);
  StepLosses main_step(const StepBatch& step);
  EpochMetrics train_epoch(BatchSampler& sampler);

  MranModel& model() { return model_; }
  const TrainerOptions& options() const { return opts_; }
  int64_t steps_taken() const { return main_steps_; }

 private:
  void check_step(const StepBatch& step) const;
  void zero_all_grads();

  MranModel& model_;
  TrainerOptions opts_;
  Adam shared_opt_;
  std::vector<Adam> domain_opts_;
  Adam classifier_opt_;
  Adam discriminator_opt_;
  Rng dropout_rng_;
  int64_t main_steps_ = 0;
};

// Per-domain accuracy and the unweighted average, eval mode.
EvalResult evaluate(const MranModel& model,
                    const std::vector<std::vector<const SparseExample*>>& per_domain,
                    int feature_dim);

// Fraction of instances whose domain the discriminator identifies, eval
// mode, over at most `cap` instances per domain (evenly strided).
double discriminator_accuracy(const MranModel& model, const TrainingPools& pools, int cap = 256);

// Append-only CSV metrics stream, one file per fit, flushed per epoch.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, std::vector<std::string> domain_names);

  void write_train(int epoch, const EpochMetrics& m);
  void write_eval(int epoch, const std::string& phase, const EvalResult& r);

 private:
  void row(int epoch, const std::string& phase, const std::string& domain,
           const std::string& metric, double value);

  std::unique_ptr<std::ofstream> out_;
  std::vector<std::string> domain_names_;
};

struct SplitView {
  TrainingPools train;
  std::vector<std::vector<const SparseExample*>> validation;  // per domain
  std::vector<std::vector<const SparseExample*>> test;        // per domain
};

struct EpochRecord {
  int epoch = 0;
  EpochMetrics train;
  EvalResult validation;
};

struct FitResult {
  int best_epoch = 0;  // 0 means the initialized model was never beaten
  double best_validation = 0.0;
  EvalResult test;
  std::vector<EpochRecord> history;
};

struct FitOptions {
  TrainerOptions trainer;
  int max_epochs = 50;
};

// Trains up to max_epochs, keeps the snapshot with the highest validation
// average accuracy, restores it into the model, and reports its test
// accuracy. The metrics writer may be null.
FitResult fit(MranModel& model, const SplitView& split, const FitOptions& opts,
              MetricsWriter* metrics);

}  // namespace mran
