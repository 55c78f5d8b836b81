#pragma once

#include <string>
#include <vector>

#include "mran/data.hpp"
#include "mran/training.hpp"

namespace mran {

// Everything one experiment run needs. Defaults are the reference Amazon
// setup: alpha 0.2, lambda_d 1, lambda_a 0.001, lambda_u 0.1,
// lambda_m 0.00001, Adam at 0.0001, dropout 0.4, batch size 8, extractor
// hidden sizes 1000/500, feature widths 128/64, 5000-feature vocabulary.
struct ExperimentConfig {
  std::string data_dir;  // review-corpus directory; unused when synth is set
  bool synth = false;
  std::vector<std::string> domain_names = {"books", "dvd", "electronics", "kitchen"};
  uint64_t seed = 1;
  int repeats = 1;
  int folds = 5;
  int rotations = 0;  // 0 = run every fold rotation
  int max_epochs = 50;
  int batch_size = 8;
  double learning_rate = 0.0001;
  double alpha = 0.2;
  LossWeights weights;
  int k_d = 5;
  double dropout = 0.4;
  int vocab_size = 5000;
  int shared_dim = 128;
  int domain_dim = 64;
  std::vector<int> extractor_hidden = {1000, 500};
  bool log_counts = false;
  bool per_pair_lambda = false;
  bool propagate_consistency_target = false;
  double weight_decay = 0.0;
  double clip_norm = 0.0;
  // Ablation switches (Table-3 style): dm zeroes lambda_m, lcm zeroes
  // lambda_a, ucm zeroes lambda_u, cm zeroes both category terms.
  bool ablate_dm = false;
  bool ablate_cm = false;
  bool ablate_lcm = false;
  bool ablate_ucm = false;
  SynthConfig synth_cfg;
  std::string out_dir = "runs";
};

// Ablation flags applied to the configured weights.
LossWeights effective_weights(const ExperimentConfig& config);

// Every config value as stable `key = value` lines.
std::string config_echo(const ExperimentConfig& config);

// Architecture/trainer views of the config.
ModelConfig model_config(const ExperimentConfig& config, int input_dim, int domains);
TrainerOptions trainer_options(const ExperimentConfig& config, uint64_t seed);

}  // namespace mran
