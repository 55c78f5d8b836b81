#include "mran/config.hpp"

#include <charconv>
#include <sstream>

namespace mran {

LossWeights effective_weights(const ExperimentConfig& config) {
  LossWeights w = config.weights;
  if (config.ablate_dm) w.lambda_m = 0.0;
  if (config.ablate_lcm) w.lambda_a = 0.0;
  if (config.ablate_ucm) w.lambda_u = 0.0;
  if (config.ablate_cm) {
    w.lambda_a = 0.0;
    w.lambda_u = 0.0;
  }
  return w;
}

namespace {

// Shortest round-trip representation.
std::string num(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string config_echo(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&os](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto join = [](const auto& v) {
    std::ostringstream s;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s << ',';
      s << v[i];
    }
    return s.str();
  };
  kv("data_dir", c.data_dir);
  kv("synth", c.synth ? "true" : "false");
  kv("domains", join(c.domain_names));
  kv("seed", std::to_string(c.seed));
  kv("repeats", std::to_string(c.repeats));
  kv("folds", std::to_string(c.folds));
  kv("rotations", std::to_string(c.rotations));
  kv("max_epochs", std::to_string(c.max_epochs));
  kv("batch_size", std::to_string(c.batch_size));
  kv("learning_rate", num(c.learning_rate));
  kv("alpha", num(c.alpha));
  kv("lambda_d", num(c.weights.lambda_d));
  kv("lambda_a", num(c.weights.lambda_a));
  kv("lambda_u", num(c.weights.lambda_u));
  kv("lambda_m", num(c.weights.lambda_m));
  kv("k_d", std::to_string(c.k_d));
  kv("dropout", num(c.dropout));
  kv("vocab_size", std::to_string(c.vocab_size));
  kv("shared_dim", std::to_string(c.shared_dim));
  kv("domain_dim", std::to_string(c.domain_dim));
  kv("extractor_hidden", join(c.extractor_hidden));
  kv("log_counts", c.log_counts ? "true" : "false");
  kv("per_pair_lambda", c.per_pair_lambda ? "true" : "false");
  kv("propagate_consistency_target", c.propagate_consistency_target ? "true" : "false");
  kv("weight_decay", num(c.weight_decay));
  kv("clip_norm", num(c.clip_norm));
  kv("ablate_dm", c.ablate_dm ? "true" : "false");
  kv("ablate_cm", c.ablate_cm ? "true" : "false");
  kv("ablate_lcm", c.ablate_lcm ? "true" : "false");
  kv("ablate_ucm", c.ablate_ucm ? "true" : "false");
  kv("synth_domains", std::to_string(c.synth_cfg.domains));
  kv("synth_dim", std::to_string(c.synth_cfg.dim));
  kv("synth_labeled", std::to_string(c.synth_cfg.labeled_per_domain));
  kv("synth_unlabeled", std::to_string(c.synth_cfg.unlabeled_per_domain));
  kv("shared_signal", num(c.synth_cfg.shared_signal));
  kv("domain_shift", num(c.synth_cfg.domain_shift));
  kv("noise", num(c.synth_cfg.noise));
  kv("baseline", num(c.synth_cfg.baseline));
  kv("out_dir", c.out_dir);
  return os.str();
}

ModelConfig model_config(const ExperimentConfig& c, int input_dim, int domains) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.domains = domains;
  m.extractor_hidden = c.extractor_hidden;
  m.shared_dim = c.shared_dim;
  m.domain_dim = c.domain_dim;
  m.dropout = c.dropout;
  return m;
}

TrainerOptions trainer_options(const ExperimentConfig& c, uint64_t seed) {
  TrainerOptions t;
  t.weights = effective_weights(c);
  t.learning_rate = c.learning_rate;
  t.weight_decay = c.weight_decay;
  t.clip_norm = c.clip_norm;
  t.alpha = c.alpha;
  t.k_d = c.k_d;
  t.batch_size = c.batch_size;
  t.per_pair_lambda = c.per_pair_lambda;
  t.propagate_consistency_target = c.propagate_consistency_target;
  t.seed = seed;
  return t;
}

}  // namespace mran
