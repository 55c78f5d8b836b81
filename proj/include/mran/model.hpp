#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mran/rng.hpp"
#include "mran/tensor.hpp"

namespace mran {

// Fully connected stack: linear layers between consecutive widths, relu and
// dropout after each hidden activation, linear output.
struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output
  double dropout = 0.0;
};

class Mlp {
 public:
  Mlp() = default;
  // Weights uniform in ±sqrt(6/(fan_in+fan_out)), biases zero.
  Mlp(std::string name, MlpSpec spec, Rng& rng);

  Tensor forward(Graph& g, const Tensor& x, bool training, Rng* dropout_rng) const;

  int input_width() const { return spec_.widths.front(); }
  int output_width() const { return spec_.widths.back(); }
  const MlpSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

  std::vector<Tensor> params() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;

 private:
  std::string name_;
  MlpSpec spec_;
  std::vector<Tensor> weights_;  // one [in×out] per layer
  std::vector<Tensor> biases_;   // one [out] per layer
};

struct ModelConfig {
  int input_dim = 5000;
  int domains = 4;  // M
  std::vector<int> extractor_hidden = {1000, 500};
  int shared_dim = 128;
  int domain_dim = 64;
  double dropout = 0.4;
};

// The four components: a shared extractor, one extractor per domain, a
// multinomial domain discriminator over the shared features, and a binary
// classifier over the concatenated shared + domain-specific features.
// Discriminator and classifier each have one hidden layer the size of their
// input. Forward paths return log-probabilities. Domain indices are 0-based.
// Forward passes on a model that is not being trained are safe from several
// threads; training mutates parameters and must be exclusive.
class MranModel {
 public:
  MranModel(ModelConfig config, uint64_t seed);

  Tensor shared_features(Graph& g, const Tensor& x, bool training, Rng* rng) const;
  Tensor domain_features(Graph& g, int domain, const Tensor& x, bool training, Rng* rng) const;
  // Log-probs [b×2] over sentiment classes.
  Tensor classify(Graph& g, const Tensor& shared, const Tensor& domain_feat, bool training,
                  Rng* rng) const;
  // Log-probs [b×M] over domains.
  Tensor discriminate(Graph& g, const Tensor& shared, bool training, Rng* rng) const;

  // Full classification path for one domain, eval mode; argmax labels with
  // ties broken toward class 0.
  std::vector<int> predict(int domain, const Tensor& x) const;
  // Eval-mode class log-probs for one domain's inputs.
  Tensor class_log_probs(Graph& g, int domain, const Tensor& x, bool training, Rng* rng) const;

  int domain_count() const { return config_.domains; }
  const ModelConfig& config() const { return config_; }

  std::vector<Tensor> shared_params() const { return shared_.params(); }
  std::vector<Tensor> domain_params(int domain) const;
  std::vector<Tensor> classifier_params() const { return classifier_.params(); }
  std::vector<Tensor> discriminator_params() const { return discriminator_.params(); }
  std::vector<Tensor> all_params() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;

  // Flat copy of every parameter value / restore, in named_params order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& snap);

 private:
  void check_domain(int domain) const;

  ModelConfig config_;
  Mlp shared_;
  std::vector<Mlp> domain_extractors_;
  Mlp discriminator_;
  Mlp classifier_;
};

// Argmax over one row of scores; first index wins ties.
int argmax_row(std::span<const double> row);

}  // namespace mran
