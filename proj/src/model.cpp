#include "mran/model.hpp"

#include <cmath>

#include "mran/error.hpp"

namespace mran {

Mlp::Mlp(std::string name, MlpSpec spec, Rng& rng) : name_(std::move(name)), spec_(std::move(spec)) {
  if (spec_.widths.size() < 3)
    throw ConfigError("mlp '" + name_ + "' needs at least one hidden layer");
  for (int w : spec_.widths)
    if (w <= 0) throw ConfigError("mlp '" + name_ + "' has a non-positive layer width");
  for (size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    const int fan_in = spec_.widths[l];
    const int fan_out = spec_.widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    weights_.push_back(Tensor::uniform({fan_in, fan_out}, -limit, limit, rng, true));
    biases_.push_back(Tensor::zeros({fan_out}, true));
  }
}

Tensor Mlp::forward(Graph& g, const Tensor& x, bool training, Rng* dropout_rng) const {
  if (x.ndim() != 2 || x.dim(1) != input_width())
    throw DimensionError("mlp '" + name_ + "' expects input width " +
                         std::to_string(input_width()) + ", got " + x.shape_str());
  Tensor h = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    h = add_bias(g, matmul(g, h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) {
      h = relu(g, h);
      h = dropout(g, h, spec_.dropout, training, dropout_rng);
    }
  }
  return h;
}

std::vector<Tensor> Mlp::params() const {
  std::vector<Tensor> out;
  for (size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> Mlp::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t l = 0; l < weights_.size(); ++l) {
    out.emplace_back(name_ + ".w" + std::to_string(l), weights_[l]);
    out.emplace_back(name_ + ".b" + std::to_string(l), biases_[l]);
  }
  return out;
}

namespace {

std::vector<int> extractor_widths(const ModelConfig& c, int output) {
  std::vector<int> w;
  w.push_back(c.input_dim);
  w.insert(w.end(), c.extractor_hidden.begin(), c.extractor_hidden.end());
  w.push_back(output);
  return w;
}

}  // namespace

MranModel::MranModel(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
  if (config_.domains < 2)
    throw ConfigError("model requires at least 2 domains, got " + std::to_string(config_.domains));
  if (config_.input_dim <= 0 || config_.shared_dim <= 0 || config_.domain_dim <= 0)
    throw ConfigError("model widths must be positive");

  Rng rng(Rng::mix_seed(seed, 0x6d6f64656cull));  // init stream

  shared_ = Mlp("shared", {extractor_widths(config_, config_.shared_dim), config_.dropout}, rng);
  for (int i = 0; i < config_.domains; ++i) {
    domain_extractors_.emplace_back(
        "domain" + std::to_string(i),
        MlpSpec{extractor_widths(config_, config_.domain_dim), config_.dropout}, rng);
  }
  // One hidden layer, same size as the input.
  discriminator_ = Mlp(
      "discriminator",
      {{config_.shared_dim, config_.shared_dim, config_.domains}, config_.dropout}, rng);
  const int cls_in = config_.shared_dim + config_.domain_dim;
  classifier_ = Mlp("classifier", {{cls_in, cls_in, 2}, config_.dropout}, rng);
}

void MranModel::check_domain(int domain) const {
  if (domain < 0 || domain >= config_.domains)
    throw UsageError("domain index " + std::to_string(domain) + " out of range [0, " +
                     std::to_string(config_.domains) + ")");
}

Tensor MranModel::shared_features(Graph& g, const Tensor& x, bool training, Rng* rng) const {
  return shared_.forward(g, x, training, rng);
}

Tensor MranModel::domain_features(Graph& g, int domain, const Tensor& x, bool training,
                                  Rng* rng) const {
  check_domain(domain);
  return domain_extractors_[static_cast<size_t>(domain)].forward(g, x, training, rng);
}

Tensor MranModel::classify(Graph& g, const Tensor& shared, const Tensor& domain_feat,
                           bool training, Rng* rng) const {
  Tensor joint = concat_cols(g, shared, domain_feat);
  return log_softmax(g, classifier_.forward(g, joint, training, rng));
}

Tensor MranModel::discriminate(Graph& g, const Tensor& shared, bool training, Rng* rng) const {
  return log_softmax(g, discriminator_.forward(g, shared, training, rng));
}

Tensor MranModel::class_log_probs(Graph& g, int domain, const Tensor& x, bool training,
                                  Rng* rng) const {
  Tensor fs = shared_features(g, x, training, rng);
  Tensor fd = domain_features(g, domain, x, training, rng);
  return classify(g, fs, fd, training, rng);
}

std::vector<int> MranModel::predict(int domain, const Tensor& x) const {
  Graph g;
  Tensor logp = class_log_probs(g, domain, x, false, nullptr);
  std::vector<int> labels(static_cast<size_t>(logp.rows()));
  const int c = logp.cols();
  for (int i = 0; i < logp.rows(); ++i)
    labels[static_cast<size_t>(i)] =
        argmax_row(logp.values().subspan(static_cast<size_t>(i) * c, static_cast<size_t>(c)));
  return labels;
}

std::vector<Tensor> MranModel::domain_params(int domain) const {
  check_domain(domain);
  return domain_extractors_[static_cast<size_t>(domain)].params();
}

std::vector<Tensor> MranModel::all_params() const {
  std::vector<Tensor> out;
  for (const auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Tensor>> MranModel::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto append = [&out](std::vector<std::pair<std::string, Tensor>> v) {
    out.insert(out.end(), v.begin(), v.end());
  };
  append(shared_.named_params());
  for (const Mlp& d : domain_extractors_) append(d.named_params());
  append(discriminator_.named_params());
  append(classifier_.named_params());
  return out;
}

std::vector<std::vector<double>> MranModel::snapshot() const {
  std::vector<std::vector<double>> snap;
  for (const auto& [name, p] : named_params())
    snap.emplace_back(p.values().begin(), p.values().end());
  return snap;
}

void MranModel::restore(const std::vector<std::vector<double>>& snap) {
  auto named = named_params();
  if (snap.size() != named.size()) throw UsageError("snapshot does not match this model");
  for (size_t i = 0; i < named.size(); ++i) {
    auto vals = named[i].second.values();
    if (snap[i].size() != vals.size()) throw UsageError("snapshot tensor size mismatch");
    std::copy(snap[i].begin(), snap[i].end(), vals.begin());
  }
}

int argmax_row(std::span<const double> row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(row.size()); ++j)
    if (row[static_cast<size_t>(j)] > row[static_cast<size_t>(best)]) best = j;
  return best;
}

}  // namespace mran
