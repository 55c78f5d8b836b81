#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mran/rng.hpp"
#include "mran/tensor.hpp"

namespace mran {

// One review in canonical sparse form: strictly increasing feature ids with
// positive values, an optional binary label (0 negative, 1 positive), and
// the 0-based index of the domain it came from.
struct SparseExample {
  std::vector<std::pair<int, double>> features;
  std::optional<int> label;
  int domain = 0;
};

struct DomainData {
  std::string name;
  std::vector<SparseExample> labeled;
  std::vector<SparseExample> unlabeled;
};

// Parse output before vectorization: token counts plus the optional label.
struct RawExample {
  std::map<std::string, double> counts;
  std::optional<int> label;
};

// One line of the processed-review format: whitespace-separated `token:count`
// pairs, with the label carried by a `#label#:positive|negative` pair
// (`#label#:unlabeled`, or no label pair at all, means unlabeled). Counts on
// duplicate tokens are summed. line_no is used in error messages only.
RawExample parse_review_line(const std::string& line, int line_no = 0);

// The top-V features by total count across the given corpora, ties broken
// lexicographically. Ids are dense 0..V-1 in rank order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> features);

  int size() const { return static_cast<int>(features_.size()); }
  const std::vector<std::string>& features() const { return features_; }
  // -1 when the token is out of vocabulary.
  int id_of(const std::string& token) const;

  void save(const std::string& path) const;  // one feature per line, line = id
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> features_;
  std::unordered_map<std::string, int> index_;
};

struct MultiDomainDataset {
  std::vector<DomainData> domains;
  int feature_dim = 0;
  // Populated by the review-corpus loader; empty for synthetic data.
  Vocabulary vocabulary;

  int domain_count() const { return static_cast<int>(domains.size()); }
};

Vocabulary build_vocabulary(const std::vector<const std::vector<RawExample>*>& corpora, int size);

// Drops out-of-vocabulary tokens; feature value = raw count. When log_counts
// is set, values are transformed to log(1+count).
SparseExample vectorize(const RawExample& raw, const Vocabulary& vocab, int domain,
                        bool log_counts = false);

// Dense [rows.size() × width] matrix from sparse examples.
Tensor densify(const std::vector<const SparseExample*>& rows, int width);
Tensor densify(const std::vector<SparseExample>& rows, int width);

// Assignment of every labeled example to one of num_folds folds, stratified
// by label within each domain. Rotation r designates fold r as test, fold
// (r+1) mod num_folds as validation, and the rest as training.
struct FoldPlan {
  int num_folds = 5;
  std::vector<std::vector<int>> assignment;  // [domain][labeled index] -> fold

  std::vector<int> indices_in(int domain, int fold) const;
  std::vector<int> train_indices(int domain, int rotation) const;
  int test_fold(int rotation) const { return rotation % num_folds; }
  int validation_fold(int rotation) const { return (rotation + 1) % num_folds; }
};

FoldPlan make_folds(const MultiDomainDataset& dataset, int num_folds, uint64_t seed);

// Synthetic multi-domain generator. Per domain i and class y' in {-1,+1}:
//   x = max(0, baseline + y' * shared_signal * s + domain_shift * o_i + noise * z)
// where s and o_i are fixed ±1 pattern vectors drawn from the seed and z is
// standard normal. Entries clamp at 0 and zero entries are dropped, keeping
// the bag-of-features canonical form; domain_shift = 0 gives all domains
// identical marginals.
struct SynthConfig {
  int domains = 4;
  int dim = 64;
  int labeled_per_domain = 200;
  int unlabeled_per_domain = 400;
  double shared_signal = 1.0;
  double domain_shift = 1.0;
  double noise = 1.0;
  double baseline = 2.0;
  uint64_t seed = 0;
};

MultiDomainDataset synth_generate(const SynthConfig& config);

// Directory layout: one subdirectory per domain holding positive.review,
// negative.review, and optional unlabeled.review.
MultiDomainDataset load_review_dataset(const std::string& data_dir,
                                       const std::vector<std::string>& domain_names,
                                       int vocabulary_size, bool log_counts = false,
                                       std::string* warnings = nullptr);

// Writes a dataset in the same layout, feature ids as integer tokens.
void dump_dataset(const MultiDomainDataset& dataset, const std::string& out_dir);

}  // namespace mran
