#pragma once

#include <vector>

#include "mran/tensor.hpp"

namespace mran {

// One training step's data for a single domain. Rows are densified inputs;
// *_x2 / *_y2 hold the mixup partners (a within-batch row permutation of the
// corresponding *_x / *_y). Labels are soft distributions [b×2].
struct DomainBatch {
  int domain = 0;
  Tensor labeled_x, labeled_y;
  Tensor labeled_x2, labeled_y2;
  // Adversarial pool (labeled ∪ unlabeled).
  Tensor adv_x, adv_x2;
  // Consistency pool (unlabeled).
  Tensor cons_x, cons_x2;
  // Interpolation coefficients per term: size 1 (shared draw) or one per row.
  std::vector<double> labeled_lambdas{0.5};
  std::vector<double> adv_lambdas{0.5};
  std::vector<double> cons_lambdas{0.5};
};

// One batch per domain plus the step-shared mixup coefficient.
struct StepBatch {
  std::vector<DomainBatch> domains;
  double lambda = 0.5;
};

// Constant one-hot rows: `rows` copies of e_class over `classes` columns.
Tensor onehot_rows(int cls, int classes, int rows);

}  // namespace mran
