#include "mran/batch.hpp"

namespace mran {

Tensor onehot_rows(int cls, int classes, int rows) {
  Tensor t = Tensor::zeros({rows, classes});
  for (int i = 0; i < rows; ++i) t.values()[static_cast<size_t>(i) * classes + cls] = 1.0;
  return t;
}

}  // namespace mran
