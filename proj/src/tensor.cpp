#include "mran/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

namespace mran {

namespace {

std::atomic<int64_t> g_next_id{1};

int64_t shape_product(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

std::string shape_to_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2)
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " + t.shape_str());
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

// C[m×n] (+)= A[m×k] · B[k×n]
void matmul_kernel(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×k] += A[m×n] · B[k×n]^T
void matmul_abt_kernel(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * n;
    double* crow = c + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* brow = b + static_cast<size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k×n] += A[m×k]^T · B[m×n]
void matmul_atb_kernel(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    const double* brow = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::alloc(std::vector<int> shape, bool requires_grad) {
  auto d = std::make_shared<detail::TensorData>();
  const int64_t n = shape_product(shape);
  d->shape = std::move(shape);
  d->values.assign(static_cast<size_t>(n), 0.0);
  d->requires_grad = requires_grad;
  if (requires_grad) d->grad.assign(static_cast<size_t>(n), 0.0);
  d->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(d));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return alloc(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = alloc(std::move(shape), requires_grad);
  for (double& v : t.values()) v = value;
  return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  const int64_t n = shape_product(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_str(shape));
  Tensor t = alloc(std::move(shape), requires_grad);
  std::copy(values.begin(), values.end(), t.values().begin());
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  Tensor t = alloc({}, requires_grad);
  t.values()[0] = value;
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  Tensor t = alloc(std::move(shape), requires_grad);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("from_rows requires at least one row");
  const int n = static_cast<int>(rows[0].size());
  Tensor t = alloc({static_cast<int>(rows.size()), n}, false);
  auto out = t.values();
  for (size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != n)
      throw DimensionError("from_rows requires equal-length rows");
    std::copy(rows[r].begin(), rows[r].end(), out.begin() + static_cast<int64_t>(r) * n);
  }
  return t;
}

int Tensor::rows() const {
  require_2d(*this, "rows()");
  return dim(0);
}

int Tensor::cols() const {
  require_2d(*this, "cols()");
  return dim(1);
}

double Tensor::at(int r, int c) const {
  require_2d(*this, "at()");
  return data().values[static_cast<size_t>(r) * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() requires a single-element tensor, got " + shape_str());
  return data().values[0];
}

std::span<double> Tensor::grad() {
  if (!requires_grad()) throw UsageError("grad() on a tensor without requires_grad");
  return data().grad;
}

std::span<const double> Tensor::grad() const {
  if (!requires_grad()) throw UsageError("grad() on a tensor without requires_grad");
  return data().grad;
}

void Tensor::zero_grad() {
  if (!requires_grad()) return;
  std::fill(data().grad.begin(), data().grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  Tensor t = alloc(shape(), false);
  std::copy(values().begin(), values().end(), t.values().begin());
  return t;
}

Tensor Tensor::clone() const {
  Tensor t = alloc(shape(), requires_grad());
  std::copy(values().begin(), values().end(), t.values().begin());
  if (requires_grad()) std::copy(data().grad.begin(), data().grad.end(), t.payload().grad.begin());
  return t;
}

std::string Tensor::shape_str() const { return shape_to_str(shape()); }

// --- Graph -------------------------------------------------------------

void Graph::record(Tensor output, std::function<void()> backward_fn) {
  nodes_.push_back(Node{std::move(output), std::move(backward_fn)});
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw UsageError("backward requires a single-element loss, got " +
                     (loss.defined() ? loss.shape_str() : std::string("<empty>")));
  if (loss.requires_grad()) loss.payload().grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward) it->backward();
  }
}

// --- op helpers --------------------------------------------------------

namespace {

// Output of an op: requires grad iff any input does; recorded iff so.
Tensor make_output(std::vector<int> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

}  // namespace

// --- ops ----------------------------------------------------------------

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw DimensionError("matmul inner dimensions disagree: " + a.shape_str() + " vs " +
                         b.shape_str());
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor c = make_output({m, n}, rg);
  matmul_kernel(a.values().data(), b.values().data(), c.values().data(), m, k, n);
  if (rg) {
    g.record(c, [a, b, c, m, k, n]() {
      const double* dc = c.payload().grad.data();
      if (a.requires_grad())
        matmul_abt_kernel(dc, b.values().data(), a.payload().grad.data(), m, n, k);
      if (b.requires_grad())
        matmul_atb_kernel(a.values().data(), dc, b.payload().grad.data(), m, k, n);
    });
  }
  return c;
}

Tensor add_bias(Graph& g, const Tensor& x, const Tensor& b) {
  require_2d(x, "add_bias");
  if (b.ndim() != 1)
    throw DimensionError("add_bias expects a 1-D bias, got " + b.shape_str());
  const int m = x.dim(0), n = x.dim(1);
  if (b.dim(0) != n)
    throw DimensionError("add_bias trailing dimensions disagree: " + x.shape_str() + " vs " +
                         b.shape_str());
  const bool rg = x.requires_grad() || b.requires_grad();
  Tensor c = make_output({m, n}, rg);
  auto out = c.values();
  auto xs = x.values();
  auto bs = b.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] = xs[static_cast<size_t>(i) * n + j] + bs[static_cast<size_t>(j)];
  if (rg) {
    g.record(c, [x, b, c, m, n]() {
      const auto& dc = c.payload().grad;
      if (x.requires_grad()) {
        auto& dx = x.payload().grad;
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += dc[i];
      }
      if (b.requires_grad()) {
        auto& db = b.payload().grad;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) db[static_cast<size_t>(j)] += dc[static_cast<size_t>(i) * n + j];
      }
    });
  }
  return c;
}

Tensor relu(Graph& g, const Tensor& x) {
  Tensor y = make_output(x.shape(), x.requires_grad());
  auto xs = x.values();
  auto ys = y.values();
  for (size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] > 0.0 ? xs[i] : 0.0;
  if (x.requires_grad()) {
    g.record(y, [x, y]() {
      const auto& dy = y.payload().grad;
      const auto& xs = x.payload().values;
      auto& dx = x.payload().grad;
      for (size_t i = 0; i < dx.size(); ++i)
        if (xs[i] > 0.0) dx[i] += dy[i];
    });
  }
  return y;
}

Tensor dropout(Graph& g, const Tensor& x, double rate, bool training, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw UsageError("dropout in training mode requires an rng stream");
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(x.size()));
  for (double& m : *mask) m = (rng->uniform() < rate) ? 0.0 : keep_scale;
  Tensor y = make_output(x.shape(), x.requires_grad());
  auto xs = x.values();
  auto ys = y.values();
  for (size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] * (*mask)[i];
  if (x.requires_grad()) {
    g.record(y, [x, y, mask]() {
      const auto& dy = y.payload().grad;
      auto& dx = x.payload().grad;
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (*mask)[i];
    });
  }
  return y;
}

Tensor concat_cols(Graph& g, const Tensor& a, const Tensor& b) {
  require_2d(a, "concat_cols");
  require_2d(b, "concat_cols");
  const int m = a.dim(0), p = a.dim(1), q = b.dim(1);
  if (b.dim(0) != m)
    throw DimensionError("concat_cols leading dimensions disagree: " + a.shape_str() + " vs " +
                         b.shape_str());
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor c = make_output({m, p + q}, rg);
  auto out = c.values();
  auto as = a.values();
  auto bs = b.values();
  for (int i = 0; i < m; ++i) {
    std::copy(as.begin() + static_cast<int64_t>(i) * p, as.begin() + static_cast<int64_t>(i + 1) * p,
              out.begin() + static_cast<int64_t>(i) * (p + q));
    std::copy(bs.begin() + static_cast<int64_t>(i) * q, bs.begin() + static_cast<int64_t>(i + 1) * q,
              out.begin() + static_cast<int64_t>(i) * (p + q) + p);
  }
  if (rg) {
    g.record(c, [a, b, c, m, p, q]() {
      const auto& dc = c.payload().grad;
      for (int i = 0; i < m; ++i) {
        const size_t row = static_cast<size_t>(i) * (p + q);
        if (a.requires_grad()) {
          auto& da = a.payload().grad;
          for (int j = 0; j < p; ++j) da[static_cast<size_t>(i) * p + j] += dc[row + j];
        }
        if (b.requires_grad()) {
          auto& db = b.payload().grad;
          for (int j = 0; j < q; ++j) db[static_cast<size_t>(i) * q + j] += dc[row + p + j];
        }
      }
    });
  }
  return c;
}

Tensor log_softmax(Graph& g, const Tensor& x) {
  require_2d(x, "log_softmax");
  const int m = x.dim(0), c = x.dim(1);
  if (c < 2)
    throw DimensionError("log_softmax expects at least 2 columns, got " + x.shape_str());
  Tensor y = make_output({m, c}, x.requires_grad());
  auto xs = x.values();
  auto ys = y.values();
  for (int i = 0; i < m; ++i) {
    const double* row = xs.data() + static_cast<size_t>(i) * c;
    double* out = ys.data() + static_cast<size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
    lse = std::log(lse) + mx;
    for (int j = 0; j < c; ++j) out[j] = row[j] - lse;
  }
  if (x.requires_grad()) {
    g.record(y, [x, y, m, c]() {
      const auto& dy = y.payload().grad;
      const auto& ys = y.payload().values;
      auto& dx = x.payload().grad;
      for (int i = 0; i < m; ++i) {
        const size_t off = static_cast<size_t>(i) * c;
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += dy[off + j];
        for (int j = 0; j < c; ++j) dx[off + j] += dy[off + j] - std::exp(ys[off + j]) * s;
      }
    });
  }
  return y;
}

Tensor nll_soft(Graph& g, const Tensor& logp, const Tensor& target) {
  require_2d(logp, "nll_soft");
  require_2d(target, "nll_soft");
  if (!same_shape(logp, target))
    throw DimensionError("nll_soft shapes disagree: " + logp.shape_str() + " vs " +
                         target.shape_str());
  const int m = logp.dim(0), c = logp.dim(1);
  auto ts = target.values();
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      const double t = ts[static_cast<size_t>(i) * c + j];
      if (t < 0.0)
        throw ValidationError("nll_soft target row " + std::to_string(i) + " has a negative entry");
      s += t;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw ValidationError("nll_soft target row " + std::to_string(i) +
                            " sums to " + std::to_string(s) + ", expected 1");
  }
  Tensor loss = make_output({}, logp.requires_grad());
  auto ls = logp.values();
  double acc = 0.0;
  for (size_t i = 0; i < ls.size(); ++i) acc -= ts[i] * ls[i];
  loss.values()[0] = acc / m;
  if (logp.requires_grad()) {
    g.record(loss, [logp, target, loss, m]() {
      const double dl = loss.payload().grad[0];
      const auto& ts = target.payload().values;
      auto& dlp = logp.payload().grad;
      const double f = dl / m;
      for (size_t i = 0; i < dlp.size(); ++i) dlp[i] -= f * ts[i];
    });
  }
  return loss;
}

Tensor l1_distance(Graph& g, const Tensor& a, const Tensor& b) {
  require_2d(a, "l1_distance");
  require_2d(b, "l1_distance");
  if (!same_shape(a, b))
    throw DimensionError("l1_distance shapes disagree: " + a.shape_str() + " vs " +
                         b.shape_str());
  const int m = a.dim(0);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor loss = make_output({}, rg);
  auto as = a.values();
  auto bs = b.values();
  double acc = 0.0;
  for (size_t i = 0; i < as.size(); ++i) acc += std::abs(as[i] - bs[i]);
  loss.values()[0] = acc / m;
  if (rg) {
    g.record(loss, [a, b, loss, m]() {
      const double f = loss.payload().grad[0] / m;
      const auto& as = a.payload().values;
      const auto& bs = b.payload().values;
      for (size_t i = 0; i < as.size(); ++i) {
        const double d = as[i] - bs[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (a.requires_grad()) a.payload().grad[i] += f * s;
        if (b.requires_grad()) b.payload().grad[i] -= f * s;
      }
    });
  }
  return loss;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b))
    throw DimensionError("add shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor c = make_output(a.shape(), rg);
  auto as = a.values();
  auto bs = b.values();
  auto cs = c.values();
  for (size_t i = 0; i < cs.size(); ++i) cs[i] = as[i] + bs[i];
  if (rg) {
    g.record(c, [a, b, c]() {
      const auto& dc = c.payload().grad;
      if (a.requires_grad()) {
        auto& da = a.payload().grad;
        for (size_t i = 0; i < da.size(); ++i) da[i] += dc[i];
      }
      if (b.requires_grad()) {
        auto& db = b.payload().grad;
        for (size_t i = 0; i < db.size(); ++i) db[i] += dc[i];
      }
    });
  }
  return c;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b))
    throw DimensionError("mul shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor c = make_output(a.shape(), rg);
  auto as = a.values();
  auto bs = b.values();
  auto cs = c.values();
  for (size_t i = 0; i < cs.size(); ++i) cs[i] = as[i] * bs[i];
  if (rg) {
    g.record(c, [a, b, c]() {
      const auto& dc = c.payload().grad;
      const auto& as = a.payload().values;
      const auto& bs = b.payload().values;
      if (a.requires_grad()) {
        auto& da = a.payload().grad;
        for (size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * bs[i];
      }
      if (b.requires_grad()) {
        auto& db = b.payload().grad;
        for (size_t i = 0; i < db.size(); ++i) db[i] += dc[i] * as[i];
      }
    });
  }
  return c;
}

Tensor scale(Graph& g, const Tensor& x, double c) {
  Tensor y = make_output(x.shape(), x.requires_grad());
  auto xs = x.values();
  auto ys = y.values();
  for (size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] * c;
  if (x.requires_grad()) {
    g.record(y, [x, y, c]() {
      const auto& dy = y.payload().grad;
      auto& dx = x.payload().grad;
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * c;
    });
  }
  return y;
}

Tensor sum(Graph& g, const Tensor& x) {
  Tensor y = make_output({}, x.requires_grad());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  y.values()[0] = acc;
  if (x.requires_grad()) {
    g.record(y, [x, y]() {
      const double dy = y.payload().grad[0];
      auto& dx = x.payload().grad;
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += dy;
    });
  }
  return y;
}

}  // namespace mran
