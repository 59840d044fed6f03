#include "hcner/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hcner {

template <class S>
ParamId ParamRegistry<S>::add(std::string name, Matrix<S> value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  const ParamId id = params_.size();
  index_.emplace(name, id);
  Parameter<S> p;
  p.name = std::move(name);
  p.grad = Matrix<S>::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  params_.push_back(std::move(p));
  return id;
}

template <class S>
std::optional<ParamId> ParamRegistry<S>::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

template <class S>
void ParamRegistry<S>::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

template <class S>
std::size_t ParamRegistry<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <class S>
Matrix<S> uniform_matrix(Index rows, Index cols, double bound, Rng& rng) {
  Matrix<S> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(uniform(rng, -bound, bound));
  return m;
}

template <class S>
Matrix<S> glorot_uniform(Index rows, Index cols, Rng& rng) {
  return uniform_matrix<S>(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

// ---- linear -------------------------------------------------------------

template <class S>
Linear<S> Linear<S>::create(ParamRegistry<S>& reg, const std::string& name, Index in, Index out, Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = reg.add(name + ".weight", glorot_uniform<S>(out, in, rng));
  l.bias = reg.add(name + ".bias", Matrix<S>::Zero(1, out));
  return l;
}

template <class S>
Matrix<S> Linear<S>::forward(const ParamRegistry<S>& reg, const Matrix<S>& x) const {
  Matrix<S> y = x * reg.value(weight).transpose();
  y.rowwise() += reg.value(bias).row(0);
  return y;
}

template <class S>
Matrix<S> Linear<S>::backward(ParamRegistry<S>& reg, const Matrix<S>& x, const Matrix<S>& dy) const {
  reg.grad(weight).noalias() += dy.transpose() * x;
  reg.grad(bias).row(0) += dy.colwise().sum();
  return dy * reg.value(weight);
}

// ---- conv1d -------------------------------------------------------------

template <class S>
Matrix<S> im2col(const Matrix<S>& x, Index kernel) {
  const Index n = x.rows();
  const Index c = x.cols();
  const Index half = (kernel - 1) / 2;
  Matrix<S> cols = Matrix<S>::Zero(n, kernel * c);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < kernel; ++t) {
      const Index src = i + t - half;
      if (src >= 0 && src < n) cols.block(i, t * c, 1, c) = x.row(src);
    }
  return cols;
}

template <class S>
Matrix<S> col2im(const Matrix<S>& cols, Index rows, Index channels, Index kernel) {
  const Index half = (kernel - 1) / 2;
  Matrix<S> x = Matrix<S>::Zero(rows, channels);
  for (Index i = 0; i < rows; ++i)
    for (Index t = 0; t < kernel; ++t) {
      const Index dst = i + t - half;
      if (dst >= 0 && dst < rows) x.row(dst) += cols.block(i, t * channels, 1, channels);
    }
  return x;
}

template <class S>
Conv1d<S> Conv1d<S>::create(ParamRegistry<S>& reg, const std::string& name, Index in, Index out, Index kernel,
                            Rng& rng) {
  if (kernel < 1 || kernel % 2 == 0)
    throw ConfigError("convolution kernel must be odd, got " + std::to_string(kernel));
  Conv1d c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.weight = reg.add(name + ".weight",
                     uniform_matrix<S>(out, kernel * in, std::sqrt(6.0 / static_cast<double>((in + out) * kernel)), rng));
  c.bias = reg.add(name + ".bias", Matrix<S>::Zero(1, out));
  return c;
}

template <class S>
Matrix<S> Conv1d<S>::forward(const ParamRegistry<S>& reg, const Matrix<S>& x) const {
  Matrix<S> y;
  if (kernel == 1) {
    y = x * reg.value(weight).transpose();
  } else {
    y = im2col(x, kernel) * reg.value(weight).transpose();
  }
  y.rowwise() += reg.value(bias).row(0);
  return y;
}

template <class S>
Matrix<S> Conv1d<S>::backward(ParamRegistry<S>& reg, const Matrix<S>& x, const Matrix<S>& dy) const {
  reg.grad(bias).row(0) += dy.colwise().sum();
  if (kernel == 1) {
    reg.grad(weight).noalias() += dy.transpose() * x;
    return dy * reg.value(weight);
  }
  const Matrix<S> cols = im2col(x, kernel);
  reg.grad(weight).noalias() += dy.transpose() * cols;
  const Matrix<S> dcols = dy * reg.value(weight);
  return col2im(dcols, x.rows(), in, kernel);
}

// ---- lstm ---------------------------------------------------------------

namespace {

template <class S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

}  // namespace

template <class S>
Lstm<S> Lstm<S>::create(ParamRegistry<S>& reg, const std::string& name, Index in, Index hidden, Rng& rng) {
  Lstm l;
  l.in = in;
  l.hidden = hidden;
  l.w_input = reg.add(name + ".w_input", glorot_uniform<S>(4 * hidden, in, rng));
  l.w_hidden = reg.add(name + ".w_hidden", glorot_uniform<S>(4 * hidden, hidden, rng));
  Matrix<S> b = Matrix<S>::Zero(1, 4 * hidden);
  b.block(0, hidden, 1, hidden).setOnes();
  l.bias = reg.add(name + ".bias", std::move(b));
  return l;
}

template <class S>
Matrix<S> Lstm<S>::forward(const ParamRegistry<S>& reg, const Matrix<S>& x, LstmCache<S>& cache) const {
  const Index n = x.rows();
  if (n == 0) throw DataError("LSTM input sequence is empty");
  const Index h = hidden;
  const auto& wh = reg.value(w_hidden);

  cache.input = x;
  cache.gates.noalias() = x * reg.value(w_input).transpose();
  cache.gates.rowwise() += reg.value(bias).row(0);
  cache.cells.resize(n, h);
  cache.hidden.resize(n, h);

  Vector<S> z(4 * h);
  for (Index t = 0; t < n; ++t) {
    z = cache.gates.row(t).transpose();
    if (t > 0) z.noalias() += wh * cache.hidden.row(t - 1).transpose();
    auto gates = cache.gates.row(t);
    for (Index j = 0; j < h; ++j) {
      const S i = sigmoid(z(j));
      const S f = sigmoid(z(h + j));
      const S g = std::tanh(z(2 * h + j));
      const S o = sigmoid(z(3 * h + j));
      const S c_prev = t > 0 ? cache.cells(t - 1, j) : S(0);
      const S c = f * c_prev + i * g;
      gates(j) = i;
      gates(h + j) = f;
      gates(2 * h + j) = g;
      gates(3 * h + j) = o;
      cache.cells(t, j) = c;
      cache.hidden(t, j) = o * std::tanh(c);
    }
  }
  return cache.hidden;
}

template <class S>
Matrix<S> Lstm<S>::backward(ParamRegistry<S>& reg, const Matrix<S>& dh, const LstmCache<S>& cache) const {
  const Index n = cache.input.rows();
  const Index h = hidden;
  const auto& wh = reg.value(w_hidden);

  Matrix<S> dz(n, 4 * h);
  Vector<S> dh_next = Vector<S>::Zero(h);
  Vector<S> dc_next = Vector<S>::Zero(h);
  for (Index t = n - 1; t >= 0; --t) {
    auto gates = cache.gates.row(t);
    auto out = dz.row(t);
    for (Index j = 0; j < h; ++j) {
      const S i = gates(j), f = gates(h + j), g = gates(2 * h + j), o = gates(3 * h + j);
      const S c_prev = t > 0 ? cache.cells(t - 1, j) : S(0);
      const S tc = std::tanh(cache.cells(t, j));
      const S dht = dh(t, j) + dh_next(j);
      const S dc = dc_next(j) + dht * o * (S(1) - tc * tc);
      out(j) = dc * g * i * (S(1) - i);
      out(h + j) = dc * c_prev * f * (S(1) - f);
      out(2 * h + j) = dc * i * (S(1) - g * g);
      out(3 * h + j) = dht * tc * o * (S(1) - o);
      dc_next(j) = dc * f;
    }
    if (t > 0) dh_next.noalias() = wh.transpose() * out.transpose();
  }

  reg.grad(w_input).noalias() += dz.transpose() * cache.input;
  reg.grad(bias).row(0) += dz.colwise().sum();
  if (n > 1) reg.grad(w_hidden).noalias() += dz.bottomRows(n - 1).transpose() * cache.hidden.topRows(n - 1);
  return dz * reg.value(w_input);
}

template <class S>
BiLstm<S> BiLstm<S>::create(ParamRegistry<S>& reg, const std::string& name, Index in, Index hidden, Rng& rng) {
  if (hidden <= 0 || hidden % 2 != 0)
    throw ConfigError("BiLSTM hidden size must be even, got " + std::to_string(hidden));
  BiLstm b;
  b.hidden = hidden;
  b.forward_cell = Lstm<S>::create(reg, name + ".fwd", in, hidden / 2, rng);
  b.backward_cell = Lstm<S>::create(reg, name + ".bwd", in, hidden / 2, rng);
  return b;
}

template <class S>
Matrix<S> BiLstm<S>::forward(const ParamRegistry<S>& reg, const Matrix<S>& x, BiLstmCache<S>& cache) const {
  const Index half = hidden / 2;
  Matrix<S> out(x.rows(), hidden);
  out.leftCols(half) = forward_cell.forward(reg, x, cache.forward);
  const Matrix<S> reversed = x.colwise().reverse();
  out.rightCols(half) = backward_cell.forward(reg, reversed, cache.backward).colwise().reverse();
  return out;
}

template <class S>
Matrix<S> BiLstm<S>::backward(ParamRegistry<S>& reg, const Matrix<S>& dh, const BiLstmCache<S>& cache) const {
  const Index half = hidden / 2;
  Matrix<S> dx = forward_cell.backward(reg, dh.leftCols(half), cache.forward);
  const Matrix<S> d_rev = dh.rightCols(half).colwise().reverse();
  dx += backward_cell.backward(reg, d_rev, cache.backward).colwise().reverse();
  return dx;
}

template <class S>
Matrix<S> bilstm_encode(const ParamRegistry<S>& reg, const BiLstm<S>& layer, const Matrix<S>& x) {
  BiLstmCache<S> cache;
  return layer.forward(reg, x, cache);
}

// ---- dropout ------------------------------------------------------------

template <class S>
DropoutResult<S> dropout(const Matrix<S>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  DropoutResult<S> r;
  if (!training || rate == 0.0) {
    r.output = x;
    return r;
  }
  const S scale = static_cast<S>(1.0 / (1.0 - rate));
  r.mask.resize(x.rows(), x.cols());
  for (Index i = 0; i < r.mask.size(); ++i) r.mask.data()[i] = uniform01(rng) < rate ? S(0) : scale;
  r.output = x.cwiseProduct(r.mask);
  return r;
}

template <class S>
Matrix<S> dropout_backward(const Matrix<S>& dy, const Matrix<S>& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

// ---- reductions ---------------------------------------------------------

template <class S>
S logsumexp(const Vector<S>& x) {
  const S m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

template <class S>
Vector<S> softmax(const Vector<S>& x) {
  Vector<S> e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

template <class S>
Vector<S> softmax_backward(const Vector<S>& y, const Vector<S>& dy) {
  const S dot = y.dot(dy);
  return y.cwiseProduct((dy.array() - dot).matrix());
}

template <class S>
Matrix<S> relu(const Matrix<S>& x) {
  return x.cwiseMax(S(0));
}

template <class S>
Matrix<S> relu_backward(const Matrix<S>& y, const Matrix<S>& dy) {
  return (y.array() > S(0)).select(dy, S(0));
}

// ---- gradient check -----------------------------------------------------

template <class S>
GradCheckReport<S> gradcheck(const std::function<S(bool)>& loss, ParamRegistry<S>& params,
                             const GradCheckOptions& options) {
  params.zero_grad();
  const S base = loss(true);
  if (!std::isfinite(base)) throw NumericError("gradcheck: loss is not finite");
  std::vector<Matrix<S>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad);

  GradCheckReport<S> report;
  Rng rng(options.seed);
  const S eps = static_cast<S>(options.eps);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix<S>& value = params[pi].value;
    std::vector<Index> entries(static_cast<std::size_t>(value.size()));
    std::iota(entries.begin(), entries.end(), Index{0});
    if (options.max_entries_per_param > 0 && entries.size() > options.max_entries_per_param) {
      shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (Index e : entries) {
      const S saved = value.data()[e];
      value.data()[e] = saved + eps;
      const S plus = loss(false);
      value.data()[e] = saved - eps;
      const S minus = loss(false);
      value.data()[e] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) throw NumericError("gradcheck: loss is not finite");
      const S numeric = (plus - minus) / (S(2) * eps);
      const S a = analytic[pi].data()[e];
      const S denom = std::max({std::abs(a), std::abs(numeric), static_cast<S>(options.min_denominator)});
      const S rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].name;
        report.worst_index = e;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  // Leave the analytic gradients in place for callers that inspect them.
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi].grad = analytic[pi];
  return report;
}

#define HCNER_INSTANTIATE_NN(S)                                                                     \
  template class ParamRegistry<S>;                                                                  \
  template Matrix<S> uniform_matrix<S>(Index, Index, double, Rng&);                                 \
  template Matrix<S> glorot_uniform<S>(Index, Index, Rng&);                                         \
  template struct Linear<S>;                                                                        \
  template Matrix<S> im2col<S>(const Matrix<S>&, Index);                                            \
  template Matrix<S> col2im<S>(const Matrix<S>&, Index, Index, Index);                              \
  template struct Conv1d<S>;                                                                        \
  template struct Lstm<S>;                                                                          \
  template struct BiLstm<S>;                                                                        \
  template Matrix<S> bilstm_encode<S>(const ParamRegistry<S>&, const BiLstm<S>&, const Matrix<S>&); \
  template DropoutResult<S> dropout<S>(const Matrix<S>&, double, bool, Rng&);                       \
  template Matrix<S> dropout_backward<S>(const Matrix<S>&, const Matrix<S>&);                       \
  template S logsumexp<S>(const Vector<S>&);                                                        \
  template Vector<S> softmax<S>(const Vector<S>&);                                                  \
  template Vector<S> softmax_backward<S>(const Vector<S>&, const Vector<S>&);                       \
  template Matrix<S> relu<S>(const Matrix<S>&);                                                     \
  template Matrix<S> relu_backward<S>(const Matrix<S>&, const Matrix<S>&);                          \
  template GradCheckReport<S> gradcheck<S>(const std::function<S(bool)>&, ParamRegistry<S>&,        \
                                           const GradCheckOptions&);

HCNER_INSTANTIATE_NN(float)
HCNER_INSTANTIATE_NN(double)

}  // namespace hcner
