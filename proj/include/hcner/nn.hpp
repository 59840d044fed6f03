#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "hcner/error.hpp"
#include "hcner/random.hpp"

namespace hcner {

// Sequences are stored one position per row, so a row is contiguous.
template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Index = Eigen::Index;
using ParamId = std::size_t;

template <class S>
struct Parameter {
  std::string name;
  Matrix<S> value;
  Matrix<S> grad;
};

template <class S>
class ParamRegistry {
 public:
  ParamId add(std::string name, Matrix<S> value);
  std::optional<ParamId> find(std::string_view name) const;

  Matrix<S>& value(ParamId id) { return params_[id].value; }
  const Matrix<S>& value(ParamId id) const { return params_[id].value; }
  Matrix<S>& grad(ParamId id) { return params_[id].grad; }
  const Matrix<S>& grad(ParamId id) const { return params_[id].grad; }

  std::size_t size() const { return params_.size(); }
  Parameter<S>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<S>& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::size_t parameter_count() const;

  // Same names and shapes, values converted to T, zero gradients.
  template <class T>
  ParamRegistry<T> cast() const {
    ParamRegistry<T> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<T>());
    return out;
  }

 private:
  std::vector<Parameter<S>> params_;
  std::unordered_map<std::string, ParamId> index_;
};

template <class S>
Matrix<S> uniform_matrix(Index rows, Index cols, double bound, Rng& rng);

// uniform(-sqrt(6 / (fan_in + fan_out)), +...) with fan_out = rows, fan_in = cols.
template <class S>
Matrix<S> glorot_uniform(Index rows, Index cols, Rng& rng);

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <class Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + std::string(what));
}

// ---- layers -------------------------------------------------------------
//
// Layers hold parameter ids only. forward() reads values from the registry,
// backward() accumulates into the registry's gradients and returns the
// gradient with respect to the layer input.

template <class S>
struct Linear {
  ParamId weight = 0;  // out x in
  ParamId bias = 0;    // 1 x out
  Index in = 0;
  Index out = 0;

  static Linear create(ParamRegistry<S>& reg, const std::string& name, Index in, Index out, Rng& rng);
  Matrix<S> forward(const ParamRegistry<S>& reg, const Matrix<S>& x) const;
  Matrix<S> backward(ParamRegistry<S>& reg, const Matrix<S>& x, const Matrix<S>& dy) const;
};

// Zero-padded windows: row i holds x[i - half], ..., x[i + half] side by side.
template <class S>
Matrix<S> im2col(const Matrix<S>& x, Index kernel);

// Scatter-add of window gradients back onto the input rows.
template <class S>
Matrix<S> col2im(const Matrix<S>& cols, Index rows, Index channels, Index kernel);

// 1-D convolution over positions with "same" zero padding; kernel must be odd.
template <class S>
struct Conv1d {
  ParamId weight = 0;  // out x (kernel * in)
  ParamId bias = 0;    // 1 x out
  Index in = 0;
  Index out = 0;
  Index kernel = 1;

  static Conv1d create(ParamRegistry<S>& reg, const std::string& name, Index in, Index out, Index kernel,
                       Rng& rng);
  Matrix<S> forward(const ParamRegistry<S>& reg, const Matrix<S>& x) const;
  Matrix<S> backward(ParamRegistry<S>& reg, const Matrix<S>& x, const Matrix<S>& dy) const;
};

template <class S>
struct LstmCache {
  Matrix<S> input;   // N x in
  Matrix<S> gates;   // N x 4h, activated, order i f g o
  Matrix<S> cells;   // N x h
  Matrix<S> hidden;  // N x h
};

// Standard LSTM without peepholes, zero initial state.
template <class S>
struct Lstm {
  ParamId w_input = 0;   // 4h x in
  ParamId w_hidden = 0;  // 4h x h
  ParamId bias = 0;      // 1 x 4h, forget gate initialised to 1
  Index in = 0;
  Index hidden = 0;

  static Lstm create(ParamRegistry<S>& reg, const std::string& name, Index in, Index hidden, Rng& rng);
  Matrix<S> forward(const ParamRegistry<S>& reg, const Matrix<S>& x, LstmCache<S>& cache) const;
  Matrix<S> backward(ParamRegistry<S>& reg, const Matrix<S>& dh, const LstmCache<S>& cache) const;
};

template <class S>
struct BiLstmCache {
  LstmCache<S> forward;
  LstmCache<S> backward;
};

// Output row i is [forward state i ; backward state i]; `hidden` is the
// concatenated size and must be even.
template <class S>
struct BiLstm {
  Lstm<S> forward_cell;
  Lstm<S> backward_cell;
  Index hidden = 0;

  static BiLstm create(ParamRegistry<S>& reg, const std::string& name, Index in, Index hidden, Rng& rng);
  Matrix<S> forward(const ParamRegistry<S>& reg, const Matrix<S>& x, BiLstmCache<S>& cache) const;
  Matrix<S> backward(ParamRegistry<S>& reg, const Matrix<S>& dh, const BiLstmCache<S>& cache) const;
};

template <class S>
Matrix<S> bilstm_encode(const ParamRegistry<S>& reg, const BiLstm<S>& layer, const Matrix<S>& x);

// ---- dropout ------------------------------------------------------------

template <class S>
struct DropoutResult {
  Matrix<S> output;
  Matrix<S> mask;  // empty when dropout was the identity
};

// Inverted dropout: kept entries are scaled by 1 / (1 - rate).
template <class S>
DropoutResult<S> dropout(const Matrix<S>& x, double rate, bool training, Rng& rng);

template <class S>
Matrix<S> dropout_backward(const Matrix<S>& dy, const Matrix<S>& mask);

// ---- reductions ---------------------------------------------------------

template <class S>
S logsumexp(const Vector<S>& x);

template <class S>
Vector<S> softmax(const Vector<S>& x);

// Given y = softmax(x) and dL/dy, returns dL/dx.
template <class S>
Vector<S> softmax_backward(const Vector<S>& y, const Vector<S>& dy);

template <class S>
Matrix<S> relu(const Matrix<S>& x);

// dL/dx from dL/dy where y = relu(x).
template <class S>
Matrix<S> relu_backward(const Matrix<S>& y, const Matrix<S>& dy);

// ---- gradient check -----------------------------------------------------

struct GradCheckOptions {
  double eps = 1e-5;
  // Smallest denominator of the relative error. Entries whose gradients are
  // below it are effectively compared on absolute error.
  double min_denominator = 1e-8;
  // 0 checks every entry; otherwise a seeded random subset per parameter.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

template <class S>
struct GradCheckReport {
  S max_rel_error = 0;
  std::string worst_param;
  Index worst_index = -1;
  S analytic = 0;
  S numeric = 0;
  std::size_t checked = 0;
};

// `loss(true)` must compute the loss and accumulate gradients into `params`;
// `loss(false)` only computes the loss. Reports the largest
// |analytic - numeric| / max(|analytic|, |numeric|, min_denominator) over
// the checked entries, with central differences as the numeric gradient.
template <class S>
GradCheckReport<S> gradcheck(const std::function<S(bool)>& loss, ParamRegistry<S>& params,
                             const GradCheckOptions& options = {});

}  // namespace hcner
