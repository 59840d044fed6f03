#include "hcner/intnet.hpp"

#include <cmath>

namespace hcner {

void IntNetConfig::validate() const {
  if (char_dim <= 0 || init_filters <= 0 || block_filters <= 0)
    throw ConfigError("IntNet dimensions must be positive");
  if (layers < 1 || layers % 2 == 0) throw ConfigError("IntNet layer count must be odd");
  if (kernel_sizes.empty()) throw ConfigError("IntNet needs at least one kernel size");
  for (int k : kernel_sizes)
    if (k < 1 || k % 2 == 0) throw ConfigError("IntNet kernel sizes must be odd");
}

template <class S>
IntNet<S>::IntNet(ParamRegistry<S>& reg, const std::string& name, int char_vocab, IntNetConfig config, Rng& rng)
    : config_(std::move(config)) {
  config_.validate();
  embedding_ = reg.add(name + ".char_embedding",
                       uniform_matrix<S>(char_vocab, config_.char_dim, std::sqrt(3.0 / config_.char_dim), rng));
  initial_ = Conv1d<S>::create(reg, name + ".initial", config_.char_dim, config_.init_filters,
                               config_.kernel_sizes.front(), rng);
  Index width = config_.init_filters;
  for (int b = 0; b < config_.blocks(); ++b) {
    const std::string prefix = name + ".block" + std::to_string(b);
    Block block;
    block.squeeze = Conv1d<S>::create(reg, prefix + ".squeeze", width, config_.block_filters, 1, rng);
    for (int k : config_.kernel_sizes)
      block.branches.push_back(Conv1d<S>::create(reg, prefix + ".conv" + std::to_string(k), config_.block_filters,
                                                 config_.block_filters, k, rng));
    blocks_.push_back(std::move(block));
    width += config_.block_output();
  }
}

template <class S>
RowVector<S> IntNet<S>::forward(const ParamRegistry<S>& reg, std::span<const int> chars, Cache& cache) const {
  const auto n = static_cast<Index>(chars.size());
  if (n == 0) throw DataError("cannot encode an empty word");
  const auto& table = reg.value(embedding_);

  cache.chars.assign(chars.begin(), chars.end());
  cache.embedded.resize(n, config_.char_dim);
  for (Index i = 0; i < n; ++i) cache.embedded.row(i) = table.row(chars[static_cast<std::size_t>(i)]);

  cache.initial = relu(initial_.forward(reg, cache.embedded));
  cache.features.resize(n, config_.output_dim());
  cache.features.leftCols(config_.init_filters) = cache.initial;
  cache.blocks.resize(blocks_.size());

  Index width = config_.init_filters;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    BlockCache& bc = cache.blocks[b];
    bc.input = cache.features.leftCols(width);
    bc.squeezed = relu(blocks_[b].squeeze.forward(reg, bc.input));
    bc.branches.resize(blocks_[b].branches.size());
    for (std::size_t k = 0; k < bc.branches.size(); ++k) {
      bc.branches[k] = relu(blocks_[b].branches[k].forward(reg, bc.squeezed));
      cache.features.middleCols(width, config_.block_filters) = bc.branches[k];
      width += config_.block_filters;
    }
  }

  RowVector<S> out(cache.features.cols());
  cache.argmax.resize(static_cast<std::size_t>(cache.features.cols()));
  for (Index c = 0; c < cache.features.cols(); ++c) {
    Index arg = 0;
    out(c) = cache.features.col(c).maxCoeff(&arg);
    cache.argmax[static_cast<std::size_t>(c)] = arg;
  }
  return out;
}

template <class S>
RowVector<S> IntNet<S>::encode(const ParamRegistry<S>& reg, std::span<const int> chars) const {
  Cache cache;
  return forward(reg, chars, cache);
}

template <class S>
void IntNet<S>::backward(ParamRegistry<S>& reg, const RowVector<S>& dout, const Cache& cache) const {
  const Index n = cache.features.rows();
  Matrix<S> dfeatures = Matrix<S>::Zero(n, cache.features.cols());
  for (Index c = 0; c < dfeatures.cols(); ++c) dfeatures(cache.argmax[static_cast<std::size_t>(c)], c) = dout(c);

  for (std::size_t b = blocks_.size(); b-- > 0;) {
    const BlockCache& bc = cache.blocks[b];
    const Index in_width = bc.input.cols();
    Matrix<S> dsqueezed = Matrix<S>::Zero(n, config_.block_filters);
    Index col = in_width;
    for (std::size_t k = 0; k < bc.branches.size(); ++k) {
      const Matrix<S> dbranch =
          relu_backward<S>(bc.branches[k], dfeatures.middleCols(col, config_.block_filters));
      dsqueezed += blocks_[b].branches[k].backward(reg, bc.squeezed, dbranch);
      col += config_.block_filters;
    }
    const Matrix<S> dpre = relu_backward<S>(bc.squeezed, dsqueezed);
    dfeatures.leftCols(in_width) += blocks_[b].squeeze.backward(reg, bc.input, dpre);
  }

  const Matrix<S> dinit = relu_backward<S>(cache.initial, dfeatures.leftCols(config_.init_filters));
  const Matrix<S> dembedded = initial_.backward(reg, cache.embedded, dinit);
  auto& grad = reg.grad(embedding_);
  for (Index i = 0; i < n; ++i) grad.row(cache.chars[static_cast<std::size_t>(i)]) += dembedded.row(i);
}

template class IntNet<float>;
template class IntNet<double>;

}  // namespace hcner
