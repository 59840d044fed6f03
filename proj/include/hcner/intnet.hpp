#pragma once

#include <span>
#include <string>
#include <vector>

#include "hcner/nn.hpp"

namespace hcner {

struct IntNetConfig {
  int char_dim = 32;
  int init_filters = 32;
  int block_filters = 16;
  std::vector<int> kernel_sizes{3, 5};
  int layers = 7;

  int blocks() const { return (layers - 1) / 2; }
  int block_output() const { return static_cast<int>(kernel_sizes.size()) * block_filters; }
  int output_dim() const { return init_filters + blocks() * block_output(); }
  void validate() const;
};

// Funnel-shaped character CNN. An initial convolution (first kernel size)
// feeds (layers - 1) / 2 blocks; each block is a 1x1 convolution followed by
// parallel convolutions of every kernel size whose outputs are concatenated.
// Every block sees the initial output and all earlier block outputs, and the
// word vector is the position-wise max over all of them, so its size depends
// only on the configuration.
template <class S>
class IntNet {
 public:
  struct BlockCache {
    Matrix<S> input;
    Matrix<S> squeezed;
    std::vector<Matrix<S>> branches;
  };
  struct Cache {
    std::vector<int> chars;
    Matrix<S> embedded;
    Matrix<S> initial;
    std::vector<BlockCache> blocks;
    Matrix<S> features;       // n x output_dim
    std::vector<Index> argmax;  // per output channel
  };

  IntNet() = default;
  IntNet(ParamRegistry<S>& reg, const std::string& name, int char_vocab, IntNetConfig config, Rng& rng);

  RowVector<S> forward(const ParamRegistry<S>& reg, std::span<const int> chars, Cache& cache) const;
  RowVector<S> encode(const ParamRegistry<S>& reg, std::span<const int> chars) const;
  void backward(ParamRegistry<S>& reg, const RowVector<S>& dout, const Cache& cache) const;

  const IntNetConfig& config() const { return config_; }
  int output_dim() const { return config_.output_dim(); }
  ParamId embedding() const { return embedding_; }

 private:
  struct Block {
    Conv1d<S> squeeze;
    std::vector<Conv1d<S>> branches;
  };

  IntNetConfig config_;
  ParamId embedding_ = 0;
  Conv1d<S> initial_;
  std::vector<Block> blocks_;
};

}  // namespace hcner
