#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcner/nn.hpp"

namespace hcner {

enum class Compatibility { Dot, ScaledDot, Cosine };

std::string_view to_string(Compatibility kind);
Compatibility parse_compatibility(std::string_view name);

// dot = q.k, scaled = q.k / sqrt(d), cosine = q.k / (|q||k|).
template <class Q, class K>
typename Q::Scalar compatibility(const Eigen::MatrixBase<Q>& query, const Eigen::MatrixBase<K>& key,
                                 Compatibility kind) {
  using S = typename Q::Scalar;
  const S dot = query.dot(key);
  switch (kind) {
    case Compatibility::Dot: return dot;
    case Compatibility::ScaledDot: return dot / std::sqrt(static_cast<S>(query.size()));
    case Compatibility::Cosine: {
      const S norms = query.norm() * key.norm();
      if (norms == S(0)) throw DataError("cosine compatibility with a zero-norm vector");
      return dot / norms;
    }
  }
  return dot;
}

// Key-value store with one slot per training-token occurrence. Keys are word
// embedding snapshots, values are encoder hidden-state snapshots; an inverted
// index maps each word id to its slots in ascending order.
template <class S>
class MemoryStore {
 public:
  MemoryStore() = default;
  MemoryStore(std::vector<int> slot_words, Index key_dim, Index value_dim);

  std::size_t slot_count() const { return slot_words_.size(); }
  Index key_dim() const { return keys_.cols(); }
  Index value_dim() const { return values_.cols(); }

  // Rewrites the slot and marks it initialized.
  void update(std::size_t slot, const RowVector<S>& key, const RowVector<S>& value);

  // Initialized slots of `word`; a seeded uniform sample of `max_slots` of them
  // when there are more. `exclude` drops one slot (the querying occurrence).
  std::vector<std::size_t> query(int word, std::size_t max_slots, Rng& rng,
                                 std::optional<std::size_t> exclude = std::nullopt) const;

  std::span<const std::size_t> slots_of(int word) const;
  int word_of(std::size_t slot) const { return slot_words_.at(slot); }
  bool initialized(std::size_t slot) const { return initialized_.at(slot) != 0; }
  std::size_t initialized_count() const;

  auto key(std::size_t slot) const { return keys_.row(static_cast<Index>(slot)); }
  auto value(std::size_t slot) const { return values_.row(static_cast<Index>(slot)); }

  const Matrix<S>& keys() const { return keys_; }
  const Matrix<S>& values() const { return values_; }
  const std::vector<int>& slot_words() const { return slot_words_; }
  const std::vector<std::uint8_t>& initialized_flags() const { return initialized_; }

  // Restores a snapshot (checkpoint loading).
  void restore(Matrix<S> keys, Matrix<S> values, std::vector<std::uint8_t> initialized);

  template <class T>
  MemoryStore<T> cast() const {
    MemoryStore<T> out(slot_words_, key_dim(), value_dim());
    out.restore(keys_.template cast<T>(), values_.template cast<T>(), initialized_);
    return out;
  }

 private:
  std::vector<int> slot_words_;
  std::vector<std::vector<std::size_t>> index_;
  std::vector<std::uint8_t> initialized_;
  Matrix<S> keys_;
  Matrix<S> values_;
};

template <class S>
struct MemoryResponse {
  std::vector<std::size_t> slots;
  Vector<S> scores;  // u_j
  Vector<S> alpha;   // softmax(u)
  RowVector<S> r;
};

// Attention read over `slots`; nullopt when the subset is empty.
template <class S>
std::optional<MemoryResponse<S>> memory_response(const MemoryStore<S>& store, const RowVector<S>& query,
                                                 std::vector<std::size_t> slots, Compatibility kind);

// dL/dquery from dL/dr. Stored keys and values are constants.
template <class S>
RowVector<S> memory_response_backward(const MemoryStore<S>& store, const RowVector<S>& query,
                                      const MemoryResponse<S>& response, const RowVector<S>& dr,
                                      Compatibility kind);

// g = lambda h + (1 - lambda) r, or h when there is no response.
template <class S>
RowVector<S> fuse(const RowVector<S>& h, const RowVector<S>* r, double lambda);

void check_lambda(double lambda);

}  // namespace hcner
