#include "hcner/docmem.hpp"

#include <algorithm>
#include <cmath>

namespace hcner {

std::string_view to_string(Compatibility kind) {
  switch (kind) {
    case Compatibility::Dot: return "dot";
    case Compatibility::ScaledDot: return "scaled";
    case Compatibility::Cosine: return "cosine";
  }
  return "?";
}

Compatibility parse_compatibility(std::string_view name) {
  if (name == "dot") return Compatibility::Dot;
  if (name == "scaled") return Compatibility::ScaledDot;
  if (name == "cosine") return Compatibility::Cosine;
  throw ConfigError("unknown compatibility '" + std::string(name) + "' (dot|scaled|cosine)");
}

template <class S>
MemoryStore<S>::MemoryStore(std::vector<int> slot_words, Index key_dim, Index value_dim)
    : slot_words_(std::move(slot_words)) {
  int max_word = -1;
  for (int w : slot_words_) max_word = std::max(max_word, w);
  index_.resize(static_cast<std::size_t>(max_word + 1));
  for (std::size_t s = 0; s < slot_words_.size(); ++s)
    if (slot_words_[s] >= 0) index_[static_cast<std::size_t>(slot_words_[s])].push_back(s);
  initialized_.assign(slot_words_.size(), 0);
  keys_ = Matrix<S>::Zero(static_cast<Index>(slot_words_.size()), key_dim);
  values_ = Matrix<S>::Zero(static_cast<Index>(slot_words_.size()), value_dim);
}

template <class S>
void MemoryStore<S>::update(std::size_t slot, const RowVector<S>& key, const RowVector<S>& value) {
  if (slot >= slot_words_.size())
    throw DataError("memory slot " + std::to_string(slot) + " out of range (" +
                    std::to_string(slot_words_.size()) + " slots)");
  keys_.row(static_cast<Index>(slot)) = key;
  values_.row(static_cast<Index>(slot)) = value;
  initialized_[slot] = 1;
}

template <class S>
std::span<const std::size_t> MemoryStore<S>::slots_of(int word) const {
  if (word < 0 || static_cast<std::size_t>(word) >= index_.size()) return {};
  return index_[static_cast<std::size_t>(word)];
}

template <class S>
std::vector<std::size_t> MemoryStore<S>::query(int word, std::size_t max_slots, Rng& rng,
                                               std::optional<std::size_t> exclude) const {
  std::vector<std::size_t> out;
  for (std::size_t s : slots_of(word))
    if (initialized_[s] && (!exclude || *exclude != s)) out.push_back(s);
  if (max_slots > 0 && out.size() > max_slots) {
    for (std::size_t i = 0; i < max_slots; ++i) {
      const auto j = i + uniform_index(rng, out.size() - i);
      std::swap(out[i], out[j]);
    }
    out.resize(max_slots);
    std::sort(out.begin(), out.end());
  }
  return out;
}

template <class S>
std::size_t MemoryStore<S>::initialized_count() const {
  return static_cast<std::size_t>(std::count(initialized_.begin(), initialized_.end(), std::uint8_t{1}));
}

template <class S>
void MemoryStore<S>::restore(Matrix<S> keys, Matrix<S> values, std::vector<std::uint8_t> initialized) {
  if (keys.rows() != keys_.rows() || values.rows() != values_.rows() || initialized.size() != initialized_.size())
    throw DataError("memory snapshot does not match slot count");
  keys_ = std::move(keys);
  values_ = std::move(values);
  initialized_ = std::move(initialized);
}

template <class S>
std::optional<MemoryResponse<S>> memory_response(const MemoryStore<S>& store, const RowVector<S>& query,
                                                 std::vector<std::size_t> slots, Compatibility kind) {
  if (slots.empty()) return std::nullopt;
  MemoryResponse<S> resp;
  resp.slots = std::move(slots);
  const auto t = static_cast<Index>(resp.slots.size());
  resp.scores.resize(t);
  for (Index j = 0; j < t; ++j)
    resp.scores(j) = compatibility(query, store.key(resp.slots[static_cast<std::size_t>(j)]), kind);
  resp.alpha = softmax<S>(resp.scores);
  resp.r = RowVector<S>::Zero(store.value_dim());
  for (Index j = 0; j < t; ++j) resp.r += resp.alpha(j) * store.value(resp.slots[static_cast<std::size_t>(j)]);
  return resp;
}

template <class S>
RowVector<S> memory_response_backward(const MemoryStore<S>& store, const RowVector<S>& query,
                                      const MemoryResponse<S>& response, const RowVector<S>& dr,
                                      Compatibility kind) {
  const auto t = static_cast<Index>(response.slots.size());
  Vector<S> dalpha(t);
  for (Index j = 0; j < t; ++j) dalpha(j) = dr.dot(store.value(response.slots[static_cast<std::size_t>(j)]));
  const Vector<S> du = softmax_backward<S>(response.alpha, dalpha);

  RowVector<S> dq = RowVector<S>::Zero(query.size());
  const S qn = query.norm();
  for (Index j = 0; j < t; ++j) {
    const auto key = store.key(response.slots[static_cast<std::size_t>(j)]);
    switch (kind) {
      case Compatibility::Dot: dq += du(j) * key; break;
      case Compatibility::ScaledDot: dq += du(j) / std::sqrt(static_cast<S>(query.size())) * key; break;
      case Compatibility::Cosine: {
        const S kn = key.norm();
        dq += du(j) * (key / (kn * qn) - response.scores(j) * query / (qn * qn));
        break;
      }
    }
  }
  return dq;
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
}

template <class S>
RowVector<S> fuse(const RowVector<S>& h, const RowVector<S>* r, double lambda) {
  check_lambda(lambda);
  if (!r) return h;
  const S l = static_cast<S>(lambda);
  return l * h + (S(1) - l) * (*r);
}

#define HCNER_INSTANTIATE_DOCMEM(S)                                                                           \
  template class MemoryStore<S>;                                                                              \
  template std::optional<MemoryResponse<S>> memory_response<S>(const MemoryStore<S>&, const RowVector<S>&,    \
                                                               std::vector<std::size_t>, Compatibility);      \
  template RowVector<S> memory_response_backward<S>(const MemoryStore<S>&, const RowVector<S>&,               \
                                                    const MemoryResponse<S>&, const RowVector<S>&,            \
                                                    Compatibility);                                           \
  template RowVector<S> fuse<S>(const RowVector<S>&, const RowVector<S>*, double);

HCNER_INSTANTIATE_DOCMEM(float)
HCNER_INSTANTIATE_DOCMEM(double)

}  // namespace hcner
