#include "hcner/crf.hpp"

#include <cmath>
#include <limits>

namespace hcner {

namespace {

template <class S>
void check_shapes(const Matrix<S>& emissions, const Matrix<S>& transitions) {
  const Index p = emissions.cols();
  if (emissions.rows() == 0) throw DataError("CRF: empty sequence");
  if (transitions.rows() != p + 2 || transitions.cols() != p + 2)
    throw DataError("CRF: transition matrix must be (P+2) x (P+2)");
}

// alpha(t, a): log-sum of all prefixes ending in tag a at position t.
template <class S>
Matrix<S> forward_scores(const Matrix<S>& e, const Matrix<S>& tr) {
  const Index n = e.rows(), p = e.cols();
  Matrix<S> alpha(n, p);
  alpha.row(0) = tr.row(crf_start(p)).head(p) + e.row(0);
  Vector<S> tmp(p);
  for (Index t = 1; t < n; ++t)
    for (Index b = 0; b < p; ++b) {
      tmp = alpha.row(t - 1).transpose() + tr.col(b).head(p);
      alpha(t, b) = logsumexp<S>(tmp) + e(t, b);
    }
  return alpha;
}

// beta(t, a): log-sum of all suffixes after tag a at position t, END included.
template <class S>
Matrix<S> backward_scores(const Matrix<S>& e, const Matrix<S>& tr) {
  const Index n = e.rows(), p = e.cols();
  Matrix<S> beta(n, p);
  beta.row(n - 1) = tr.col(crf_end(p)).head(p).transpose();
  Vector<S> tmp(p);
  for (Index t = n - 2; t >= 0; --t)
    for (Index a = 0; a < p; ++a) {
      tmp = tr.row(a).head(p).transpose() + e.row(t + 1).transpose() + beta.row(t + 1).transpose();
      beta(t, a) = logsumexp<S>(tmp);
    }
  return beta;
}

}  // namespace

template <class S>
Matrix<S> crf_transition_init(const TagSet& tags) {
  const Index p = tags.size();
  Matrix<S> tr = Matrix<S>::Zero(p + 2, p + 2);
  const S forbidden = static_cast<S>(kForbiddenTransition);
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < p; ++b)
      if (!tags.allowed(static_cast<int>(a), static_cast<int>(b))) tr(a, b) = forbidden;
    if (!tags.allowed_start(static_cast<int>(a))) tr(crf_start(p), a) = forbidden;
    if (!tags.allowed_end(static_cast<int>(a))) tr(a, crf_end(p)) = forbidden;
  }
  return tr;
}

template <class S>
S score_sequence(const Matrix<S>& emissions, const Matrix<S>& transitions, std::span<const int> tags) {
  check_shapes(emissions, transitions);
  const Index n = emissions.rows(), p = emissions.cols();
  if (static_cast<Index>(tags.size()) != n) throw DataError("CRF: tag sequence length does not match emissions");
  S score = transitions(crf_start(p), tags[0]);
  for (Index i = 0; i < n; ++i) {
    const int y = tags[static_cast<std::size_t>(i)];
    if (y < 0 || y >= p) throw DataError("CRF: tag id out of range");
    score += emissions(i, y);
    if (i + 1 < n) score += transitions(y, tags[static_cast<std::size_t>(i + 1)]);
  }
  score += transitions(tags[static_cast<std::size_t>(n - 1)], crf_end(p));
  return score;
}

template <class S>
S log_partition(const Matrix<S>& emissions, const Matrix<S>& transitions) {
  check_shapes(emissions, transitions);
  const Index p = emissions.cols();
  const Matrix<S> alpha = forward_scores(emissions, transitions);
  const Vector<S> last = alpha.row(alpha.rows() - 1).transpose() + transitions.col(crf_end(p)).head(p);
  return logsumexp<S>(last);
}

template <class S>
CrfMarginals<S> crf_marginals(const Matrix<S>& emissions, const Matrix<S>& transitions) {
  check_shapes(emissions, transitions);
  const Index n = emissions.rows(), p = emissions.cols();
  const Matrix<S> alpha = forward_scores(emissions, transitions);
  const Matrix<S> beta = backward_scores(emissions, transitions);

  CrfMarginals<S> m;
  const Vector<S> last = alpha.row(n - 1).transpose() + transitions.col(crf_end(p)).head(p);
  m.log_z = logsumexp<S>(last);
  m.unary = (alpha + beta).array() - m.log_z;
  m.unary = m.unary.array().exp();

  m.transitions = Matrix<S>::Zero(p + 2, p + 2);
  m.transitions.row(crf_start(p)).head(p) = m.unary.row(0);
  m.transitions.col(crf_end(p)).head(p) = m.unary.row(n - 1).transpose();
  for (Index t = 0; t + 1 < n; ++t)
    for (Index a = 0; a < p; ++a)
      for (Index b = 0; b < p; ++b)
        m.transitions(a, b) +=
            std::exp(alpha(t, a) + transitions(a, b) + emissions(t + 1, b) + beta(t + 1, b) - m.log_z);
  return m;
}

template <class S>
CrfLoss<S> nll_loss(const Matrix<S>& emissions, const Matrix<S>& transitions, std::span<const int> gold) {
  const S gold_score = score_sequence(emissions, transitions, gold);
  CrfMarginals<S> m = crf_marginals(emissions, transitions);
  const Index n = emissions.rows(), p = emissions.cols();

  CrfLoss<S> out;
  out.loss = m.log_z - gold_score;
  out.d_emissions = std::move(m.unary);
  out.d_transitions = std::move(m.transitions);
  for (Index i = 0; i < n; ++i) out.d_emissions(i, gold[static_cast<std::size_t>(i)]) -= S(1);
  out.d_transitions(crf_start(p), gold[0]) -= S(1);
  for (Index i = 0; i + 1 < n; ++i)
    out.d_transitions(gold[static_cast<std::size_t>(i)], gold[static_cast<std::size_t>(i + 1)]) -= S(1);
  out.d_transitions(gold[static_cast<std::size_t>(n - 1)], crf_end(p)) -= S(1);
  return out;
}

template <class S>
ViterbiResult<S> viterbi(const Matrix<S>& emissions, const Matrix<S>& transitions) {
  check_shapes(emissions, transitions);
  const Index n = emissions.rows(), p = emissions.cols();
  Matrix<S> best(n, p);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, p);
  best.row(0) = transitions.row(crf_start(p)).head(p) + emissions.row(0);
  for (Index t = 1; t < n; ++t)
    for (Index b = 0; b < p; ++b) {
      S top = -std::numeric_limits<S>::infinity();
      int arg = 0;
      for (Index a = 0; a < p; ++a) {
        const S s = best(t - 1, a) + transitions(a, b);
        if (s > top) {
          top = s;
          arg = static_cast<int>(a);
        }
      }
      best(t, b) = top + emissions(t, b);
      back(t, b) = arg;
    }

  ViterbiResult<S> r;
  S top = -std::numeric_limits<S>::infinity();
  int last = 0;
  for (Index a = 0; a < p; ++a) {
    const S s = best(n - 1, a) + transitions(a, crf_end(p));
    if (s > top) {
      top = s;
      last = static_cast<int>(a);
    }
  }
  r.path.resize(static_cast<std::size_t>(n));
  r.path.back() = last;
  for (Index t = n - 1; t > 0; --t)
    r.path[static_cast<std::size_t>(t - 1)] = back(t, r.path[static_cast<std::size_t>(t)]);
  // Recomputed along the path so the reported score is exactly score_sequence.
  r.score = score_sequence(emissions, transitions, r.path);
  return r;
}

#define HCNER_INSTANTIATE_CRF(S)                                                                   \
  template Matrix<S> crf_transition_init<S>(const TagSet&);                                        \
  template S score_sequence<S>(const Matrix<S>&, const Matrix<S>&, std::span<const int>);          \
  template S log_partition<S>(const Matrix<S>&, const Matrix<S>&);                                 \
  template CrfMarginals<S> crf_marginals<S>(const Matrix<S>&, const Matrix<S>&);                   \
  template CrfLoss<S> nll_loss<S>(const Matrix<S>&, const Matrix<S>&, std::span<const int>);       \
  template ViterbiResult<S> viterbi<S>(const Matrix<S>&, const Matrix<S>&);

HCNER_INSTANTIATE_CRF(float)
HCNER_INSTANTIATE_CRF(double)

}  // namespace hcner
