#pragma once

#include <span>
#include <vector>

#include "hcner/corpus.hpp"
#include "hcner/nn.hpp"

namespace hcner {

// Transition matrices are (P + 2) x (P + 2), indexed [from, to], with two
// virtual tags: START (row P) and END (column P + 1).
inline Index crf_start(Index tags) { return tags; }
inline Index crf_end(Index tags) { return tags + 1; }

// Zero transitions, with kForbidden on bigrams the tag scheme rules out.
inline constexpr double kForbiddenTransition = -10000.0;

template <class S>
Matrix<S> crf_transition_init(const TagSet& tags);

// Sum of emissions along `tags` plus N + 1 transitions (START -> y_1 ... y_N -> END).
template <class S>
S score_sequence(const Matrix<S>& emissions, const Matrix<S>& transitions, std::span<const int> tags);

// log of the sum of exp(score) over all P^N sequences (forward algorithm).
template <class S>
S log_partition(const Matrix<S>& emissions, const Matrix<S>& transitions);

template <class S>
struct CrfMarginals {
  S log_z = 0;
  Matrix<S> unary;        // N x P, P(y_i = a)
  Matrix<S> transitions;  // expected transition counts, same shape as the parameters
};

template <class S>
CrfMarginals<S> crf_marginals(const Matrix<S>& emissions, const Matrix<S>& transitions);

template <class S>
struct CrfLoss {
  S loss = 0;
  Matrix<S> d_emissions;
  Matrix<S> d_transitions;
};

// log Z - score(gold) and its gradients.
template <class S>
CrfLoss<S> nll_loss(const Matrix<S>& emissions, const Matrix<S>& transitions, std::span<const int> gold);

template <class S>
struct ViterbiResult {
  std::vector<int> path;
  S score = 0;
};

// Highest-scoring path; ties go to the lowest tag index.
template <class S>
ViterbiResult<S> viterbi(const Matrix<S>& emissions, const Matrix<S>& transitions);

}  // namespace hcner
