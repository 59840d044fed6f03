#include <doctest.h>

#include "hcner/crf.hpp"
#include "support.hpp"

using namespace hcner;
using support::MatD;

TEST_CASE("sequence score") {
  MatD e(1, 3);
  e << 0.5, 2.0, -1.0;
  CHECK(score_sequence<double>(e, MatD::Zero(5, 5), std::vector<int>{1}) == 2.0);

  Rng rng(1);
  const MatD tr = support::random_matrix(5, 5, rng);
  const std::vector<int> y{2, 0, 1};
  const double chain = tr(3, 2) + tr(2, 0) + tr(0, 1) + tr(1, 4);
  CHECK(score_sequence<double>(MatD::Zero(3, 3), tr, y) == doctest::Approx(chain));

  const MatD e3 = support::random_matrix(3, 4, rng), t3 = support::random_matrix(6, 6, rng);
  const std::vector<int> y3{3, 1, 1};
  CHECK(std::abs(score_sequence<double>(e3, t3, y3) - support::path_score(e3, t3, y3)) < 1e-12);
  CHECK_THROWS_AS(score_sequence<double>(e3, t3, std::vector<int>{1, 1}), DataError);
}

TEST_CASE("log partition") {
  Rng rng(2);
  MatD e = support::random_matrix(1, 3, rng);
  CHECK(log_partition<double>(e, MatD::Zero(5, 5)) == doctest::Approx(logsumexp<double>(e.row(0).transpose())));

  const MatD e2 = support::random_matrix(2, 2, rng), t2 = support::random_matrix(4, 4, rng);
  CHECK(std::abs(log_partition<double>(e2, t2) - support::enumerate_crf(e2, t2).log_z) < 1e-10);

  MatD e4 = support::random_matrix(4, 3, rng);
  const MatD t4 = support::random_matrix(5, 5, rng);
  const double before = log_partition<double>(e4, t4);
  e4.row(2).array() += 1.75;
  CHECK(log_partition<double>(e4, t4) - before == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("negative log likelihood") {
  MatD e = MatD::Zero(3, 3);
  const std::vector<int> gold{1, 0, 2};
  for (Index i = 0; i < 3; ++i) e(i, gold[static_cast<std::size_t>(i)]) = 50;
  const auto sure = nll_loss<double>(e, MatD::Zero(5, 5), gold);
  CHECK(sure.loss >= 0);
  CHECK(sure.loss < 1e-15);

  const auto uniform = nll_loss<double>(MatD::Zero(1, 4), MatD::Zero(6, 6), std::vector<int>{2});
  CHECK(uniform.loss == doctest::Approx(std::log(4.0)));

  Rng rng(3);
  const MatD er = support::random_matrix(4, 3, rng), tr = support::random_matrix(5, 5, rng);
  const std::vector<int> y{0, 2, 2, 1};
  const auto ref = support::enumerate_crf(er, tr);
  const double expected = ref.log_z - support::path_score(er, tr, y);
  CHECK(std::abs(nll_loss<double>(er, tr, y).loss - expected) < 1e-10);
}

TEST_CASE("marginals match enumeration") {
  Rng rng(4);
  const MatD e = support::random_matrix(4, 3, rng), tr = support::random_matrix(5, 5, rng);
  const auto m = crf_marginals<double>(e, tr);
  const auto ref = support::enumerate_crf(e, tr);
  CHECK((m.unary - ref.marginals).cwiseAbs().maxCoeff() < 1e-12);
  for (Index i = 0; i < 4; ++i) CHECK(m.unary.row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("crf gradients") {
  ParamRegistry<double> reg;
  Rng rng(5);
  const ParamId e = reg.add("e", support::random_matrix(5, 4, rng));
  const ParamId t = reg.add("t", support::random_matrix(6, 6, rng));
  const std::vector<int> y{1, 1, 0, 3, 2};
  const auto rep = gradcheck<double>(
      [&](bool grad) {
        const auto l = nll_loss<double>(reg.value(e), reg.value(t), y);
        if (grad) reg.grad(e) += l.d_emissions, reg.grad(t) += l.d_transitions;
        return l.loss;
      },
      reg);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("viterbi") {
  MatD e(3, 3);
  e << 5, 0, 1, 0, 0, 5, 1, 5, 0;
  const auto v = viterbi<double>(e, MatD::Zero(5, 5));
  CHECK(v.path == std::vector<int>{0, 2, 1});
  CHECK(v.score == 15.0);

  MatD one(1, 4);
  one << 0.1, 0.3, 2.0, -1.0;
  CHECK(viterbi<double>(one, MatD::Zero(6, 6)).path == std::vector<int>{2});

  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 6)), p = 1 + static_cast<int>(uniform_index(rng, 5));
    const MatD ei = support::random_matrix(n, p, rng), ti = support::random_matrix(p + 2, p + 2, rng);
    const auto ref = support::enumerate_crf(ei, ti);
    const auto got = viterbi<double>(ei, ti);
    CHECK(got.path == ref.best);
    CHECK(got.score == ref.best_score);
  }
}

TEST_CASE("transition init forbids invalid bigrams") {
  const TagSet tags({"LOC"}, TagScheme::BIO);
  const MatD tr = crf_transition_init<double>(tags);
  const int o = tags.id("O"), b = tags.id("B-LOC"), i = tags.id("I-LOC");
  CHECK(tr(o, i) == kForbiddenTransition);
  CHECK(tr(crf_start(3), i) == kForbiddenTransition);
  CHECK(tr(b, i) == 0.0);
  CHECK(tr(o, b) == 0.0);
  // With these transitions Viterbi never emits a stray I-.
  MatD e = MatD::Zero(2, 3);
  e(0, o) = 1;
  e(1, i) = 5;
  const auto path = viterbi<double>(e, tr).path;
  const bool stray = path[1] == i && path[0] == o;
  CHECK_FALSE(stray);
}
