#include <doctest.h>

#include <sstream>

#include "hcner/sentrep.hpp"
#include "support.hpp"

using namespace hcner;
using support::MatD;

namespace {

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_conll(in);
}

}  // namespace

TEST_CASE("label embeddings average sampled word vectors") {
  const Corpus c = parse("rome B-LOC\nand O\nparis B-LOC\n\nanna B-PER\nrome B-LOC\n");
  const Vocab v = build_vocab(c, 1);
  Rng rng(1);
  Eigen::MatrixXf emb = Eigen::MatrixXf::Random(v.size(), 3);
  const std::vector<std::string> types{"LOC", "PER"};
  const auto l = init_label_embeddings(c, v, emb, types, 200, rng);
  REQUIRE(l.names == std::vector<std::string>{"LOC", "PER", "O"});
  // PER: one occurrence.
  CHECK((l.matrix.row(1) - emb.row(v.lookup("anna"))).norm() == 0.0f);
  // O: one occurrence.
  CHECK((l.matrix.row(2) - emb.row(v.lookup("and"))).norm() == 0.0f);
  // LOC: rome twice, paris once; every token is sampled.
  const Eigen::RowVectorXf mean = (2 * emb.row(v.lookup("rome")) + emb.row(v.lookup("paris"))) / 3;
  CHECK((l.matrix.row(0) - mean).norm() < 1e-6f);
}

TEST_CASE("label embeddings: two occurrences give their mean") {
  const Corpus c = parse("u B-ORG\nv B-ORG\nx O\n");
  const Vocab v = build_vocab(c, 1);
  Rng rng(2);
  Eigen::MatrixXf emb = Eigen::MatrixXf::Random(v.size(), 4);
  const std::vector<std::string> types{"ORG"};
  const auto l = init_label_embeddings(c, v, emb, types, 200, rng);
  CHECK((l.matrix.row(0) - (emb.row(v.lookup("u")) + emb.row(v.lookup("v"))) / 2).norm() < 1e-7f);
}

TEST_CASE("label embeddings: fifty tokens with a cap of 200 use all fifty") {
  // Letter-only names, since normalization zeroes digits.
  auto name = [](int i) { return std::string{'l', static_cast<char>('a' + i / 26), static_cast<char>('a' + i % 26)}; };
  std::string text;
  for (int i = 0; i < 50; ++i) text += name(i) + " B-LOC\nx O\n\n";
  const Corpus c = parse(text);
  const Vocab v = build_vocab(c, 1);
  Rng rng(3);
  Eigen::MatrixXf emb = Eigen::MatrixXf::Random(v.size(), 5);
  const std::vector<std::string> types{"LOC"};
  const auto l = init_label_embeddings(c, v, emb, types, 200, rng);
  Eigen::RowVectorXf mean = Eigen::RowVectorXf::Zero(5);
  for (int i = 0; i < 50; ++i) mean += emb.row(v.lookup(name(i)));
  mean /= 50;
  CHECK((l.matrix.row(0) - mean).norm() < 1e-6f);
}

TEST_CASE("label embeddings: a type with no tokens is an error") {
  const Corpus c = parse("x O\n");
  const Vocab v = build_vocab(c, 1);
  Rng rng(4);
  const std::vector<std::string> types{"PER"};
  CHECK_THROWS_AS(init_label_embeddings(c, v, Eigen::MatrixXf::Ones(v.size(), 2), types, 10, rng), DataError);
}

TEST_CASE("label confidence is cosine similarity") {
  MatD w(3, 2), l(2, 2);
  w << 1, 0, 0, 1, 2, 2;
  l << 1, 0, 1, 1;
  const MatD e = label_confidence<double>(w, l);
  CHECK(e(0, 0) == doctest::Approx(1.0));
  CHECK(e(1, 0) == doctest::Approx(0.0));
  CHECK(e(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(e(2, 1) == doctest::Approx(1.0));
  Rng rng(5);
  const MatD a = support::random_matrix(4, 3, rng), b = support::random_matrix(2, 3, rng);
  const MatD ab = label_confidence<double>(a, b);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 2; ++j) {
      const std::vector<double> ai(a.row(i).data(), a.row(i).data() + 3), bj(b.row(j).data(), b.row(j).data() + 3);
      CHECK(std::abs(ab(i, j) - support::naive_cosine(ai, bj)) < 1e-12);
    }
  CHECK_THROWS_AS(label_confidence<double>(MatD::Zero(1, 2), l), DataError);
}

TEST_CASE("window pooling") {
  Rng rng(6);
  const MatD e = support::random_matrix(4, 3, rng);
  RowVector<double> w1(1), b0 = RowVector<double>::Zero(3);
  w1 << 1.0;
  const Vector<double> m = window_pool<double>(e, w1, b0);
  for (Index i = 0; i < 4; ++i) CHECK(m(i) == e.row(i).maxCoeff());

  RowVector<double> w3 = support::random_matrix(1, 3, rng), b(2);
  b << 0.3, -1.0;
  const Vector<double> z = window_pool<double>(MatD::Zero(5, 2), w3, b);
  for (Index i = 0; i < 5; ++i) CHECK(z(i) == 0.3);

  const RowVector<double> bias = support::random_matrix(1, 3, rng);
  const Vector<double> got = window_pool<double>(e, w3, bias);
  const auto ref = support::naive_window_pool(e, {w3(0), w3(1), w3(2)}, {bias(0), bias(1), bias(2)});
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(got(i) - ref[static_cast<std::size_t>(i)]) < 1e-10);

  RowVector<double> even(2);
  even << 1, 1;
  CHECK_THROWS_AS(window_pool<double>(e, even, bias), ConfigError);
}

TEST_CASE("sentence attention") {
  Vector<double> m = Vector<double>::Constant(4, 0.7);
  const Vector<double> u = sentence_attention<double>(m);
  for (Index i = 0; i < 4; ++i) CHECK(u(i) == doctest::Approx(0.25));
  Vector<double> m2(2);
  m2 << std::log(2.0), 0.0;
  const Vector<double> beta = sentence_attention<double>(m2);
  CHECK(beta(0) == doctest::Approx(2.0 / 3));
  CHECK(beta(1) == doctest::Approx(1.0 / 3));
  const Vector<double> shifted = sentence_attention<double>(Vector<double>(m2.array() + 5.0));
  CHECK((shifted - beta).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sentence representation is the weighted sum of states") {
  MatD v(2, 2);
  v << 1, 2, 3, 4;
  Vector<double> beta(2);
  beta << 1, 0;
  CHECK(sentence_repr<double>(beta, v) == v.row(0));
  beta << 0.25, 0.75;
  const RowVector<double> s = sentence_repr<double>(beta, v);
  CHECK(s(0) == doctest::Approx(2.5));
  CHECK(s(1) == doctest::Approx(3.5));
  beta << 0.5, 0.5;
  CHECK(sentence_repr<double>(beta, v) == v.colwise().mean());
}

TEST_CASE("sentence encoder gradients, with and without the auxiliary loss") {
  for (auto mode : {SentenceMode::Mean, SentenceMode::LabelAttention}) {
    ParamRegistry<double> reg;
    Rng rng(7);
    const SentenceEncoder<double> enc(reg, "s", mode, 4, 6, 3, 4, 3, rng);
    const ParamId x = reg.add("x", support::random_matrix(5, 4, rng));
    const ParamId sim = reg.add("sim", support::random_matrix(5, 4, rng));
    const RowVector<double> r = support::random_matrix(1, 6, rng);
    const std::vector<int> labels{0, 1, 2, 2, 1};
    support::jitter(reg, rng);
    // Central differences carry about ulp(loss) / eps = 1e-11 of roundoff, and
    // some LSTM entries are near 1e-6, so small entries are compared absolutely.
    GradCheckOptions opt;
    opt.min_denominator = 1e-4;
    for (bool aux : {false, true}) {
      if (aux && mode == SentenceMode::Mean) continue;
      const auto rep = gradcheck<double>(
          [&](bool grad) {
            typename SentenceEncoder<double>::Cache cache;
            const auto s = enc.forward(reg, reg.value(x), reg.value(sim), cache);
            double loss = r.dot(s);
            MatD dconf = MatD::Zero(5, 3);
            if (aux) loss += enc.auxiliary_loss(cache, labels, dconf);
            if (grad) {
              MatD dx, dsim;
              enc.backward(reg, r, cache, dx, dsim, aux ? &dconf : nullptr);
              reg.grad(x) += dx;
              if (dsim.size()) reg.grad(sim) += dsim;
            }
            return loss;
          },
          reg, opt);
      INFO(rep.worst_param, " ", rep.worst_index, " ", rep.analytic, " ", rep.numeric);
      CHECK(rep.max_rel_error < 1e-6);
    }
  }
}

TEST_CASE("sentence mode and label input names") {
  CHECK(parse_sentence_mode("label-attn") == SentenceMode::LabelAttention);
  CHECK(to_string(SentenceMode::Mean) == "mean");
  CHECK(parse_label_input("joint") == LabelInput::Joint);
  CHECK_THROWS_AS(parse_sentence_mode("max"), ConfigError);
}
