#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "wvo/errors.hpp"
#include "wvo/families.hpp"
#include "wvo/numeric.hpp"
#include "wvo/objective.hpp"

using namespace wvo;
using namespace wvo::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kRandomContexts = 50;
constexpr double kGradTol = 1e-5;

SingleLevelContext random_single(Rng& rng, Eigen::Index S, Eigen::Index N) {
  return SingleLevelContext(random_matrix(rng, S, N, -1.0, 0.7), random_matrix(rng, S, 1, -4.0, 1.0).col(0),
                            static_cast<double>(N));
}

MultiLevelContext random_multi(Rng& rng, Eigen::Index S, std::size_t K, Eigen::Index M) {
  std::vector<MatrixXd> Lz;
  for (std::size_t k = 0; k < K; ++k) Lz.push_back(random_matrix(rng, S, M, -2.0, 1.5));
  return MultiLevelContext(std::move(Lz), random_matrix(rng, S, 1, -6.0, 1.0).col(0), static_cast<double>(K));
}

/// Reference value by the direct formula with plain loops.
double direct_single(const MatrixXd& L, const VectorXd& base, const VectorXd& w) {
  const auto S = L.rows();
  std::vector<double> f(static_cast<std::size_t>(S)), shifted(f.size());
  double mean = 0.0;
  for (Eigen::Index s = 0; s < S; ++s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < L.cols(); ++i) acc += w[i] * L(s, i);
    f[static_cast<std::size_t>(s)] = acc;
    shifted[static_cast<std::size_t>(s)] = acc - base[s];
    mean += acc / static_cast<double>(S);
  }
  return mean - logsumexp(shifted);
}

}  // namespace

TEST_SUITE("objective") {
  TEST_CASE("hand computed two by two objective") {
    const double h = std::log(0.5);
    const SingleLevelContext ctx(MatrixXd::Constant(2, 2, h), VectorXd::Constant(2, std::log(0.25)), 2.0);
    const auto t = objective_single(ctx, VectorXd::Ones(2));
    CHECK(t.value == doctest::Approx(-2.07944).epsilon(1e-5));
    CHECK(t.value == doctest::Approx(2.0 * h - std::log(2.0)).epsilon(1e-14));
    CHECK(t.fit == doctest::Approx(2.0 * h));
    CHECK(t.normaliser == doctest::Approx(std::log(2.0)));
  }

  TEST_CASE("identity virtual set gives a normaliser of exactly log S") {
    const NormalNoninformative f;
    const auto ys = values({-0.56, 0.81, -0.40, 1.10, -0.8, -0.35, -1.65, -0.37, -0.20, 2.49});
    Rng rng = make_rng(3, 0);
    std::vector<std::vector<double>> rows;
    for (int s = 0; s < 37; ++s) rows.push_back({draw_normal(rng, 0.0, 0.5), draw_normal(rng, 0.0, 0.3)});
    const auto samples = from_rows(rows, f.latent_names());
    const auto ctx = build_single_context(f, samples, ys, ys);
    for (Eigen::Index s = 0; s < ctx.L().rows(); ++s) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < ctx.L().cols(); ++i) acc += ctx.L()(s, i);
      CHECK(acc == ctx.base()[s]);
    }
    const auto t = objective_single(ctx, VectorXd::Ones(10));
    CHECK(t.normaliser == std::log(37.0));
    CHECK(t.value == doctest::Approx(ctx.base().mean() - std::log(37.0)).epsilon(1e-14));
    CHECK(ctx.budget() == 10.0);
  }

  TEST_CASE("context entries are pointwise likelihoods") {
    const BetaBernoulli bb;
    const auto bctx = build_single_context(bb, from_rows({{0.0}}, bb.latent_names()), binary({1, 0}), binary({1, 0, 1}));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(bctx.L()(0, i) == doctest::Approx(std::log(0.5)));

    const NormalNoninformative normal;
    const auto nctx =
        build_single_context(normal, from_rows({{0.0, 0.0}}, normal.latent_names()), values({1.0}), values({0.0}));
    CHECK(nctx.L()(0, 0) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  }

  TEST_CASE("known beta-bernoulli optimum beats uniform weights") {
    const BetaBernoulli f;
    const auto observed = binary({1, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1});
    const auto virtual_obs = binary({0, 1, 1, 0, 0, 1, 0, 1, 0, 0, 0, 1});
    const auto samples = beta_samples(9.0, 5.0, 5000, 1);
    const auto ctx = build_single_context(f, samples, observed, virtual_obs);
    VectorXd known(12);
    for (int i = 0; i < 12; ++i) known[i] = virtual_obs[i].value == 1.0 ? 8.0 / 5.0 : 4.0 / 7.0;
    CHECK(known.sum() == doctest::Approx(12.0));
    CHECK(objective_single(ctx, known).value >= objective_single(ctx, VectorXd::Ones(12)).value);
  }

  TEST_CASE("gradient vanishes when likelihoods do not depend on the sample") {
    Rng rng = make_rng(5, 0);
    MatrixXd L(20, 5);
    const VectorXd row = random_matrix(rng, 1, 5, -1.0, 1.0).row(0);
    for (Eigen::Index s = 0; s < 20; ++s) L.row(s) = row;
    const SingleLevelContext ctx(L, VectorXd::Constant(20, -3.0), 5.0);
    const auto g = grad_single(ctx, random_weights(rng, 5, 0.1, 2.0));
    CHECK(g.cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("one sample makes the gradient identically zero") {
    Rng rng = make_rng(6, 0);
    const SingleLevelContext ctx(random_matrix(rng, 1, 4, -1.0, 1.0), VectorXd::Constant(1, -2.0), 4.0);
    const auto g = grad_single(ctx, random_weights(rng, 4, 0.1, 2.0));
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("single-level gradient matches finite differences") {
    Rng rng = make_rng(7, 0);
    for (int rep = 0; rep < kRandomContexts; ++rep) {
      const auto ctx = random_single(rng, 20, 5);
      const VectorXd w = random_weights(rng, 5, 0.2, 2.0);
      const auto g = grad_single(ctx, w);
      const auto f = [&](const VectorXd& x) { return objective_single(ctx, x).value; };
      for (Eigen::Index i = 0; i < 5; ++i) CHECK(rel_error(g[i], central_difference(f, w, i)) < kGradTol);
    }
  }

  TEST_CASE("objective agrees with the direct formula") {
    Rng rng = make_rng(8, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto ctx = random_single(rng, 30, 6);
      const VectorXd w = random_weights(rng, 6, 0.0, 2.0);
      CHECK(objective_single(ctx, w).value == doctest::Approx(direct_single(ctx.L(), ctx.base(), w)).epsilon(1e-12));
    }
  }

  TEST_CASE("minus infinity likelihoods with zero weight contribute nothing") {
    MatrixXd L(3, 2);
    L << -1.0, kNegInf, -2.0, -0.5, -0.3, -1.5;
    const SingleLevelContext ctx(L, VectorXd::Constant(3, -1.0), 2.0);
    VectorXd w(2);
    w << 2.0, 0.0;
    const SingleLevelContext ref(L.col(0), VectorXd::Constant(3, -1.0), 2.0);
    CHECK(objective_single(ctx, w).value == objective_single(ref, VectorXd::Constant(1, 2.0)).value);
  }

  TEST_CASE("all-zero weighted evidence is a degenerate context") {
    const SingleLevelContext ctx(MatrixXd::Constant(3, 1, kNegInf), VectorXd::Zero(3), 1.0);
    CHECK_THROWS_AS(objective_single(ctx, VectorXd::Ones(1)), DegenerateContextError);
    CHECK_THROWS_AS(grad_single(ctx, VectorXd::Ones(1)), DegenerateContextError);
  }

  TEST_CASE("single-level argument checks") {
    Rng rng = make_rng(9, 0);
    const auto ctx = random_single(rng, 5, 3);
    CHECK_THROWS_AS(objective_single(ctx, VectorXd::Ones(2)), UsageError);
    VectorXd bad = VectorXd::Ones(3);
    bad[1] = -0.5;
    CHECK_THROWS_AS(objective_single(ctx, bad), UsageError);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(grad_single(ctx, bad), UsageError);
    MatrixXd nan_L = MatrixXd::Zero(2, 2);
    nan_L(0, 1) = std::nan("");
    CHECK_THROWS_AS(SingleLevelContext(nan_L, VectorXd::Zero(2), 2.0), UsageError);
    CHECK_THROWS_AS(SingleLevelContext(MatrixXd::Zero(2, 2), VectorXd::Zero(3), 2.0), UsageError);
    CHECK_THROWS_AS(SingleLevelContext(MatrixXd::Zero(2, 2), VectorXd::Zero(2), 0.0), UsageError);
    const EightSchools es;
    CHECK_THROWS_AS(build_single_context(es, from_rows({{0.0, 0.0}}, es.latent_names()), values({1.0}), values({1.0})),
                    UsageError);
  }

  TEST_CASE("shifting every base entry shifts each objective by the constant") {
    Rng rng = make_rng(10, 0);
    const double c = 3.25;
    const auto single = random_single(rng, 15, 4);
    const SingleLevelContext shifted(single.L(), single.base().array() + c, single.budget());
    const VectorXd w = random_weights(rng, 4, 0.1, 2.0);
    CHECK(objective_single(shifted, w).value == doctest::Approx(objective_single(single, w).value + c).epsilon(1e-13));

    const auto multi = random_multi(rng, 15, 3, 4);
    const MultiLevelContext mshift(multi.Lz(), multi.base().array() + c, multi.budget());
    const VectorXd v = random_weights(rng, 3, 0.2, 1.5);
    std::vector<VectorXd> ws;
    for (int k = 0; k < 3; ++k) ws.push_back(random_weights(rng, 4, 0.1, 1.0));
    CHECK(objective_multi(mshift, v, ws).value == doctest::Approx(objective_multi(multi, v, ws).value + c).epsilon(1e-13));
  }

  TEST_CASE("permuting virtual observations with their weights changes nothing") {
    Rng rng = make_rng(11, 0);
    const auto ctx = random_single(rng, 25, 6);
    const VectorXd w = random_weights(rng, 6, 0.1, 2.0);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd L(25, 6);
    VectorXd wp(6);
    for (int i = 0; i < 6; ++i) {
      L.col(i) = ctx.L().col(perm[i]);
      wp[i] = w[perm[i]];
    }
    // sums of three or more terms are not associative in floating point, so compare to rounding
    const SingleLevelContext permuted(L, ctx.base(), ctx.budget());
    CHECK(objective_single(permuted, wp).value == doctest::Approx(objective_single(ctx, w).value).epsilon(1e-14));

    const auto multi = random_multi(rng, 25, 3, 4);
    const VectorXd v = random_weights(rng, 3, 0.2, 1.5);
    std::vector<VectorXd> ws;
    for (int k = 0; k < 3; ++k) ws.push_back(random_weights(rng, 4, 0.1, 1.0));
    std::vector<MatrixXd> Lz{multi.Lz()[2], multi.Lz()[0], multi.Lz()[1]};
    std::vector<VectorXd> wsp{ws[2], ws[0], ws[1]};
    VectorXd vp(3);
    vp << v[2], v[0], v[1];
    const MultiLevelContext mperm(Lz, multi.base(), multi.budget());
    CHECK(objective_multi(mperm, vp, wsp).value == doctest::Approx(objective_multi(multi, v, ws).value).epsilon(1e-14));
  }

  TEST_CASE("K=1 objective with a single virtual value") {
    Rng rng = make_rng(12, 0);
    const MatrixXd Lz = random_matrix(rng, 20, 1, -2.0, 1.0);
    const VectorXd base = random_matrix(rng, 20, 1, -5.0, 1.0).col(0);
    const MultiLevelContext ctx({Lz}, base, 1.0);
    VectorXd shifted = Lz.col(0) - base;
    const double expected = Lz.col(0).mean() - logsumexp({shifted.data(), static_cast<std::size_t>(shifted.size())});
    CHECK(objective_k1(ctx, VectorXd::Ones(1)).value == doctest::Approx(expected).epsilon(1e-14));
  }

  TEST_CASE("K=1 objective ignores weights when the mixture collapses") {
    Rng rng = make_rng(13, 0);
    const VectorXd col = random_matrix(rng, 20, 1, -2.0, 1.0).col(0);
    MatrixXd Lz(20, 4);
    for (int i = 0; i < 4; ++i) Lz.col(i) = col;
    const MultiLevelContext ctx({Lz}, random_matrix(rng, 20, 1, -5.0, 1.0).col(0), 1.0);
    const VectorXd w1 = VectorXd::Constant(4, 0.25);
    VectorXd w2(4);
    w2 << 0.7, 0.1, 0.1, 0.1;
    CHECK(objective_k1(ctx, w1).value == doctest::Approx(objective_k1(ctx, w2).value).epsilon(1e-13));
    const auto g = grad_k1(ctx, w2);
    for (int i = 1; i < 4; ++i) CHECK(g[i] == doctest::Approx(g[0]).epsilon(1e-12));
  }

  TEST_CASE("K=1 gradient matches finite differences") {
    Rng rng = make_rng(14, 0);
    for (int rep = 0; rep < kRandomContexts; ++rep) {
      const auto ctx = random_multi(rng, 20, 1, 4);
      VectorXd w = random_weights(rng, 4, 0.1, 1.0);
      w /= w.sum();
      const auto g = grad_k1(ctx, w);
      const auto f = [&](const VectorXd& x) { return objective_k1(ctx, x).value; };
      for (Eigen::Index i = 0; i < 4; ++i) CHECK(rel_error(g[i], central_difference(f, w, i)) < kGradTol);
    }
  }

  TEST_CASE("K=1 weight rules") {
    Rng rng = make_rng(15, 0);
    const auto ctx = random_multi(rng, 10, 1, 3);
    VectorXd w(3);
    w << 0.0, 1.0, 0.0;
    CHECK(std::isfinite(objective_k1(ctx, w).value));
    CHECK_THROWS_AS(objective_k1(ctx, VectorXd::Zero(3)), UsageError);
    const auto two = random_multi(rng, 10, 2, 3);
    CHECK_THROWS_AS(objective_k1(two, VectorXd::Ones(3)), UsageError);
  }

  TEST_CASE("multi-level objective with one group reduces to K=1 exactly") {
    Rng rng = make_rng(16, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto ctx = random_multi(rng, 20, 1, 5);
      VectorXd w = random_weights(rng, 5, 0.0, 1.0);
      w /= w.sum();
      CHECK(objective_multi(ctx, VectorXd::Ones(1), {w}).value == objective_k1(ctx, w).value);
    }
  }

  TEST_CASE("identical groups depend on v only through its sum") {
    Rng rng = make_rng(17, 0);
    const MatrixXd Lz = random_matrix(rng, 20, 4, -2.0, 1.0);
    const MultiLevelContext ctx({Lz, Lz, Lz}, random_matrix(rng, 20, 1, -5.0, 1.0).col(0), 3.0);
    const VectorXd w = VectorXd::Constant(4, 0.25);
    VectorXd v1(3), v2(3);
    v1 << 1.0, 1.0, 1.0;
    v2 << 2.5, 0.3, 0.2;
    CHECK(objective_multi(ctx, v1, {w, w, w}).value == doctest::Approx(objective_multi(ctx, v2, {w, w, w}).value).epsilon(1e-12));
    const auto g = grad_multi(ctx, v2, {w, w, w});
    CHECK(g.v[1] == doctest::Approx(g.v[0]).epsilon(1e-12));
    CHECK(g.v[2] == doctest::Approx(g.v[0]).epsilon(1e-12));
  }

  TEST_CASE("multi-level gradient matches finite differences") {
    Rng rng = make_rng(18, 0);
    for (int rep = 0; rep < kRandomContexts; ++rep) {
      const auto ctx = random_multi(rng, 20, 3, 4);
      VectorXd v = random_weights(rng, 3, 0.2, 1.5);
      v *= 3.0 / v.sum();
      std::vector<VectorXd> ws;
      for (int k = 0; k < 3; ++k) {
        ws.push_back(random_weights(rng, 4, 0.1, 1.0));
        ws.back() /= ws.back().sum();
      }
      const auto g = grad_multi(ctx, v, ws);
      const auto fv = [&](const VectorXd& x) { return objective_multi(ctx, x, ws).value; };
      for (Eigen::Index k = 0; k < 3; ++k) CHECK(rel_error(g.v[k], central_difference(fv, v, k)) < kGradTol);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto fw = [&](const VectorXd& x) {
          auto copy = ws;
          copy[k] = x;
          return objective_multi(ctx, v, copy).value;
        };
        for (Eigen::Index i = 0; i < 4; ++i) CHECK(rel_error(g.w[k][i], central_difference(fw, ws[k], i)) < kGradTol);
      }
    }
  }

  TEST_CASE("mixture terms match a direct logsumexp") {
    Rng rng = make_rng(19, 0);
    const auto ctx = random_multi(rng, 8, 2, 5);
    VectorXd w = random_weights(rng, 5, 0.0, 1.0);
    w[2] = 0.0;
    const auto m = ctx.mixture(1, w);
    const auto resp = ctx.mixture_responsibility(1, w);
    for (Eigen::Index s = 0; s < 8; ++s) {
      std::vector<double> terms;
      for (Eigen::Index i = 0; i < 5; ++i) terms.push_back(std::log(w[i]) + ctx.Lz()[1](s, i));
      CHECK(m[s] == doctest::Approx(logsumexp(terms)).epsilon(1e-13));
      for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(resp(s, i) == doctest::Approx(std::exp(ctx.Lz()[1](s, i) - m[s])).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("multi-level argument checks") {
    Rng rng = make_rng(20, 0);
    const auto ctx = random_multi(rng, 6, 2, 3);
    const VectorXd w = VectorXd::Constant(3, 1.0 / 3.0);
    CHECK_THROWS_AS(objective_multi(ctx, VectorXd::Ones(2), {w}), UsageError);
    CHECK_THROWS_AS(objective_multi(ctx, VectorXd::Ones(3), {w, w}), UsageError);
    CHECK_THROWS_AS(objective_multi(ctx, VectorXd::Ones(2), {w, VectorXd::Zero(3)}), UsageError);
    CHECK_THROWS_AS(MultiLevelContext({}, VectorXd::Zero(3), 1.0), UsageError);
    CHECK_THROWS_AS(MultiLevelContext({MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 3)}, VectorXd::Zero(3), 2.0), UsageError);
    CHECK_THROWS_AS(MultiLevelContext({MatrixXd::Zero(4, 2)}, VectorXd::Zero(3), 1.0), UsageError);
  }

  TEST_CASE("multi-level context entries are group densities and table sums") {
    const EightSchools f;
    GroupedData data;
    data.labels = {"a", "b"};
    data.groups = {{{28.0, 15.0}}, {{8.0, 10.0}}};
    const auto samples = from_rows({{1.0, 0.5}, {-2.0, 1.5}, {4.0, 2.0}}, f.latent_names());
    GroupLikTable table;
    table.log_lik = MatrixXd(3, 2);
    table.log_lik << -3.0, -4.0, -5.0, -6.0, -7.0, kNegInf;
    table.forward_draws = 10;
    const std::vector<std::vector<std::vector<double>>> groups{{{1.0}, {2.0}}, {{-1.0}, {0.5}}};
    const auto ctx = build_multi_context(f, samples, table, groups, 2.0);
    CHECK(ctx.base()[0] == -7.0);
    CHECK(ctx.base()[2] == kNegInf);
    CHECK(ctx.Lz()[1](1, 0) == doctest::Approx(f.group_log_density(std::vector<double>{-1.0}, samples.row(1))));
    const std::vector<std::vector<std::vector<double>>> ragged{{{1.0}, {2.0}}, {{-1.0}}};
    CHECK_THROWS_AS(build_multi_context(f, samples, table, ragged, 2.0), UsageError);
  }
}
