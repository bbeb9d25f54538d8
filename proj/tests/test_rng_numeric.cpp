#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "sfuse/numeric.hpp"
#include "sfuse/rng.hpp"

using namespace sfuse;

TEST_CASE("rng streams are deterministic and decorrelated", "[rng]") {
  RngStream a(42, 1, 2, 3);
  RngStream b(42, 1, 2, 3);
  RngStream c(42, 1, 2, 4);
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    CHECK(ua == b.uniform());
    CHECK(ua > 0.0);
    CHECK(ua < 1.0);
  }
  // a and c share the seed but not the stream key; values must differ
  RngStream a2(42, 1, 2, 3);
  int same = 0;
  for (int i = 0; i < 100; ++i)
    if (a2.uniform() == c.uniform()) ++same;
  CHECK(same == 0);
}

TEST_CASE("normal and uniform sample moments", "[rng]") {
  RngStream rng(7);
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double z = rng.normal();
    su += u;
    su2 += u * u;
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 0.005);
  CHECK(std::abs(su2 / n - 1.0 / 3.0) < 0.005);
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(std::abs(sn2 / n - 1.0) < 0.02);
}

TEST_CASE("normal samples pass a KS test", "[rng]") {
  RngStream rng(8);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.normal();
  const double d = oracle::ks_statistic(xs, oracle::standard_normal_cdf);
  CHECK(d < 1.63 / std::sqrt(10000.0));  // alpha = 0.01 critical value
}

TEST_CASE("gamma sampler moments", "[rng]") {
  RngStream rng(9);
  for (const double shape : {0.5, 1.0, 2.5, 7.0}) {
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      CHECK(g > 0.0);
      s += g;
      s2 += g * g;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean - shape) < 0.05 * std::max(1.0, shape));
    CHECK(std::abs(var - shape) < 0.12 * std::max(1.0, shape));
  }
}

TEST_CASE("dirichlet sampler lies on the simplex with the right mean", "[rng]") {
  RngStream rng(10);
  VecX conc(3);
  conc << 2.0, 5.0, 3.0;
  VecX acc = VecX::Zero(3);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const VecX x = rng.dirichlet(conc);
    CHECK(std::abs(x.sum() - 1.0) < 1e-12);
    for (int j = 0; j < 3; ++j) CHECK(x[j] > 0.0);
    acc += x;
  }
  acc /= n;
  const VecX want = conc / conc.sum();
  CHECK((acc - want).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("unit sphere and categorical sampling", "[rng]") {
  RngStream rng(11);
  Vec3 acc = Vec3::Zero();
  for (int i = 0; i < 20000; ++i) {
    const Vec3 u = rng.unit_sphere();
    CHECK(std::abs(u.norm() - 1.0) < 1e-12);
    acc += u;
  }
  CHECK((acc / 20000).norm() < 0.02);

  std::vector<double> probs{0.2, 0.5, 0.3};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.categorical(probs)];
  for (int j = 0; j < 3; ++j) CHECK(std::abs(counts[j] / 50000.0 - probs[j]) < 0.01);
}

TEST_CASE("digamma matches known values and lgamma derivative", "[numeric]") {
  const double euler = 0.57721566490153286;
  CHECK(std::abs(digamma(1.0) + euler) < 1e-12);
  CHECK(std::abs(digamma(0.5) + euler + 2.0 * std::log(2.0)) < 1e-12);
  CHECK(std::abs(digamma(2.0) - (1.0 - euler)) < 1e-12);
  CHECK_THROWS_AS(digamma(0.0), std::invalid_argument);
  CHECK_THROWS_AS(digamma(-1.5), std::invalid_argument);

  for (const double x : {0.1, 0.7, 1.3, 3.9, 12.0, 77.5}) {
    const double fd = oracle::fd_derivative([](double v) { return std::lgamma(v); }, x, 1e-6);
    CHECK(std::abs(digamma(x) - fd) < 2e-5);
  }
  // recurrence psi(x+1) = psi(x) + 1/x
  RngStream rng(12);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(0.05, 20.0);
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) < 1e-10);
  }
}

TEST_CASE("log_sum_exp is shift-stable", "[numeric]") {
  std::vector<double> v{std::log(1.0), std::log(2.0), std::log(3.0)};
  CHECK(std::abs(log_sum_exp(v) - std::log(6.0)) < 1e-12);
  std::vector<double> big{-1000.0, -1000.0};
  CHECK(std::abs(log_sum_exp(big) - (-1000.0 + std::log(2.0))) < 1e-12);
  std::vector<double> one{3.5};
  CHECK(log_sum_exp(one) == 3.5);
}

TEST_CASE("robust cholesky", "[numeric]") {
  const Mat3 id = Mat3::Identity();
  CHECK((chol_psd(id) - id).norm() < 1e-14);

  const Mat3 zero = Mat3::Zero();
  CHECK(chol_psd(zero).norm() == 0.0);

  RngStream rng(13);
  for (int i = 0; i < 50; ++i) {
    Mat3 a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
    const Mat3 spd = a * a.transpose() + 0.1 * Mat3::Identity();
    const Mat3 l = chol_psd(spd);
    CHECK((l * l.transpose() - spd).cwiseAbs().maxCoeff() < 1e-10);
  }

  // slightly indefinite from roundoff: clamped instead of rejected
  Mat3 nearly = Mat3::Identity();
  nearly(2, 2) = -1e-11;
  const Mat3 l = chol_psd(nearly);
  CHECK((l * l.transpose() - nearly).cwiseAbs().maxCoeff() < 1e-6);

  // semidefinite: singular directions stay exactly singular
  Mat3 rank1 = Mat3::Zero();
  rank1(0, 0) = 1e-4;
  const Mat3 lr = chol_psd(rank1);
  CHECK((lr * lr.transpose() - rank1).cwiseAbs().maxCoeff() < 1e-18);
  CHECK(lr.row(1).norm() == 0.0);
  CHECK(lr.row(2).norm() == 0.0);

  // genuinely indefinite must fail
  Mat3 bad = Mat3::Identity();
  bad(2, 2) = -1.0;
  CHECK_THROWS_AS(chol_psd(bad), NumericError);
}

TEST_CASE("gaussian log density", "[numeric]") {
  VecX r(1);
  r << 0.7;
  MatX c(1, 1);
  c << 2.0;
  const double want = -0.5 * (std::log(2.0 * M_PI * 2.0) + 0.49 / 2.0);
  CHECK(std::abs(gaussian_log_density(r, c) - want) < 1e-12);

  // normalization in 1-D by quadrature
  const double total = oracle::integrate(
      [&](double x) {
        VecX v(1);
        v << x;
        return std::exp(gaussian_log_density(v, c));
      },
      -20.0, 20.0, 4000);
  CHECK(std::abs(total - 1.0) < 1e-9);

  MatX sing = MatX::Zero(2, 2);
  VecX r2 = VecX::Zero(2);
  CHECK_THROWS_AS(gaussian_log_density(r2, sing), NumericError);
}

TEST_CASE("fnv1a64 reference values", "[numeric]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("abc") != fnv1a64("acb"));
}
