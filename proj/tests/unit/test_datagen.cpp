#include "bqr/ald.hpp"
#include "bqr/datagen.hpp"
#include "bqr/special.hpp"
#include "oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace bqr;

TEST_CASE("true quantile") {
  CHECK(true_quantile(Eigen::RowVector3d(1, 0, 0)) == 1.0);
  CHECK(true_quantile(Eigen::RowVector3d(1, 3, 1)) == 10.0);
  CHECK(true_quantile(Eigen::RowVector3d(1, 2.5, 0)) == 6.0);
}

TEST_CASE("model ids outside 1..4 are rejected") {
  CHECK_THROWS_AS(ModelSpec(0, QuantileLevel(0.5)), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec(5, QuantileLevel(0.5)), std::invalid_argument);
}

TEST_CASE("covariates") {
  Rng rng(1);
  const Eigen::MatrixXd x = sample_covariates(1000000, rng);
  CHECK((x.col(0).array() == 1.0).all());
  CHECK(x.col(1).minCoeff() >= 1.0);
  CHECK(x.col(1).maxCoeff() <= 1000.0);
  CHECK(((x.col(2).array() == 0.0) || (x.col(2).array() == 1.0)).all());
  CHECK(std::abs(x.col(2).mean() - 0.3) < 0.002);

  const auto phi = [](double v) { return std::exp(-0.5 * (v - 3.0) * (v - 3.0)); };
  const double ref = oracle::simpson([&](double v) { return v * phi(v); }, 1.0, 40.0) / oracle::simpson(phi, 1.0, 40.0);
  CHECK(ref == doctest::Approx(3.0552).epsilon(1e-4));
  CHECK(std::abs(x.col(1).mean() - ref) < 0.003);

  Rng a(5), b(5);
  CHECK((sample_covariates(50, a).array() == sample_covariates(50, b).array()).all());
}

TEST_CASE("model 1 at the median adds pure noise") {
  const ModelSpec spec(1, QuantileLevel(0.5));
  const Eigen::RowVector3d x(1.0, 2.7, 1.0);
  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) CHECK(generate_response(spec, x, a) == doctest::Approx(true_quantile(x) + b.normal()));
}

TEST_CASE("conditional quantile identity holds for every model") {
  const Eigen::Matrix<double, 5, 3> rows{{1, 1.0, 0}, {1, 2.2, 1}, {1, 3.0, 0}, {1, 4.1, 1}, {1, 6.5, 0}};
  for (int model = 1; model <= 4; ++model) {
    for (double t : {0.25, 0.75}) {
      const ModelSpec spec(model, QuantileLevel(t));
      for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Rng rng(static_cast<std::uint64_t>(1000 * model + 10 * r) + (t < 0.5 ? 0 : 5));
        const Eigen::RowVector3d x = rows.row(r);
        const double q = true_quantile(x);
        long below = 0;
        constexpr long kDraws = 1000000;
        for (long i = 0; i < kDraws; ++i) below += generate_response(spec, x, rng) <= q ? 1 : 0;
        CAPTURE(model);
        CAPTURE(t);
        CAPTURE(r);
        CHECK(std::abs(static_cast<double>(below) / kDraws - t) < 0.002);
      }
    }
  }
}

TEST_CASE("model 4 identity is exact") {
  for (double t : {0.1, 0.25, 0.75, 0.9}) {
    const double rho = quantile_shift(ModelSpec(4, QuantileLevel(t)));
    for (double q : {1.0, 7.5, 13.0}) {
      // P(Y <= q) for Y ~ N(q - rho|q|, q^2)
      CHECK(normal_cdf((q - (q - rho * std::abs(q))) / std::abs(q)) == doctest::Approx(t).epsilon(1e-12));
    }
  }
}

TEST_CASE("model constants") {
  CHECK(quantile_shift(ModelSpec(1, QuantileLevel(0.5))) == 0.0);
  CHECK(quantile_shift(ModelSpec(2, QuantileLevel(0.25))) == doctest::Approx(-std::log(0.75)));
  const double g = quantile_shift(ModelSpec(3, QuantileLevel(0.25)));
  CHECK(1.0 - (1.0 + g) * std::exp(-g) == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("limiting check loss C*") {
  const auto m1 = compute_cstar(ModelSpec(1, QuantileLevel(0.5)));
  CHECK(m1.c_star == doctest::Approx(std::sqrt(2.0 / std::numbers::pi) / 2.0).epsilon(1e-10));
  CHECK(m1.sigma0 == m1.c_star);
  // the maximizer of log(tau(1-tau)/s) - C*/s is s = C*
  const double c = m1.c_star;
  const auto obj = [&](double s) { return std::log(0.25 / s) - c / s; };
  CHECK(obj(c) > obj(c * 1.01));
  CHECK(obj(c) > obj(c * 0.99));

  const auto clamped = compute_cstar(ModelSpec(1, QuantileLevel(0.5)), std::pair{0.5, 2.0});
  CHECK(clamped.sigma0 == 0.5);

  // Model 2 at tau = 0.25: Monte Carlo with 1e7 draws against quadrature
  const ModelSpec m2(2, QuantileLevel(0.25));
  const double quad = compute_cstar(m2).c_star;
  Rng rng(77);
  const double rho = quantile_shift(m2);
  double sum = 0.0;
  constexpr int kDraws = 10000000;
  for (int i = 0; i < kDraws; ++i) sum += check_loss(rng.exponential() - rho, m2.tau);
  CHECK(std::abs(sum / kDraws - quad) < 5e-4);
}

TEST_CASE("C* for the heteroscedastic models against Monte Carlo") {
  for (int model : {3, 4}) {
    const ModelSpec spec(model, QuantileLevel(0.25));
    Rng rng(static_cast<std::uint64_t>(model));
    constexpr int kDraws = 2000000;
    const Eigen::MatrixXd x = sample_covariates(kDraws, rng);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const double z = generate_response(spec, x.row(i), rng) - true_quantile(x.row(i));
      const double l = check_loss(z, spec.tau);
      sum += l;
      sum2 += l * l;
    }
    const double mean = sum / kDraws;
    const double se = std::sqrt((sum2 / kDraws - mean * mean) / kDraws);
    CAPTURE(model);
    CHECK(std::abs(mean - compute_cstar(spec).c_star) < 4.0 * se);
  }
}

TEST_CASE("generated datasets satisfy the dataset contract") {
  Rng cov(1), resp(2);
  const Eigen::MatrixXd x = sample_covariates(50, cov);
  for (int model = 1; model <= 4; ++model) {
    const Dataset d = generate_dataset(ModelSpec(model, QuantileLevel(0.25)), x, resp);
    CHECK(d.n() == 50);
    CHECK(d.p() == 3);
    CHECK(d.y().allFinite());
    if (model == 3) CHECK((d.y().array() > 0.0).all());
  }
}
