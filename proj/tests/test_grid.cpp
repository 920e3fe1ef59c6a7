#include <cmath>
#include <numbers>

#include <doctest.h>

#include "pdfevo/errors.hpp"
#include "pdfevo/grid.hpp"

using namespace pdfevo;
using namespace pdfevo::grid;
using dynamics::Monomial;

namespace {

double normal(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("grid validation") {
    CHECK_THROWS_AS(GridSpec({-1.0, 1.0, 40}, {-1.0, 1.0, 41}), ParameterError);
    CHECK_THROWS_AS(GridSpec({1.0, 1.0, 41}, {-1.0, 1.0, 41}), ParameterError);
    const GridSpec g({-1.0, 1.0, 41}, {0.0, 4.0, 81});
    CHECK(g.size() == 41 * 81);
    CHECK(g.point(g.index(40, 80))[0] == doctest::Approx(1.0));
    CHECK(g.point(g.index(40, 80))[1] == doctest::Approx(4.0));
    CHECK(g.on_boundary(g.index(0, 5)));
    CHECK_FALSE(g.on_boundary(g.index(3, 5)));
  }

  TEST_CASE("moment of a concentrated density") {
    const GridSpec g({1.0, 3.0, 201}, {-1.0, 1.0, 201});
    const auto f = gaussian_field(g, Eigen::Vector2d(2.0, 0.0), Eigen::Matrix2d::Identity() * 4e-4);
    CHECK(std::abs(moment(f, Monomial{{2, 0}}) - 4.0) <= 1e-3);
  }

  TEST_CASE("second moment of a centered gaussian") {
    const double var = 0.5;
    const GridSpec g({-6.0, 6.0, 121}, {-6.0, 6.0, 121});
    const auto f = gaussian_field(g, Eigen::Vector2d::Zero(), Eigen::Vector2d(var, 0.8).asDiagonal());
    CHECK(std::abs(moment(f, Monomial{{2, 0}}) - var) <= 1e-4);
    CHECK(moment(f, Monomial{{0, 0}}) == doctest::Approx(mass(f)).epsilon(1e-14));
    CHECK(mass(f) == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("mean and covariance of a correlated gaussian") {
    const GridSpec g({-6.0, 6.0, 121}, {-6.0, 6.0, 121});
    Eigen::Matrix2d cov;
    cov << 0.6, 0.2, 0.2, 0.9;
    const auto f = gaussian_field(g, Eigen::Vector2d(0.4, -0.3), cov);
    CHECK((mean(f) - Eigen::Vector2d(0.4, -0.3)).norm() <= 1e-8);
    CHECK((covariance(f) - cov).norm() <= 1e-6);
  }

  TEST_CASE("marginal of a product density") {
    const GridSpec g({-6.0, 6.0, 121}, {-7.0, 7.0, 141});
    const auto f = gaussian_field(g, Eigen::Vector2d(0.5, -1.0), Eigen::Vector2d(0.7, 1.2).asDiagonal());
    const Eigen::VectorXd m1 = marginal(f, 0);
    const Eigen::VectorXd m2 = marginal(f, 1);
    REQUIRE(m1.size() == 121);
    for (int i = 0; i < 121; ++i) CHECK(std::abs(m1[i] - normal(g.axis(0).node(i), 0.5, 0.7)) <= 1e-6);
    CHECK(integrate(g.axis(0), m1) == doctest::Approx(mass(f)).epsilon(1e-12));
    CHECK(integrate(g.axis(1), m2) == doctest::Approx(mass(f)).epsilon(1e-12));
  }

  TEST_CASE("l1 distances") {
    const GridSpec g({-5.0, 5.0, 101}, {-5.0, 5.0, 101});
    const auto a = gaussian_field(g, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
    CHECK(l1_distance(a, a) == 0.0);
    auto b = a;
    b.values *= 1.1;
    CHECK(l1_distance(a, b) == doctest::Approx(0.1 * mass(a)));
    const GridSpec h({-5.0, 5.0, 81}, {-5.0, 5.0, 101});
    const auto c = gaussian_field(h, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
    CHECK_THROWS_AS(l1_distance(a, c), GridMismatchError);
  }

  TEST_CASE("boundary ratio") {
    const GridSpec g({-6.0, 6.0, 61}, {-6.0, 6.0, 61});
    const auto tight = gaussian_field(g, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity() * 0.3);
    CHECK(boundary_ratio(tight) < 1e-10);
    const auto wide = gaussian_field(g, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity() * 9.0);
    CHECK(boundary_ratio(wide) > 0.1);
  }

  TEST_CASE("expectation of a matrix-valued function") {
    const GridSpec g({-6.0, 6.0, 121}, {-6.0, 6.0, 121});
    const auto f = gaussian_field(g, Eigen::Vector2d(1.0, 0.0), Eigen::Matrix2d::Identity() * 0.5);
    const Eigen::MatrixXd e = expectation(f, [](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return x * x.transpose(); });
    CHECK(e(0, 0) == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(e(1, 1) == doctest::Approx(0.5).epsilon(1e-8));
  }
}
