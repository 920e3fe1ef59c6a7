#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "pdfevo/dynamics.hpp"
#include "pdfevo/errors.hpp"
#include "pdfevo/grid.hpp"

using namespace pdfevo;
using namespace pdfevo::dynamics;

TEST_SUITE("dynamics") {
  TEST_CASE("duffing jacobian at the origin") {
    const auto m = duffing_model(0.5);
    const Eigen::MatrixXd j = m.jacobian(Eigen::Vector2d(0.0, 0.0), 0.0);
    CHECK(j(0, 0) == 0.0);
    CHECK(j(0, 1) == 1.0);
    CHECK(j(1, 0) == 1.0);
    CHECK(j(1, 1) == -1.0);
  }

  TEST_CASE("duffing jacobian at the wells") {
    const auto m = duffing_model(0.3);
    for (double x1 : {-1.0, 1.0})
      for (double x2 : {-2.0, 0.0, 0.7}) CHECK(m.jacobian(Eigen::Vector2d(x1, x2), 0.0)(1, 0) == -2.0);
  }

  TEST_CASE("jacobians match central differences at random points") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (const auto& model : {duffing_model(0.5), linear_oscillator_model(0.25, 1.3)}) {
      for (int k = 0; k < 100; ++k) {
        const Eigen::Vector2d x(u(rng), u(rng));
        const Eigen::MatrixXd exact = model.jacobian(x, 0.0);
        // independent oracle, not the library helper
        Eigen::MatrixXd fd(2, 2);
        for (int c = 0; c < 2; ++c) {
          Eigen::Vector2d e = Eigen::Vector2d::Zero();
          e[c] = 1e-5;
          fd.col(c) = (model.drift(x + e, 0.0) - model.drift(x - e, 0.0)) / 2e-5;
        }
        CHECK((fd - exact).norm() <= 1e-6 * std::max(1.0, exact.norm()));
        CHECK((finite_difference_jacobian(model, x, 0.0) - exact).norm() <= 1e-6 * std::max(1.0, exact.norm()));
      }
    }
  }

  TEST_CASE("duffing drift is odd") {
    const auto m = duffing_model(0.5);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int k = 0; k < 50; ++k) {
      const Eigen::Vector2d x(n(rng), n(rng));
      CHECK((m.drift(-x, 0.0) + m.drift(x, 0.0)).norm() == 0.0);
    }
  }

  TEST_CASE("batch drift agrees with the pointwise drift") {
    const auto m = duffing_model(0.5);
    Eigen::ArrayXXd states(2, 3);
    states << 0.1, -1.2, 2.0, 0.4, 0.0, -0.3;
    Eigen::ArrayXXd out(2, 3);
    m.batch_drift(states, 0.0, out);
    for (int c = 0; c < 3; ++c)
      CHECK((out.col(c).matrix() - m.drift(states.col(c).matrix(), 0.0)).norm() <= 1e-15);
  }

  TEST_CASE("linear oscillator jacobian and drift") {
    const auto m = linear_oscillator_model(0.25, 1.0);
    Eigen::Matrix2d expected;
    expected << 0.0, 1.0, -1.0, -0.5;
    CHECK((m.jacobian(Eigen::Vector2d(0.3, -2.0), 0.0) - expected).norm() == 0.0);
    CHECK(m.jacobian(Eigen::Vector2d(4.0, 1.0), 0.0) == m.jacobian(Eigen::Vector2d(-1.0, 0.5), 0.0));
    const auto m2 = linear_oscillator_model(0.25, 2.0);
    const Eigen::VectorXd h = m2.drift(Eigen::Vector2d(1.0, 0.0), 0.0);
    CHECK(h[0] == 0.0);
    CHECK(h[1] == -4.0);
    CHECK(m.moment_basis.empty());
    CHECK(m.linear);
  }

  TEST_CASE("linear oscillator rejects overdamping") {
    CHECK_THROWS_AS(linear_oscillator_model(1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(duffing_model(0.0), ParameterError);
  }

  TEST_CASE("nondimensionalization of the reference parameters") {
    const auto nd = nondimensionalize_duffing({1.0, 1.0, -1.0, 0.36, 1.0});
    CHECK(nd.zeta == doctest::Approx(0.5));
    CHECK(nd.forcing * nd.forcing == doctest::Approx(0.36));
  }

  TEST_CASE("nondimensionalization scalings") {
    const DuffingParams p{2.0, 0.7, -1.5, 0.4, 0.9};
    const auto base = nondimensionalize_duffing(p);
    CHECK(base.zeta == doctest::Approx(0.7 / (2.0 * std::sqrt(2.0 * 1.5))));
    CHECK(base.time_scale == doctest::Approx(std::sqrt(1.5 / 2.0)));
    CHECK(base.state_scale == doctest::Approx(std::sqrt(0.4 / 1.5)));
    DuffingParams unforced = p;
    unforced.xi0 = 0.0;
    CHECK(nondimensionalize_duffing(unforced).forcing == 0.0);
    DuffingParams stiffer = p;
    stiffer.eta3 *= 4.0;
    CHECK(nondimensionalize_duffing(stiffer).forcing == doctest::Approx(2.0 * base.forcing));
  }

  TEST_CASE("nondimensionalization rejects sign violations") {
    CHECK_THROWS_AS(nondimensionalize_duffing({1.0, 1.0, 1.0, 0.36, 1.0}), ParameterError);
    CHECK_THROWS_AS(nondimensionalize_duffing({1.0, 1.0, -1.0, -0.36, 1.0}), ParameterError);
    CHECK_THROWS_AS(nondimensionalize_duffing({0.0, 1.0, -1.0, 0.36, 1.0}), ParameterError);
  }

  TEST_CASE("duffing mean jacobian from the second moment") {
    const auto m = duffing_model(0.5);
    const std::vector<double> zero{0.0};
    const Eigen::MatrixXd r0 = mean_jacobian(m, zero);
    CHECK(r0(1, 0) == 1.0);
    CHECK(r0(1, 1) == -1.0);
    CHECK(r0(0, 1) == 1.0);
    const std::vector<double> third{1.0 / 3.0};
    CHECK(std::abs(mean_jacobian(m, third)(1, 0)) <= 1e-15);
  }

  TEST_CASE("missing moment names the functional") {
    const auto m = duffing_model(0.5);
    CHECK_THROWS_WITH_AS(mean_jacobian(m, std::vector<double>{}), doctest::Contains("x1^2"), ParameterError);
  }

  TEST_CASE("linear mean jacobian ignores moments") {
    const auto m = linear_oscillator_model(0.25, 1.0);
    CHECK(mean_jacobian(m, std::vector<double>{}) == m.jacobian(Eigen::Vector2d::Zero(), 0.0));
  }

  TEST_CASE("mean jacobian of a point mass is the pointwise jacobian") {
    const auto m = duffing_model(0.4);
    for (double x1 : {-1.7, 0.0, 0.3, 2.2}) {
      const Eigen::Vector2d x(x1, 0.9);
      std::vector<double> mom;
      for (const auto& f : m.moment_basis) mom.push_back(f(std::span<const double>(x.data(), 2)));
      CHECK((mean_jacobian(m, mom) - m.jacobian(x, 0.0)).norm() <= 1e-14);
    }
  }

  TEST_CASE("mean jacobian matches grid quadrature of the jacobian") {
    const auto m = duffing_model(0.5);
    const grid::GridSpec g({-4.0, 4.0, 161}, {-4.0, 4.0, 161});
    const auto f = grid::gaussian_field(g, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity() * 0.3);
    Eigen::Matrix2d quad = Eigen::Matrix2d::Zero();
    for (int k = 0; k < g.size(); ++k) quad += g.weight(k) * f.values[k] * m.jacobian(g.point(k), 0.0);
    CHECK((mean_jacobian(m, std::vector<double>{0.3}) - quad).norm() <= 1e-4);
  }

  TEST_CASE("monomial names and values") {
    const Monomial sq{{2, 0}}, cross{{1, 1}}, one{{0, 0}};
    CHECK(sq.name() == "x1^2");
    CHECK(cross.name() == "x1*x2");
    CHECK(one.name() == "1");
    const std::vector<double> x{1.5, -2.0};
    CHECK(sq(x) == 2.25);
    CHECK(cross(x) == -3.0);
    CHECK(one(x) == 1.0);
  }

  TEST_CASE("relaxation times") {
    CHECK(relaxation_time(duffing_model(0.5)) == doctest::Approx(2.0));
    CHECK(relaxation_time(linear_oscillator_model(0.25, 2.0)) == doctest::Approx(2.0));
  }
}
