#include <cmath>
#include <vector>

#include <doctest.h>

#include "pdfevo/errors.hpp"
#include "pdfevo/propagator.hpp"

using namespace pdfevo;
using namespace pdfevo::propagator;

namespace {

Eigen::Matrix2d oscillator(double zeta, double omega0) {
  Eigen::Matrix2d a;
  a << 0.0, 1.0, -omega0 * omega0, -2.0 * zeta * omega0;
  return a;
}

// Mean Jacobian of the Duffing oscillator along a smooth second-moment history.
MatrixTrajectory duffing_like(double t_end, int n) {
  std::vector<double> t;
  std::vector<Eigen::MatrixXd> m;
  for (int k = 0; k <= n; ++k) {
    const double u = t_end * k / n;
    const double m2 = 0.3 + 0.6 * (1.0 - std::exp(-u)) + 0.05 * std::sin(3.0 * u);
    Eigen::Matrix2d r;
    r << 0.0, 1.0, 1.0 - 3.0 * m2, -1.0;
    t.push_back(u);
    m.emplace_back(r);
  }
  return {t, m};
}

// A(u) = A0 + u A1 is represented exactly by linear interpolation.
MatrixTrajectory affine(double t_end) {
  Eigen::Matrix2d a0, a1;
  a0 << 0.0, 1.0, -1.0, -0.2;
  a1 << 0.1, 0.0, -0.5, 0.05;
  return {{0.0, t_end}, {a0, Eigen::MatrixXd(a0 + t_end * a1)}};
}

}  // namespace

TEST_SUITE("propagator") {
  TEST_CASE("first-order peano-baker of a constant matrix") {
    const Eigen::Matrix2d a = oscillator(0.25, 1.0);
    const auto traj = MatrixTrajectory::constant(a, 0.0, 2.0);
    const auto phi = peano_baker(traj, 1.5, 0.3, 1);
    CHECK((phi.value - (Eigen::Matrix2d::Identity() + 1.2 * a)).norm() <= 1e-13);
  }

  TEST_CASE("every method gives the identity on an empty interval") {
    const auto traj = duffing_like(3.0, 60);
    for (int n = 0; n <= 4; ++n) CHECK(peano_baker(traj, 1.1, 1.1, n).value == Eigen::MatrixXd::Identity(2, 2));
    for (int n = 1; n <= 3; ++n) CHECK(magnus(traj, 1.1, 1.1, n).value == Eigen::MatrixXd::Identity(2, 2));
    CHECK(rk4_transition(traj, 1.1, 1.1, 10).value == Eigen::MatrixXd::Identity(2, 2));
  }

  TEST_CASE("interval outside the trajectory") {
    const auto traj = duffing_like(3.0, 60);
    CHECK_THROWS_AS(peano_baker(traj, 3.5, 0.0, 2), DomainError);
    CHECK_THROWS_AS(magnus(traj, 3.5, 0.0, 2), DomainError);
  }

  TEST_CASE("four magnus terms are unsupported") {
    const auto traj = duffing_like(3.0, 60);
    CHECK_THROWS_AS(magnus(traj, 1.0, 0.0, 4), UnsupportedError);
  }

  TEST_CASE("magnus is exact for a constant matrix") {
    const Eigen::Matrix2d a = oscillator(0.25, 1.0);
    const auto traj = MatrixTrajectory::constant(a, 0.0, 3.0);
    for (int n = 1; n <= 3; ++n)
      for (double t : {0.5, 1.0, 3.0})
        CHECK((magnus(traj, t, 0.0, n).value - matrix_exp(Eigen::MatrixXd(t * a))).norm() <= 1e-12);
  }

  TEST_CASE("magnus is exact for a family commuting with its integral") {
    Eigen::Matrix2d m;
    m << 0.2, 1.0, -1.0, -0.4;
    std::vector<double> t;
    std::vector<Eigen::MatrixXd> a;
    double integral = 0.0;
    for (int k = 0; k <= 30; ++k) {
      t.push_back(0.1 * k);
      a.emplace_back((1.0 + std::sin(0.1 * k)) * m);
      if (k > 0) integral += 0.05 * ((1.0 + std::sin(0.1 * k)) + (1.0 + std::sin(0.1 * (k - 1))));
    }
    const MatrixTrajectory traj(t, a);
    const Eigen::MatrixXd expected = matrix_exp(Eigen::MatrixXd(integral * m));
    for (int n = 1; n <= 3; ++n) CHECK((magnus(traj, 3.0, 0.0, n).value - expected).norm() <= 1e-12);
  }

  TEST_CASE("two-term magnus on a short interval matches rk4") {
    const auto traj = duffing_like(3.0, 300);
    for (double s : {0.0, 1.0, 2.5}) {
      const auto ref = rk4_transition(traj, s + 0.1, s, 1000);
      CHECK((magnus(traj, s + 0.1, s, 2).value - ref.value).norm() <= 1e-4);
    }
  }

  TEST_CASE("magnus inverse equals the backward rk4 transition") {
    const auto traj = duffing_like(3.0, 300);
    const auto fwd = magnus(traj, 1.1, 1.0, 3);
    const auto back = rk4_transition(traj, 1.0, 1.1, 200);
    CHECK(fwd.nonsingular());
    CHECK((fwd.value.inverse() - back.value).norm() <= 1e-6);
  }

  TEST_CASE("magnus error shrinks with the order on the duffing trajectory") {
    const auto traj = duffing_like(3.0, 300);
    const auto ref = rk4_transition(traj, 0.5, 0.0, 2000).value;
    const double e1 = (magnus(traj, 0.5, 0.0, 1).value - ref).norm();
    const double e2 = (magnus(traj, 0.5, 0.0, 2).value - ref).norm();
    CHECK(e2 < e1);
  }

  TEST_CASE("two-term magnus family matches the direct evaluation") {
    const auto traj = duffing_like(2.0, 200);
    std::vector<double> nodes;
    for (int k = 0; k <= 200; ++k) nodes.push_back(0.01 * k);
    const auto fam = magnus2_family(traj, nodes);
    REQUIRE(fam.size() == nodes.size());
    CHECK(fam.back() == Eigen::MatrixXd::Identity(2, 2));
    for (std::size_t k : {0u, 50u, 150u, 199u}) {
      const auto direct = magnus(traj, 2.0, nodes[k], 2, 1);
      CHECK((fam[k] - direct.value).norm() <= 1e-10);
    }
  }

  TEST_CASE("matrix exponential special cases") {
    CHECK(matrix_exp(Eigen::Matrix2d(Eigen::Matrix2d::Zero())) == Eigen::Matrix2d::Identity());
    Eigen::Matrix2d n;
    n << 0.0, 1.0, 0.0, 0.0;
    Eigen::Matrix2d expected;
    expected << 1.0, 1.0, 0.0, 1.0;
    CHECK((matrix_exp(n) - expected).norm() <= 1e-15);
  }

  TEST_CASE("matrix exponential matches the damped oscillator formula") {
    const double zeta = 0.25, omega0 = 1.0, u = 1.0;
    const double a = zeta * omega0, g = omega0 * std::sqrt(1.0 - zeta * zeta);
    const double e = std::exp(-a * u), c = std::cos(g * u), s = std::sin(g * u);
    Eigen::Matrix2d expected;
    expected << e * (c + a / g * s), e * s / g, -omega0 * omega0 * e * s / g, e * (c - a / g * s);
    const Eigen::Matrix2d m = u * oscillator(zeta, omega0);
    CHECK((matrix_exp(m) - expected).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((matrix_exp(Eigen::MatrixXd(m)) - Eigen::MatrixXd(expected)).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("closed form and general exponential agree") {
    const std::vector<Eigen::Matrix2d> cases = {
        (Eigen::Matrix2d() << 0.3, 2.0, -1.5, -0.7).finished(),   // complex pair
        (Eigen::Matrix2d() << 1.0, 0.5, 0.2, -2.0).finished(),    // distinct real
        (Eigen::Matrix2d() << -0.5, 1.0, 0.0, -0.5).finished(),   // repeated
        (Eigen::Matrix2d() << 4.0, -3.0, 6.0, -2.0).finished()};
    for (const auto& m : cases) {
      const Eigen::Matrix2d closed = matrix_exp(m);
      // 3x3 embedding forces the general path
      Eigen::MatrixXd big = Eigen::MatrixXd::Zero(3, 3);
      big.topLeftCorner(2, 2) = m;
      const Eigen::MatrixXd general = matrix_exp(big);
      CHECK((closed - general.topLeftCorner(2, 2)).norm() <= 1e-12 * std::max(1.0, closed.norm()));
    }
  }

  TEST_CASE("rk4 on a constant matrix") {
    const Eigen::Matrix2d a = oscillator(0.25, 1.0);
    const auto traj = MatrixTrajectory::constant(a, 0.0, 1.0);
    const auto phi = rk4_transition(traj, 1.0, 0.0, 100);
    CHECK((phi.value - matrix_exp(Eigen::MatrixXd(a))).norm() <= 1e-8);
  }

  TEST_CASE("rk4 semigroup property") {
    const auto traj = affine(3.0);
    const auto full = rk4_transition(traj, 2.5, 0.2, 2000);
    const auto first = rk4_transition(traj, 1.1, 0.2, 800);
    const auto second = rk4_transition(traj, 2.5, 1.1, 1200);
    CHECK((full.value - second.value * first.value).norm() <= 1e-8);
  }

  TEST_CASE("rk4 converges at fourth order") {
    const auto traj = affine(2.0);
    const Eigen::MatrixXd limit = rk4_transition(traj, 2.0, 0.0, 4000).value;
    const double e1 = (rk4_transition(traj, 2.0, 0.0, 20).value - limit).norm();
    const double e2 = (rk4_transition(traj, 2.0, 0.0, 40).value - limit).norm();
    CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.15));
  }

  TEST_CASE("constant-matrix agreement on a short lag") {
    Eigen::Matrix2d a;
    a << 0.0, 1.0, 0.1, -0.4;
    const auto traj = MatrixTrajectory::constant(a, 0.0, 1.0);
    const Eigen::MatrixXd ref = matrix_exp(Eigen::MatrixXd(0.3 * a));
    // four terms leave the exponential remainder, bounded by |X|^5 e^|X| / 5!
    const double x = (0.3 * a).norm();
    CHECK((peano_baker(traj, 0.3, 0.0, 4).value - ref).norm() <= std::pow(x, 5) * std::exp(x) / 120.0);
    CHECK((peano_baker(traj, 0.05, 0.0, 4).value - matrix_exp(Eigen::MatrixXd(0.05 * a))).norm() <= 1e-6);
    for (int n = 1; n <= 3; ++n) CHECK((magnus(traj, 0.3, 0.0, n).value - ref).norm() <= 1e-12);
    CHECK((rk4_transition(traj, 0.3, 0.0, 100).value - ref).norm() <= 1e-10);
  }

  TEST_CASE("peano-baker truncation error follows the exponential remainder") {
    const Eigen::Matrix2d a = oscillator(0.5, 1.0);
    const auto traj = MatrixTrajectory::constant(a, 0.0, 1.0);
    for (int n = 1; n <= 4; ++n) {
      // remainder of the exponential series after n terms
      Eigen::MatrixXd partial = Eigen::MatrixXd::Identity(2, 2), term = partial;
      for (int k = 1; k <= n; ++k) {
        term = term * a / k;
        partial += term;
      }
      const Eigen::MatrixXd exact = matrix_exp(Eigen::MatrixXd(a));
      const double expected = (exact - partial).norm();
      const double got = (peano_baker(traj, 1.0, 0.0, n).value - exact).norm();
      CHECK(got == doctest::Approx(expected).epsilon(2e-2));
    }
  }

  TEST_CASE("trajectory validation") {
    CHECK_THROWS_AS(MatrixTrajectory({0.0, 0.0}, {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)}),
                    ParameterError);
    const auto traj = duffing_like(1.0, 10);
    CHECK_THROWS_AS(traj.at(1.5), DomainError);
    CHECK((traj.at(0.05) - 0.5 * (traj.matrices()[0] + traj.matrices()[1])).norm() <= 1e-15);
  }
}
