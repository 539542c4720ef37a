#include <doctest.h>

#include <random>

#include "dynident/scara.hpp"

using namespace dynident;

namespace {

constexpr double kPi = 3.14159265358979323846;

JointState make_state(const Vec2& q, const Vec2& qd, const Vec2& qdd) {
  JointState s;
  s.q = q;
  s.qd = qd;
  s.qdd = qdd;
  return s;
}

// near-sign smoothing for the hand-computed cases
const SmoothSignConfig kSharp{1e-9};
const SmoothSignConfig kDefault{};

} // namespace

TEST_CASE("regressor matches hand evaluation") {
  const RegressorMatrix m =
      idm_regressor(make_state({0, 0}, {0, 0}, {1, 0}), kDefault);
  Eigen::Matrix<double, 2, 8> expected;
  expected << 1, 0, 0, 1, 2, 0, 0, 0,
              0, 0, 0, 1, 1, 0, 0, 0;
  CHECK((m - expected).cwiseAbs().maxCoeff() == 0.0);

  const RegressorMatrix m2 =
      idm_regressor(make_state({0, kPi / 2}, {1, 0}, {0, 0}), kSharp);
  Eigen::Matrix<double, 2, 8> expected2;
  expected2 << 0, 1, 1, 0, 0, 0, 0, 0,
               0, 0, 0, 0, 1, 0, 0, 0;
  CHECK((m2 - expected2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("regressor vanishes at rest") {
  const RegressorMatrix m =
      idm_regressor(make_state({0.3, -1.2}, {0, 0}, {0, 0}), kDefault);
  CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("regressor zero pattern holds on random states") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const JointState s = make_state({u(rng), u(rng)}, {u(rng), u(rng)},
                                    {u(rng), u(rng)});
    const RegressorMatrix m = idm_regressor(s, kDefault);
    CHECK(m(1, 0) == 0.0);
    CHECK(m(1, 1) == 0.0);
    CHECK(m(1, 2) == 0.0);
    CHECK(m(0, 6) == 0.0);
    CHECK(m(0, 7) == 0.0);
  }
}

TEST_CASE("inverse dynamics composes regressor and parameters") {
  const BaseParameters chi = nominal_parameters();
  const JointState s = make_state({0, kPi / 2}, {1, 0}, {0, 0});
  const Vec2 tau = inverse_dynamics(s, chi, kSharp);
  CHECK(tau[0] == doctest::Approx(0.85).epsilon(1e-9));
  CHECK(tau[1] == doctest::Approx(0.121).epsilon(1e-9));

  // bitwise equal to the explicit composition
  const Vec2 composed = idm_regressor(s, kSharp) * chi.vector();
  CHECK(tau[0] == composed[0]);
  CHECK(tau[1] == composed[1]);

  const BaseParameters zero;
  const Vec2 tau0 = inverse_dynamics(s, zero, kSharp);
  CHECK(tau0[0] == 0.0);
  CHECK(tau0[1] == 0.0);
}

TEST_CASE("inverse dynamics is linear in the parameters") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const JointState s = make_state({u(rng), u(rng)}, {u(rng), u(rng)},
                                    {u(rng), u(rng)});
    Eigen::Matrix<double, 8, 1> v1, v2;
    for (int i = 0; i < 8; ++i) {
      v1[i] = u(rng);
      v2[i] = u(rng);
    }
    const double a = u(rng), b = u(rng);
    const BaseParameters c1 = BaseParameters::from_vector(v1);
    const BaseParameters c2 = BaseParameters::from_vector(v2);
    const BaseParameters mix = BaseParameters::from_vector(a * v1 + b * v2);
    const Vec2 lhs = inverse_dynamics(s, mix, kDefault);
    const Vec2 rhs = a * inverse_dynamics(s, c1, kDefault) +
                     b * inverse_dynamics(s, c2, kDefault);
    CHECK((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("identity-inertia start behaves as a double integrator") {
  const BaseParameters chi0 = regular_ia_init();
  CHECK_FALSE(chi0.physically_plausible());
  const JointState s = make_state({0.7, -0.4}, {0, 0}, {1.3, -2.1});
  const Vec2 tau = inverse_dynamics(s, chi0, kDefault);
  CHECK(tau[0] == doctest::Approx(1.3));
  CHECK(tau[1] == doctest::Approx(-2.1));
  const Mat2 m = inertia_matrix(Vec2(0.7, -0.4), chi0);
  CHECK((m - Mat2::Identity()).cwiseAbs().maxCoeff() == 0.0);
  const Vec2 j = effective_inertia(chi0);
  CHECK(j[0] == 1.0);
  CHECK(j[1] == 1.0);
  const Vec2 qdd = forward_dynamics(Vec2(2.0, -1.0), Vec2(0, 0),
                                    Vec2(1.3, -2.1), chi0, kDefault);
  CHECK(qdd[0] == doctest::Approx(1.3));
  CHECK(qdd[1] == doctest::Approx(-2.1));
}

TEST_CASE("inertia matrix closed form") {
  const BaseParameters chi = nominal_parameters();
  const Mat2 m = inertia_matrix(Vec2(0.4, 0.0), chi);
  CHECK(m(0, 0) == doctest::Approx(3.744).epsilon(1e-12));
  CHECK(m(0, 1) == doctest::Approx(0.183).epsilon(1e-12));
  CHECK(m(1, 0) == doctest::Approx(0.183).epsilon(1e-12));
  CHECK(m(1, 1) == doctest::Approx(0.062).epsilon(1e-12));

  BaseParameters decoupled = chi;
  decoupled.lmx2 = 0;
  decoupled.lmy2 = 0;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Mat2 ref = inertia_matrix(Vec2(0, 0), decoupled);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat2 mq = inertia_matrix(Vec2(u(rng), u(rng)), decoupled);
    CHECK((mq - ref).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("inertia matrix equals acceleration-coefficient extraction") {
  BaseParameters chi = nominal_parameters();
  chi.fv1 = chi.fc1 = chi.fv2 = chi.fc2 = 0;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec2 q(u(rng), u(rng));
    const Mat2 m = inertia_matrix(q, chi);
    for (int i = 0; i < 2; ++i) {
      Vec2 e = Vec2::Zero();
      e[i] = 1.0;
      const Vec2 col =
          inverse_dynamics(make_state(q, Vec2::Zero(), e), chi, kDefault);
      CHECK((col - m.col(i)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("forward and inverse dynamics round trip") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  std::uniform_real_distribution<double> upos(0.05, 2.0);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    BaseParameters chi;
    chi.zz1r = upos(rng) + 0.5;
    chi.fv1 = upos(rng) * 0.1;
    chi.fc1 = upos(rng) * 0.5;
    chi.zz2r = upos(rng) * 0.2 + 0.02;
    chi.lmx2 = u(rng) * 0.05;
    chi.lmy2 = u(rng) * 0.05;
    chi.fv2 = upos(rng) * 0.05;
    chi.fc2 = upos(rng) * 0.2;
    const JointState s = make_state({u(rng), u(rng)}, {u(rng), u(rng)},
                                    {u(rng), u(rng)});
    const Vec2 tau = inverse_dynamics(s, chi, kDefault);
    const Vec2 qdd = forward_dynamics(s.q, s.qd, tau, chi, kDefault);
    worst = std::max(worst, (qdd - s.qdd).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("degenerate inertia is rejected") {
  const BaseParameters zero;
  CHECK_THROWS_AS(forward_dynamics(Vec2(0, 0), Vec2(0, 0), Vec2(1, 1), zero,
                                   kDefault),
                  SingularInertia);
}

TEST_CASE("effective inertia closed forms") {
  const Vec2 j = effective_inertia(nominal_parameters());
  CHECK(j[0] == doctest::Approx(3.744).epsilon(1e-12));
  CHECK(j[1] == doctest::Approx(0.062).epsilon(1e-12));

  BaseParameters simple;
  simple.zz1r = 1;
  simple.zz2r = 1;
  const Vec2 j2 = effective_inertia(simple);
  CHECK(j2[0] == 2.0);
  CHECK(j2[1] == 1.0);
}

TEST_CASE("standard to base regrouping") {
  const BaseParameters p = standard_to_base(1.0, 0.5, 0.0, 0.0, 4.0, 0.5);
  CHECK(p.zz1r == doctest::Approx(2.5));
  const BaseParameters z = standard_to_base(0.0, 0.0, 0.0, 0.0, 0.0, 0.5);
  CHECK(z.zz1r == 0.0);
  CHECK(z.zz2r == 0.0);
  const BaseParameters nom2 = standard_to_base(1.0, 0.5, 0.0, 0.0, 0.0, 0.5);
  CHECK(nom2.zz1r == doctest::Approx(1.5));
}

TEST_CASE("smooth sign approaches sign and stays odd") {
  for (const double eps : {1e-1, 1e-2, 1e-3}) {
    const SmoothSignConfig ss{eps};
    CHECK(ss(0.0) == 0.0);
    for (const double v : {0.05, 0.3, 1.7}) {
      CHECK(ss(v) == doctest::Approx(-ss(-v)).epsilon(1e-15));
      CHECK(ss(v) > 0);
    }
  }
  // pointwise limit for fixed v > 0
  const double v = 0.04;
  double prev = 0;
  for (const double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const SmoothSignConfig ss{eps};
    CHECK(ss(v) >= prev);
    prev = ss(v);
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-12));
}
