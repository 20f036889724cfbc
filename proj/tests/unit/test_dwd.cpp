#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bdwd/dwd.hpp"
#include "oracles.hpp"

using namespace bdwd;

namespace {

Dataset two_point() {
  Dataset d;
  d.X.resize(1, 2);
  d.X << -1.0, 1.0;
  d.y = {Label::negative, Label::positive};
  return d;
}

}  // namespace

TEST_CASE("loss values on both branches") {
  CHECK(dwd_loss(0.0) == 1.0);
  CHECK(dwd_loss(0.5) == 0.5);
  CHECK(dwd_loss(-1.0) == 2.0);
  CHECK(dwd_loss(2.0) == 0.125);
  CHECK_THROWS_AS(dwd_loss(NAN), InvalidArgument);
  CHECK_THROWS_AS(dwd_loss(INFINITY), InvalidArgument);
}

TEST_CASE("loss gradient and curvature") {
  CHECK(dwd_loss_grad(0.5) == -1.0);
  CHECK(dwd_loss_grad(1.0) == -0.25);
  CHECK(dwd_loss_grad(-3.0) == -1.0);
  CHECK(dwd_loss_curvature(0.25) == 0.0);
  CHECK(dwd_loss_curvature(1.0) == doctest::Approx(0.5));
}

TEST_CASE("loss is positive, convex, and C1 at the knot") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0), t(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double a = u(rng), b = u(rng), s = t(rng);
    CHECK(dwd_loss(a) > 0.0);
    CHECK(dwd_loss(s * a + (1 - s) * b) <= s * dwd_loss(a) + (1 - s) * dwd_loss(b) + 1e-12);
  }
  const double eps = 1e-12;
  CHECK(std::fabs(dwd_loss(0.5 + eps) - dwd_loss(0.5 - eps)) < 1e-11);
  CHECK(std::fabs(dwd_loss_grad(0.5 + eps) - dwd_loss_grad(0.5 - eps)) < 1e-10);
  CHECK(dwd_loss(1e300) > 0.0);
}

TEST_CASE("objective trivial values") {
  std::mt19937_64 rng(2);
  const Dataset data = oracle::random_dataset(rng, 3, 7);
  CHECK(objective(ModelState::zeros(3, 4.0), data) == 1.0);

  Dataset one;
  one.X.resize(1, 1);
  one.X << 1.0;
  one.y = {Label::positive};
  ModelState s{Vector::Constant(1, 1.0), 0.0, 2.0};
  CHECK(objective(s, one) == doctest::Approx(1.25));
}

TEST_CASE("objective matches the extended-precision evaluator") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int k = 0; k < 50; ++k) {
    const Dataset data = oracle::random_dataset(rng, 3, 5);
    ModelState s{Vector::NullaryExpr(3, [&](Eigen::Index) { return z(rng); }), z(rng), 0.7};
    const double ref = static_cast<double>(
        oracle::objective(data, oracle::widen(s.beta), s.beta0, s.lambda));
    CHECK(objective(s, data) == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("objective rejects unlabeled samples") {
  std::mt19937_64 rng(4);
  const Dataset data = oracle::random_dataset(rng, 2, 6, 0.5, 2);
  CHECK_THROWS_AS(objective(ModelState::zeros(2), data), InvalidArgument);
}

TEST_CASE("gradient at zero and finite-difference agreement") {
  std::mt19937_64 rng(5);
  const Dataset data = oracle::random_dataset(rng, 3, 8);
  const auto g0 = objective_grad(ModelState::zeros(3), data);
  CHECK(g0.beta0 == doctest::Approx(0.0));
  Vector expect = Vector::Zero(3);
  for (Eigen::Index i = 0; i < data.size(); ++i)
    expect -= sign_of(data.y[static_cast<std::size_t>(i)]) * data.X.col(i);
  expect /= static_cast<double>(data.size());
  CHECK((g0.beta - expect).norm() < 1e-14);

  std::normal_distribution<double> z;
  int tested = 0;
  while (tested < 100) {
    ModelState s{Vector::NullaryExpr(3, [&](Eigen::Index) { return z(rng); }), z(rng), 0.3};
    const Scores sc = scores(s, data);
    if ((sc.signed_u.array() - 0.5).abs().minCoeff() < 1e-3) continue;
    ++tested;
    const auto g = objective_grad(s, data);
    const double h = 1e-6;
    auto fd = [&](auto&& bump) {
      ModelState p = s, m = s;
      bump(p, h);
      bump(m, -h);
      return (objective(p, data) - objective(m, data)) / (2 * h);
    };
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double d = fd([j](ModelState& st, double e) { st.beta[j] += e; });
      CHECK(std::fabs(d - g.beta[j]) <= 1e-6 * std::max(1.0, std::fabs(d)));
    }
    const double d0 = fd([](ModelState& st, double e) { st.beta0 += e; });
    CHECK(std::fabs(d0 - g.beta0) <= 1e-6 * std::max(1.0, std::fabs(d0)));
  }
}

TEST_CASE("solve_mode on the symmetric two-point problem") {
  const ModelState m = solve_mode(two_point(), 1.0);
  CHECK(m.beta[0] > 0.0);
  CHECK(std::fabs(m.beta0) < 1e-8);
}

TEST_CASE("solve_mode shrinks to zero under a huge penalty") {
  std::mt19937_64 rng(6);
  const Dataset data = oracle::random_dataset(rng, 4, 12);
  CHECK(solve_mode(data, 1e6).beta.norm() < 1e-5);
}

TEST_CASE("solve_mode matches the grid oracle") {
  std::mt19937_64 rng(7);
  const Dataset data = oracle::random_dataset(rng, 2, 10);
  const double lambda = 1.0;
  auto f = [&](const std::vector<oracle::real>& x) {
    return oracle::objective(data, {x[1], x[2]}, x[0], lambda);
  };
  const oracle::real best = oracle::grid_then_pattern_min(f, 3, -3.0L, 3.0L, 0.05L);
  const ModelState m = solve_mode(data, lambda);
  CHECK(static_cast<double>(f({m.beta0, m.beta[0], m.beta[1]}) - best) <= 1e-6);
}

TEST_CASE("solve_mode is invariant to sample order") {
  std::mt19937_64 rng(8);
  const Dataset data = oracle::random_dataset(rng, 5, 30);
  std::vector<Eigen::Index> perm(30);
  for (int i = 0; i < 30; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  const Dataset shuffled = data.subset(perm);
  const ModelState a = solve_mode(data, 0.5), b = solve_mode(shuffled, 0.5);
  CHECK(std::fabs(objective(a, data) - objective(b, data)) < 1e-8);
}

TEST_CASE("ridge path shrinks monotonically") {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 5; ++k) {
    const Dataset data = oracle::random_dataset(rng, 4, 20);
    double prev = INFINITY;
    for (double lambda : {0.01, 0.1, 1.0, 10.0}) {
      const double norm = solve_mode(data, lambda).beta.norm();
      CHECK(norm <= prev + 1e-9);
      prev = norm;
    }
  }
}

TEST_CASE("solve_mode preconditions") {
  Dataset one_class = two_point();
  one_class.y = {Label::positive, Label::positive};
  CHECK_THROWS_AS(solve_mode(one_class, 1.0), InvalidArgument);
  std::mt19937_64 rng(10);
  const Dataset wide = oracle::random_dataset(rng, 6, 4);
  CHECK_THROWS(solve_mode(wide, 0.0));
  CHECK_THROWS(solve_mode(wide, -1.0));
}

TEST_CASE("solve_mode reports non-convergence with the best iterate") {
  std::mt19937_64 rng(11);
  const Dataset data = oracle::random_dataset(rng, 3, 15);
  try {
    solve_mode(data, 0.1, SolverOptions{1e-300, 1, std::nullopt});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.best().finite());
    CHECK(std::isfinite(e.best_objective()));
  }
}

TEST_CASE("scores for trivial states") {
  std::mt19937_64 rng(12);
  const Dataset data = oracle::random_dataset(rng, 3, 3);
  ModelState s = ModelState::zeros(3);
  s.beta0 = 0.75;
  CHECK((scores(s, data).u.array() == 0.75).all());

  Dataset eye;
  eye.X = Matrix::Identity(3, 3);
  eye.y = {Label::positive, Label::negative, Label::positive};
  ModelState t{Vector(3), -0.5, 1.0};
  t.beta << 1.0, 2.0, 3.0;
  const Scores sc = scores(t, eye);
  CHECK(sc.u[0] == 0.5);
  CHECK(sc.u[1] == 1.5);
  CHECK(sc.u[2] == 2.5);
  CHECK(sc.signed_u[1] == -1.5);
  CHECK_THROWS(scores(ModelState::zeros(2), eye));
}
