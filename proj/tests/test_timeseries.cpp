#include <doctest.h>

#include <cmath>
#include <omp.h>

#include "common.hpp"
#include "smq/kernels.hpp"
#include "smq/models.hpp"
#include "smq/timeseries.hpp"

using namespace smq;

namespace {

SuperoperatorFamily scalar_family(const TimeGrid& g, double (*f)(double)) {
  return SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(1) * f(t); });
}

double scalar_error(const SuperoperatorFamily& a, double (*exact)(double)) {
  double e = 0.0;
  for (int k = 0; k <= a.grid().steps; ++k) e = std::max(e, std::abs(a[static_cast<std::size_t>(k)].matrix()(0, 0) - exact(a.grid().time(k))));
  return e;
}

Superoperator random_gksl(std::mt19937_64& rng) {
  const Mat h = test::random_hermitian(2, rng);
  models::GKSLGenerator gen{h, {test::random_matrix(2, 2, rng) * 0.5, test::random_matrix(2, 2, rng) * 0.3}, {1.0, 1.0}};
  return models::gksl_superoperator(gen);
}

}  // namespace

TEST_CASE("trapezoidal convolution is second order against a closed form") {
  auto err = [](double dt) {
    const auto g = TimeGrid::over(4.0, dt);
    const auto c = convolve(scalar_family(g, [](double t) { return std::exp(-t); }),
                            scalar_family(g, [](double t) { return std::exp(-2.0 * t); }));
    return scalar_error(c, [](double t) { return std::exp(-t) - std::exp(-2.0 * t); });
  };
  const double e1 = err(0.02), e2 = err(0.01);
  CHECK(e1 < 0.02 * 0.02);
  CHECK(e1 / e2 > 3.5);
}

TEST_CASE("packed OpenMP convolution matches the serial reference") {
  std::mt19937_64 rng(11);
  std::vector<Mat> a, b;
  for (int k = 0; k < 300; ++k) {
    a.push_back(test::random_matrix(4, 4, rng));
    b.push_back(test::random_matrix(4, 4, rng));
  }
  const auto serial = kernels::convolve_serial<complex>(a, b, 0.01);
  omp_set_num_threads(1);
  const auto one = kernels::convolve<complex>(a, b, 0.01);
  omp_set_num_threads(4);
  const auto four = kernels::convolve<complex>(a, b, 0.01);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(max_abs(one[k] - serial[k]) <= 1e-12 * (1.0 + max_abs(serial[k])));
    CHECK(max_abs(one[k] - four[k]) == 0.0);
  }
}

TEST_CASE("Volterra solver satisfies its discrete equation on both sides") {
  std::mt19937_64 rng(12);
  const int n = 200;
  const double dt = 0.02;
  std::vector<Mat> b, r;
  for (int k = 0; k < n; ++k) {
    b.push_back(test::random_matrix(4, 4, rng) * std::exp(-0.05 * k));
    r.push_back(test::random_matrix(4, 4, rng));
  }
  for (auto side : {kernels::Side::left, kernels::Side::right}) {
    const auto x = kernels::volterra_second_kind<complex>(b, r, dt, side);
    const auto xs = kernels::volterra_second_kind_serial<complex>(b, r, dt, side);
    const auto conv = side == kernels::Side::left ? kernels::convolve_serial<complex>(x, b, dt)
                                                  : kernels::convolve_serial<complex>(b, x, dt);
    double res = 0.0, gap = 0.0;
    for (int k = 0; k < n; ++k) {
      res = std::max(res, max_abs(x[static_cast<std::size_t>(k)] + conv[static_cast<std::size_t>(k)] - r[static_cast<std::size_t>(k)]));
      gap = std::max(gap, max_abs(x[static_cast<std::size_t>(k)] - xs[static_cast<std::size_t>(k)]));
    }
    CHECK(res < 1e-10);
    CHECK(gap < 1e-10);
  }
}

TEST_CASE("scalar Volterra equation against its Laplace-inverted solution") {
  // x + x * e^{-t} = 1  =>  x = (1 + e^{-2t}) / 2
  const auto g = TimeGrid::over(5.0, 0.01);
  std::vector<Mat> b, r;
  for (int k = 0; k <= g.steps; ++k) {
    b.push_back(Mat::Constant(1, 1, std::exp(-g.time(k))));
    r.push_back(Mat::Constant(1, 1, 1.0));
  }
  const auto x = kernels::volterra_second_kind<complex>(b, r, g.dt, kernels::Side::left);
  double e = 0.0;
  for (int k = 0; k <= g.steps; ++k)
    e = std::max(e, std::abs(x[static_cast<std::size_t>(k)](0, 0) - 0.5 * (1.0 + std::exp(-2.0 * g.time(k)))));
  CHECK(e < g.dt * g.dt);
}

TEST_CASE("Laplace transform on the grid") {
  const auto g = TimeGrid::over(30.0, 0.01);
  const auto f = scalar_family(g, [](double t) { return std::exp(-t); });
  const auto l = laplace_eval(f, 1.0);
  // trapezoid: int e^{-ct} + dt^2 c / 12 + O(dt^4)
  CHECK(std::abs(l.value.matrix()(0, 0).real() - (0.5 + g.dt * g.dt * 2.0 / 12.0)) < 1e-9);
  CHECK(l.tail_bound < 1e-20);
  std::vector<double> v;
  for (int k = 0; k <= g.steps; ++k) v.push_back(std::exp(-2.0 * g.time(k)));
  CHECK(std::abs(laplace_eval(v, g, 2.0) - (0.25 + g.dt * g.dt * 4.0 / 12.0)) < 1e-9);
  CHECK_THROWS_AS(laplace_eval(f, 0.0), InvalidArgument);
}

TEST_CASE("first and second derivatives") {
  const auto g = TimeGrid::over(3.0, 0.01);
  const auto f = scalar_family(g, [](double t) { return std::sin(t); });
  CHECK(scalar_error(differentiate(f), [](double t) { return std::cos(t); }) < 2.0 * g.dt * g.dt);
  CHECK(scalar_error(second_derivative(f), [](double t) { return -std::sin(t); }) < 2.0 * g.dt * g.dt);
  std::vector<double> v;
  for (int k = 0; k <= g.steps; ++k) v.push_back(g.time(k) * g.time(k));
  const auto dv = differentiate(v, g.dt);
  for (int k = 0; k <= g.steps; ++k) CHECK(dv[static_cast<std::size_t>(k)] == doctest::Approx(2.0 * g.time(k)).epsilon(1e-9));
}

TEST_CASE("convolution series reproduces the scalar Markov semigroup") {
  // Q_t = gamma e^{-gamma t} E, N_t = e^{-gamma t}: Lambda_t = exp(gamma t (E - 1)).
  const double gamma = 0.8;
  const Superoperator e = Superoperator::conjugation(pauli(1));
  const Superoperator l = (e - Superoperator::identity(2)) * gamma;
  for (auto order : {Order::left, Order::right}) {
    const auto g = TimeGrid::over(5.0, 0.01);
    const auto q = SuperoperatorFamily::generate(g, [&](double t) { return e * (gamma * std::exp(-gamma * t)); });
    const auto n = SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(2) * std::exp(-gamma * t); });
    const auto b = build_map(n, q, {order, 1e-10, 64});
    CHECK(b.diagnostics.converged);
    const auto oracle = SuperoperatorFamily::generate(g, [&](double t) { return expm(l * t); });
    CHECK(max_deviation(b.lambda, oracle) < 5.0 * g.dt * g.dt);
    CHECK(b.diagnostics.min_choi > -1e-12);
  }
}

TEST_CASE("non-converging series throws with the partial sum") {
  const auto g = TimeGrid::over(5.0, 0.05);
  const auto q = SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(2) * std::exp(-t); });
  const auto n = SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(2) * std::exp(-t); });
  try {
    build_map(n, q, {Order::left, 1e-10, 2});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.partial().diagnostics.terms == 2);
    CHECK_FALSE(e.partial().diagnostics.converged);
    CHECK(e.partial().lambda.size() == g.size());
  }
}

TEST_CASE("memory-kernel propagator: damped oscillator oracle") {
  // lambda' = -a int_0^t e^{-b(t-s)} lambda(s) ds  <=>  lambda'' + b lambda' + a lambda = 0
  const double a = 2.0, b = 1.0, w = std::sqrt(a - b * b / 4.0);
  auto err = [&](double dt) {
    const auto g = TimeGrid::over(6.0, dt);
    MemoryKernel k;
    k.regular = SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(1) * (-a * std::exp(-b * t)); });
    const auto lam = propagate_with_kernel(k, g);
    double e = 0.0;
    for (int i = 0; i <= g.steps; ++i) {
      const double t = g.time(i);
      const double exact = std::exp(-b * t / 2.0) * (std::cos(w * t) + b / (2.0 * w) * std::sin(w * t));
      e = std::max(e, std::abs(lam[static_cast<std::size_t>(i)].matrix()(0, 0) - exact));
    }
    return e;
  };
  const double e1 = err(0.02), e2 = err(0.01);
  CHECK(e2 < 0.01 * 0.01);
  CHECK(e1 / e2 > 3.5);
}

TEST_CASE("memory-kernel propagator: singular kernel gives the semigroup") {
  std::mt19937_64 rng(13);
  const Superoperator l = random_gksl(rng);
  const auto g = TimeGrid::over(3.0, 0.01);
  MemoryKernel k;
  k.singular = l;
  k.regular = SuperoperatorFamily::zero(g, 2);
  const auto oracle = SuperoperatorFamily::generate(g, [&](double t) { return expm(l * t); });
  for (auto order : {Order::left, Order::right}) {
    const auto lam = propagate_with_kernel(k, g, order);
    CHECK(max_deviation(lam, oracle) < 5.0 * g.dt * g.dt);
    const auto res = verify_master_equation(lam, k, order);
    CHECK(res.within(5.0));
  }
  MemoryKernel wrong = k;
  wrong.singular = l * 2.0;
  CHECK_FALSE(verify_master_equation(oracle, wrong).within(5.0));
}

TEST_CASE("propagator is independent of the thread count") {
  std::mt19937_64 rng(14);
  const Superoperator l = random_gksl(rng);
  const auto g = TimeGrid::over(2.0, 0.01);
  MemoryKernel k;
  k.regular = SuperoperatorFamily::generate(g, [&](double t) { return l * std::exp(-t); });
  for (auto order : {Order::left, Order::right}) {
    const auto serial = propagate_with_kernel_serial(k, g, order);
    omp_set_num_threads(1);
    const auto one = propagate_with_kernel(k, g, order);
    omp_set_num_threads(4);
    const auto four = propagate_with_kernel(k, g, order);
    CHECK(max_deviation(one, four) == 0.0);
    CHECK(max_deviation(one, serial) < 1e-12);
  }
}

TEST_CASE("kernel Laplace transform adds the singular part") {
  const auto g = TimeGrid::over(40.0, 0.01);
  MemoryKernel k;
  k.singular = Superoperator::identity(2) * 3.0;
  k.regular = SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(2) * std::exp(-t); });
  CHECK(k.laplace(1.0).matrix()(0, 0).real() == doctest::Approx(3.5).epsilon(1e-5));
}

TEST_CASE("family check reports the worst grid point") {
  const auto g = TimeGrid::over(1.0, 0.1);
  const auto f = SuperoperatorFamily::generate(g, [&](double t) { return Superoperator::identity(2) * (1.0 - t); });
  const auto c = check_family(f);
  CHECK(c.max_trace_defect == doctest::Approx(1.0));
  CHECK(c.min_choi == doctest::Approx(0.0).epsilon(1e-12));
}
