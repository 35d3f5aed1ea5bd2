#include <doctest.h>

#include <cmath>

#include "smq/error.hpp"
#include "smq/waiting.hpp"

using namespace smq;

namespace {

// Composite Simpson on [0, t], independent of the trapezoidal code under test.
template <class F>
double simpson(F&& f, double t, int n = 2000) {
  const double h = t / n;
  double s = f(0.0) + f(t);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("exponential density") {
  const auto w = WaitingDensity::exponential(2.0);
  CHECK(w.density(0.0) == doctest::Approx(2.0));
  CHECK(w.density(1.0) == doctest::Approx(2.0 * std::exp(-2.0)));
  CHECK(w.survival(1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(w.total_mass() == 1.0);
  CHECK(w.density(-1.0) == 0.0);
  CHECK(w.describe() == "exponential(rate=2)");
}

TEST_CASE("mixture density: survival is one minus the integral") {
  const auto w = WaitingDensity::mixture({{0.5, 0.5}, {0.3, 2.0}});
  CHECK(w.total_mass() == doctest::Approx(0.8));
  for (double t : {0.3, 1.0, 4.0})
    CHECK(w.survival(t) == doctest::Approx(1.0 - simpson([&](double x) { return w.density(x); }, t)).epsilon(1e-10));
  CHECK(w.survival(1e6) == doctest::Approx(0.2));
}

TEST_CASE("Erlang density") {
  const auto w = WaitingDensity::erlang(3, 1.5);
  CHECK(w.density(0.0) == 0.0);
  CHECK(w.density(1.0) == doctest::Approx(1.5 * 1.5 * 1.5 * 1.0 * std::exp(-1.5) / 2.0));
  for (double t : {0.5, 2.0, 6.0})
    CHECK(w.survival(t) == doctest::Approx(1.0 - simpson([&](double x) { return w.density(x); }, t)).epsilon(1e-10));
  CHECK(WaitingDensity::erlang(1, 0.7).density(0.0) == doctest::Approx(0.7));
}

TEST_CASE("tabulated density with exponential tail extrapolation") {
  const TimeGrid g(0.01, 500);
  std::vector<double> v;
  for (int k = 0; k <= g.steps; ++k) v.push_back(std::exp(-g.time(k)));
  const auto w = WaitingDensity::tabulated(g, v);
  // body error is the trapezoid's dt^2/12 [f'(T) - f'(0)]; the tail e^{-5} is recovered exactly
  CHECK(w.total_mass() == doctest::Approx(1.0 + g.dt * g.dt / 12.0 * (1.0 - std::exp(-5.0))).epsilon(1e-8));
  CHECK(w.density(0.005) == doctest::Approx(0.5 * (1.0 + std::exp(-0.01))));
  CHECK(w.survival(2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-4));
  CHECK_THROWS_AS(WaitingDensity::tabulated(g, std::vector<double>(3, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(WaitingDensity::tabulated(g, std::vector<double>(g.size(), 2.0)), InvalidArgument);
}

TEST_CASE("invalid densities are rejected") {
  CHECK_THROWS_AS(WaitingDensity::exponential(0.0), InvalidArgument);
  CHECK_THROWS_AS(WaitingDensity::mixture({}), InvalidArgument);
  CHECK_THROWS_AS(WaitingDensity::mixture({{0.7, 1.0}, {0.7, 2.0}}), InvalidArgument);
  CHECK_THROWS_AS(WaitingDensity::mixture({{-0.1, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(WaitingDensity::erlang(0, 1.0), InvalidArgument);
}

TEST_CASE("cumulative trapezoid") {
  const auto c = cumulative_integral({0.0, 1.0, 2.0, 3.0}, 0.5);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == doctest::Approx(0.25));
  CHECK(c[3] == doctest::Approx(2.25));
}
