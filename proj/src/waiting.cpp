#include "smq/waiting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smq/error.hpp"

namespace smq {

WaitingDensity WaitingDensity::exponential(double rate) {
  if (!(rate > 0.0)) throw InvalidArgument("exponential density: rate must be positive");
  WaitingDensity w;
  w.kind_ = Kind::exponential;
  w.components_ = {{1.0, rate}};
  return w;
}

WaitingDensity WaitingDensity::mixture(std::vector<Component> components) {
  if (components.empty()) throw InvalidArgument("mixture density: no components");
  double mass = 0.0;
  for (const auto& c : components) {
    if (c.weight < 0.0) throw InvalidArgument("mixture density: negative weight");
    if (!(c.rate > 0.0)) throw InvalidArgument("mixture density: rate must be positive");
    mass += c.weight;
  }
  if (mass > 1.0 + 1e-12) throw InvalidArgument("mixture density: total mass exceeds 1");
  WaitingDensity w;
  w.kind_ = Kind::mixture;
  w.components_ = std::move(components);
  return w;
}

WaitingDensity WaitingDensity::erlang(int shape, double rate) {
  if (shape < 1) throw InvalidArgument("erlang density: shape must be >= 1");
  if (!(rate > 0.0)) throw InvalidArgument("erlang density: rate must be positive");
  WaitingDensity w;
  w.kind_ = Kind::erlang;
  w.shape_ = shape;
  w.components_ = {{1.0, rate}};
  return w;
}

WaitingDensity WaitingDensity::tabulated(TimeGrid grid, std::vector<double> values) {
  if (values.size() != grid.size()) throw InvalidArgument("tabulated density: sample count mismatch");
  for (double v : values)
    if (v < 0.0 || !std::isfinite(v)) throw InvalidArgument("tabulated density: values must be finite and >= 0");
  WaitingDensity w;
  w.kind_ = Kind::tabulated;
  w.table_grid_ = grid;
  w.table_ = std::move(values);
  // the trapezoid overshoots a normalized density by about dt^2 |f'(0)| / 12
  if (w.total_mass() > 1.0 + 1e-9 + grid.dt * grid.dt) throw InvalidArgument("tabulated density: integral exceeds 1");
  return w;
}

double WaitingDensity::density(double t) const {
  if (t < 0.0) return 0.0;
  switch (kind_) {
    case Kind::exponential:
    case Kind::mixture: {
      double f = 0.0;
      for (const auto& c : components_) f += c.weight * c.rate * std::exp(-c.rate * t);
      return f;
    }
    case Kind::erlang: {
      const double r = components_.front().rate;
      return std::exp(shape_ * std::log(r) + (shape_ - 1) * std::log(std::max(t, 1e-300)) - r * t -
                      std::lgamma(shape_)) * (shape_ == 1 || t > 0.0 ? 1.0 : 0.0);
    }
    case Kind::tabulated: {
      if (t >= table_grid_.horizon()) return table_.back();
      const double x = t / table_grid_.dt;
      const auto k = static_cast<std::size_t>(x);
      const double theta = x - static_cast<double>(k);
      return (1.0 - theta) * table_[k] + theta * table_[k + 1];
    }
  }
  return 0.0;
}

double WaitingDensity::survival(double t) const {
  if (t <= 0.0) return 1.0;
  switch (kind_) {
    case Kind::exponential:
    case Kind::mixture: {
      double g = 1.0;
      for (const auto& c : components_) g -= c.weight * (1.0 - std::exp(-c.rate * t));
      return g;
    }
    case Kind::erlang: {
      const double x = components_.front().rate * t;
      double term = 1.0, sum = 1.0;
      for (int k = 1; k < shape_; ++k) {
        term *= x / k;
        sum += term;
      }
      return std::exp(-x) * sum;
    }
    case Kind::tabulated: {
      const auto cum = cumulative_integral(table_, table_grid_.dt);
      if (t >= table_grid_.horizon()) return 1.0 - cum.back();
      const double x = t / table_grid_.dt;
      const auto k = static_cast<std::size_t>(x);
      const double theta = x - static_cast<double>(k);
      return 1.0 - ((1.0 - theta) * cum[k] + theta * cum[k + 1]);
    }
  }
  return 1.0;
}

double WaitingDensity::total_mass() const {
  switch (kind_) {
    case Kind::exponential:
    case Kind::mixture: {
      double m = 0.0;
      for (const auto& c : components_) m += c.weight;
      return m;
    }
    case Kind::erlang:
      return 1.0;
    case Kind::tabulated: {
      const double body = cumulative_integral(table_, table_grid_.dt).back();
      // exponential extrapolation of the last two samples
      const double a = table_[table_.size() - 2];
      const double b = table_.back();
      double tail = 0.0;
      if (b > 0.0) {
        const double decay = a > b ? std::log(a / b) / table_grid_.dt : 0.0;
        tail = decay > 0.0 ? b / decay : b * table_grid_.horizon();
      }
      return body + tail;
    }
  }
  return 0.0;
}

std::vector<double> WaitingDensity::sample(const TimeGrid& grid) const {
  std::vector<double> out(grid.size());
  for (int k = 0; k <= grid.steps; ++k) out[static_cast<std::size_t>(k)] = density(grid.time(k));
  return out;
}

std::string WaitingDensity::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::exponential: os << "exponential(rate=" << components_.front().rate << ")"; break;
    case Kind::mixture:
      os << "mixture(";
      for (std::size_t i = 0; i < components_.size(); ++i)
        os << (i ? ", " : "") << components_[i].weight << "@" << components_[i].rate;
      os << ")";
      break;
    case Kind::erlang: os << "erlang(shape=" << shape_ << ", rate=" << components_.front().rate << ")"; break;
    case Kind::tabulated: os << "tabulated(" << table_.size() << " samples)"; break;
  }
  return os.str();
}

std::vector<double> cumulative_integral(const std::vector<double>& f, double dt) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t k = 1; k < f.size(); ++k) out[k] = out[k - 1] + 0.5 * dt * (f[k - 1] + f[k]);
  return out;
}

}  // namespace smq
