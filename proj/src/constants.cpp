#include "confspec/constants.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "confspec/errors.hpp"

namespace confspec {

namespace {

double gjms_product(const DimPair& d) {
  double p = 1.0;
  for (int j = -d.s; j <= d.s - 1; ++j) p *= d.n + 2.0 * j;
  return p;
}

}  // namespace

void require_admissible(const DimPair& d) {
  if (d.n < 3 || d.s < 1 || 2 * d.s >= d.n)
    throw DomainError("need n >= 3, s >= 1 and 2s < n (got n=" + std::to_string(d.n) +
                      ", s=" + std::to_string(d.s) + ")");
}

double sphere_volume(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

double critical_exponent(const DimPair& d) { return 2.0 * d.n / (d.n - 2.0 * d.s); }

double sobolev_constant_sq_inv(const DimPair& d) {
  require_admissible(d);
  const double n = d.n, s = d.s;
  return std::pow(sphere_volume(d.n), 2.0 * s / n) / std::pow(2.0, 2.0 * s) * gjms_product(d);
}

double sobolev_constant_sq_inv_gamma(const DimPair& d) {
  require_admissible(d);
  const double n = d.n, s = d.s;
  const double ratio = std::exp(std::lgamma((n + 2 * s) / 2) - std::lgamma((n - 2 * s) / 2));
  const double inner = std::exp((2 * s / n) * (std::lgamma(n / 2) - std::lgamma(n)));
  return std::pow(2.0, 2 * s) * std::pow(std::numbers::pi, s) * ratio * inner;
}

double green_constant(const DimPair& d) {
  require_admissible(d);
  double inv = std::pow(2.0, d.s - 1) * std::tgamma(d.s);
  for (int i = 1; i <= d.s; ++i) inv *= d.n - 2.0 * i;
  inv *= sphere_volume(d.n - 1);
  return 1.0 / inv;
}

double bubble_gamma(const DimPair& d) {
  require_admissible(d);
  return std::pow(gjms_product(d), 1.0 / d.s);
}

BubbleProfile standard_bubble(const DimPair& d) {
  BubbleProfile b;
  b.dims = d;
  b.gamma = bubble_gamma(d);
  b.center.assign(d.n, 0.0);
  b.scale = 1.0;
  return b;
}

double bubble_radial(const BubbleProfile& b, double r) {
  const double e = 0.5 * (b.dims.n - 2.0 * b.dims.s);
  const double mu = b.scale;
  return std::pow(mu, -e) * std::pow(1.0 + r * r / (mu * mu * b.gamma), -e);
}

double bubble_eval(const BubbleProfile& b, const std::vector<double>& x) {
  double r2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double c = i < b.center.size() ? b.center[i] : 0.0;
    r2 += (x[i] - c) * (x[i] - c);
  }
  return bubble_radial(b, std::sqrt(r2));
}

double bubble_critical_mass(const BubbleProfile& b) {
  const int n = b.dims.n;
  const double q = critical_exponent(b.dims);
  const double a = b.scale * std::sqrt(b.gamma);
  const double R = 1e3 * a;
  auto f = [&](double r) { return std::pow(r, n - 1) * std::pow(bubble_radial(b, r), q); };
  boost::math::quadrature::tanh_sinh<double> ts;
  double body = 0.0;
  // split at the scale so the peak region is resolved
  body += ts.integrate(f, 0.0, a);
  body += ts.integrate(f, a, 10 * a);
  body += ts.integrate(f, 10 * a, R);
  // tail: B^q ~ mu^{-n} (mu^2 Gamma)^n r^{-2n}
  const double tail = std::pow(b.scale, -n) * std::pow(a * a, n) * std::pow(R, -n) / n;
  return sphere_volume(n - 1) * (body + tail);
}

double bubble_equation_residual(const DimPair& d, double r0, double r1, double h) {
  require_admissible(d);
  const BubbleProfile b = standard_bubble(d);
  const int N = static_cast<int>(std::floor((r1 - r0) / h)) + 1;
  if (N < 2 * d.s + 3) throw InvalidConfig("radial grid too coarse for the residual");
  std::vector<double> r(N), f(N);
  for (int i = 0; i < N; ++i) {
    r[i] = r0 + i * h;
    f[i] = bubble_radial(b, r[i]);
  }
  int lo = 0, hi = N - 1;
  for (int it = 0; it < d.s; ++it) {
    std::vector<double> g(N, 0.0);
    for (int i = lo + 1; i < hi; ++i) {
      const double d2 = (f[i + 1] - 2 * f[i] + f[i - 1]) / (h * h);
      const double d1 = (f[i + 1] - f[i - 1]) / (2 * h);
      g[i] = -(d2 + (d.n - 1) / r[i] * d1);
    }
    f.swap(g);
    ++lo;
    --hi;
  }
  const double e = (d.n + 2.0 * d.s) / (d.n - 2.0 * d.s);
  double num = 0.0, den = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const double rhs = std::pow(bubble_radial(b, r[i]), e);
    num = std::max(num, std::abs(f[i] - rhs));
    den = std::max(den, std::abs(rhs));
  }
  return num / den;
}

double sphere_gjms_eigenvalue(const DimPair& d, int degree) {
  const double l = degree, n = d.n;
  double v = 1.0;
  for (int j = 1; j <= d.s; ++j) v *= l * (l + n - 1) + (n + 2 * j - 2) * (n - 2 * j) / 4.0;
  return v;
}

double sphere_lambda0(const DimPair& d) {
  double v = 1.0;
  for (int j = 1; j <= d.s; ++j) v *= (d.n - 2.0 * j + 2) * (d.n + 2.0 * j);
  return v / std::pow(2.0, 2 * d.s);
}

double harmonic_dimension(int n, int degree) {
  if (degree < 0) return 0.0;
  auto binom = [](int a, int b) {
    if (b < 0 || a < b) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return std::round(r);
  };
  return binom(degree + n, n) - binom(degree + n - 2, n);
}

double gamma_bound_F(int n, double alpha) {
  return (1 + alpha) / (1 - alpha) - std::pow(n + 1.0, alpha);
}

double gamma_bound_root(int n) {
  if (n < 7) throw DomainError("gamma_bound_root needs n >= 7");
  double lo = 1e-6, hi = 1.0 - 1e-9;
  if (!(gamma_bound_F(n, lo) < 0.0 && gamma_bound_F(n, hi) > 0.0))
    throw NumericalFailure("invalid bisection bracket for F");
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (gamma_bound_F(n, mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

KnBound kn_upper_bound(const DimPair& d) {
  if (d.s < 1 || d.n < 2 * d.s + 5) throw DomainError("kn_upper_bound needs n >= 2s+5");
  KnBound k;
  k.raw = std::pow((d.n + 2.0 * d.s) / (d.n - 2.0 * d.s), d.n / (2.0 * d.s));
  k.value = std::min(1 + static_cast<int>(std::floor(k.raw)), d.n + 1);
  k.asymptotic_cap = static_cast<int>(std::floor(std::exp(2.0))) + 1;
  return k;
}

}  // namespace confspec
