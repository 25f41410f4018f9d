#include "spfit/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "spfit/common.hpp"

namespace spfit {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209;
constexpr double kLogSqrt2Pi = 0.91893853320467274178032974;
constexpr double kInvSqrt2 = 0.70710678118654752440084436;

// I_nu by its power series; converges for the x <= 6 regime used below.
double bessel_i_series(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = std::pow(0.5 * x, nu) / std::tgamma(nu + 1.0);
  double sum = term;
  for (int m = 1; m < 200; ++m) {
    term *= q / (m * (m + nu));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// K_0 and K_1 by the log-form series (small x), then upward recurrence.
void bessel_k01_series(double x, double& k0, double& k1) {
  const double q = 0.25 * x * x;
  const double lh = std::log(0.5 * x);

  double i0 = 1.0, term = 1.0;
  for (int m = 1; m < 200; ++m) {
    term *= q / (static_cast<double>(m) * m);
    i0 += term;
    if (term < 1e-18 * i0) break;
  }
  double i1 = 0.5 * x, t1 = 0.5 * x;
  for (int m = 1; m < 200; ++m) {
    t1 *= q / (m * (m + 1.0));
    i1 += t1;
    if (t1 < 1e-18 * i1) break;
  }

  // K0 = -(log(x/2)+gamma) I0 + sum_{k>=1} H_k q^k / (k!)^2
  double sum0 = 0.0, hk = 0.0, tk = 1.0;
  for (int k = 1; k < 200; ++k) {
    tk *= q / (static_cast<double>(k) * k);
    hk += 1.0 / k;
    sum0 += tk * hk;
    if (tk * hk < 1e-18 * (std::abs(sum0) + 1.0)) break;
  }
  k0 = -(lh + kEulerGamma) * i0 + sum0;

  // K1 = 1/x + log(x/2) I1 - (x/4) sum_k [psi(k+1)+psi(k+2)] q^k / (k!(k+1)!)
  double sum1 = 0.0;
  double psi_a = -kEulerGamma;        // psi(1)
  double psi_b = 1.0 - kEulerGamma;   // psi(2)
  double ck = 1.0;                    // q^k / (k!(k+1)!)
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      ck *= q / (k * (k + 1.0));
      psi_a += 1.0 / k;
      psi_b += 1.0 / (k + 1.0);
    }
    double add = ck * (psi_a + psi_b);
    sum1 += add;
    if (k > 2 && std::abs(add) < 1e-18 * (std::abs(sum1) + 1.0)) break;
  }
  k1 = 1.0 / x + lh * i1 - 0.25 * x * sum1;
}

double bessel_k_integer(int n, double x) {
  double k0, k1;
  bessel_k01_series(x, k0, k1);
  if (n == 0) return k0;
  if (n == 1) return k1;
  double km = k0, kc = k1;
  for (int m = 1; m < n; ++m) {
    double kn = km + (2.0 * m / x) * kc;
    km = kc;
    kc = kn;
  }
  return kc;
}

double bessel_k_asymptotic(double nu, double x) {
  // sqrt(pi/(2x)) e^{-x} [1 + sum a_k / x^k], truncated at the smallest term.
  const double mu = 4.0 * nu * nu;
  double sum = 1.0;
  double term = 1.0;
  double prev = std::numeric_limits<double>::max();
  for (int k = 1; k <= 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(term) >= prev) break;
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-17 * std::abs(sum)) break;
  }
  return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace

double bessel_k(double nu, double x) {
  nu = std::abs(nu);  // K_{-nu} = K_nu
  if (!(x > 0.0)) fail(ErrorKind::DimensionMismatch, "bessel_k requires x > 0");
  if (x > 6.0) return bessel_k_asymptotic(nu, x);
  const double nr = std::round(nu);
  if (std::abs(nu - nr) < 1e-6) return bessel_k_integer(static_cast<int>(nr), x);
  // reflection through I_{+-nu}
  const double s = std::sin(std::numbers::pi * nu);
  return 0.5 * std::numbers::pi *
         (bessel_i_series(-nu, x) - bessel_i_series(nu, x)) / s;
}

double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
  return result;
}

double log_norm_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double log_norm_cdf(double z) {
  if (z > -26.0) {
    return std::log(0.5 * std::erfc(-z * kInvSqrt2));
  }
  // Lower-tail asymptotic; erfc underflows long before this matters.
  const double z2 = z * z;
  double corr = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) +
                105.0 / (z2 * z2 * z2 * z2);
  return -0.5 * z2 - kLogSqrt2Pi - std::log(-z) + std::log(corr);
}

double mills_ratio_inv(double z) {
  return std::exp(log_norm_pdf(z) - log_norm_cdf(z));
}

double inv_norm_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    fail(ErrorKind::DimensionMismatch, "inv_norm_cdf requires p in (0,1)");
  // Acklam's rational approximation with one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step
  double e = 0.5 * std::erfc(-x * kInvSqrt2) - p;
  double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace spfit
