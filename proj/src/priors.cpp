#include "spfit/priors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "spfit/common.hpp"

namespace spfit {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178032974;

double normal_logpdf(double x, double m, double s) {
  const double z = (x - m) / s;
  return -0.5 * z * z - std::log(s) - kLogSqrt2Pi;
}
}  // namespace

double cauchy_logpdf(double x, double loc, double scale) {
  const double z = (x - loc) / scale;
  return -std::log(std::numbers::pi) - std::log(scale) - std::log1p(z * z);
}

PriorSpec parse_prior(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  auto args = [&](std::size_t open) {
    std::vector<double> out;
    std::size_t close = s.find(')', open);
    if (close == std::string::npos)
      fail(ErrorKind::UnknownPriorFamily, "malformed prior '" + text + "'");
    std::stringstream body(s.substr(open + 1, close - open - 1));
    std::string tok;
    while (std::getline(body, tok, ',')) out.push_back(std::stod(tok));
    return out;
  };
  PriorSpec spec;
  if (s.rfind("normal_on_positive(", 0) == 0) {
    auto a = args(18);
    if (a.size() != 2) fail(ErrorKind::UnknownPriorFamily, "normal_on_positive needs (m, s)");
    spec = PriorSpec{PriorFamily::NormalOnPositive, a[0], a[1]};
  } else if (s.rfind("normal(", 0) == 0) {
    auto a = args(6);
    if (a.size() != 2) fail(ErrorKind::UnknownPriorFamily, "normal needs (m, s)");
    spec = PriorSpec{PriorFamily::Normal, a[0], a[1]};
  } else if (s.rfind("half_cauchy(", 0) == 0) {
    auto a = args(11);
    if (a.size() != 1) fail(ErrorKind::UnknownPriorFamily, "half_cauchy needs (s)");
    spec = PriorSpec{PriorFamily::HalfCauchy, 0.0, a[0]};
  } else if (s.rfind("cauchy(", 0) == 0) {
    auto a = args(6);
    if (a.size() != 2) fail(ErrorKind::UnknownPriorFamily, "cauchy needs (0, s)");
    spec = PriorSpec{PriorFamily::HalfCauchy, a[0], a[1]};
  } else if (s == "flat") {
    spec = PriorSpec{PriorFamily::Flat, 0.0, 1.0};
  } else {
    fail(ErrorKind::UnknownPriorFamily, "unknown prior '" + text + "'");
  }
  if (spec.family != PriorFamily::Flat && !(spec.scale > 0.0))
    fail(ErrorKind::UnknownPriorFamily, "prior scale must be positive");
  return spec;
}

std::string format_prior(const PriorSpec& spec) {
  std::ostringstream os;
  switch (spec.family) {
    case PriorFamily::Normal:
      os << "normal(" << spec.location << ", " << spec.scale << ")";
      break;
    case PriorFamily::HalfCauchy:
      os << "half_cauchy(" << spec.scale << ")";
      break;
    case PriorFamily::NormalOnPositive:
      os << "normal_on_positive(" << spec.location << ", " << spec.scale << ")";
      break;
    case PriorFamily::Flat:
      os << "flat";
      break;
  }
  return os.str();
}

std::pair<double, double> prior_logpdf_grad(const PriorSpec& spec, double x,
                                            bool positive_block) {
  switch (spec.family) {
    case PriorFamily::Flat:
      return {0.0, 0.0};
    case PriorFamily::Normal: {
      const double z = (x - spec.location) / spec.scale;
      return {normal_logpdf(x, spec.location, spec.scale),
              -z / spec.scale};
    }
    case PriorFamily::HalfCauchy: {
      if (!positive_block)
        fail(ErrorKind::SpecMismatch,
             "half_cauchy prior requires a positive-scale block");
      const double theta = std::exp(x);
      const double r = theta / spec.scale;
      double value = std::numbers::ln2 + cauchy_logpdf(theta, 0.0, spec.scale) + x;
      double d = -2.0 * r * r / (1.0 + r * r) + 1.0;
      return {value, d};
    }
    case PriorFamily::NormalOnPositive: {
      if (!positive_block)
        fail(ErrorKind::SpecMismatch,
             "normal_on_positive prior requires a positive-scale block");
      const double theta = std::exp(x);
      const double z = (theta - spec.location) / spec.scale;
      double value = normal_logpdf(theta, spec.location, spec.scale) + x;
      double d = -z / spec.scale * theta + 1.0;
      return {value, d};
    }
  }
  fail(ErrorKind::UnknownPriorFamily, "unhandled prior family");
}

}  // namespace spfit
