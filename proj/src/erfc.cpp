#include <cmath>
#include <numbers>

#include "mcvd/channel.hpp"

namespace mcvd {
namespace {

constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;
constexpr double kSeriesCutoff = 2.5;

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)).
// Every term is positive so there is no cancellation for moderate x.
double erf_series(double x) {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 1; n < 200; ++n) {
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return 2.0 * kInvSqrtPi * std::exp(-x2) * sum;
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm.
double erfc_continued_fraction(double x) {
    constexpr double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 500; ++n) {
        const double a = 0.5 * n;
        d = x + a * d;
        if (std::abs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return kInvSqrtPi * std::exp(-x * x) / f;
}

}  // namespace

double erfc(double x) {
    if (std::isnan(x)) return x;
    if (x < 0.0) return 2.0 - erfc(-x);
    if (x < kSeriesCutoff) return 1.0 - erf_series(x);
    if (x > 27.5) return 0.0;
    return erfc_continued_fraction(x);
}

}  // namespace mcvd
