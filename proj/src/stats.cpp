#include "ted/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ted/error.hpp"

namespace ted {

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta: continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw ArgumentError("incomplete beta: shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("incomplete beta: x must lie in [0, 1]");
    if (x == 0.0 || x == 1.0) return x;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (!(dof > 0)) throw ArgumentError("student t: degrees of freedom must be positive");
    if (std::isnan(t)) throw NumericError("student t: statistic is NaN");
    if (std::isinf(t)) return 0.0;
    return regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

CorrelationResult pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ArgumentError("pearson: series lengths differ");
    const std::size_t n = xs.size();
    if (n < 3) throw ArgumentError("pearson: at least 3 samples are required");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw NumericError("pearson: non-finite sample");
        mx += xs[i], my += ys[i];
    }
    mx /= n, my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy, sxx += dx * dx, syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) throw NumericError("pearson: zero variance");
    CorrelationResult out;
    out.n = n;
    out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double dof = static_cast<double>(n - 2);
    const double one_minus = 1.0 - out.r * out.r;
    out.p = one_minus <= 0 ? 0.0
                           : student_t_two_sided_p(out.r * std::sqrt(dof / one_minus), dof);
    return out;
}

std::string CorrelationResult::to_record() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "r %.6f\np %.6g\nn %zu\n", r, p, n);
    return buf;
}

} // namespace ted
