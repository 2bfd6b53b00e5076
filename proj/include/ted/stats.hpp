#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace ted {

struct CorrelationResult {
    double r = 0;
    double p = 1; // two-sided
    std::size_t n = 0;

    /// Two-line record: "r <value>" / "p <value>", plus "n <count>".
    std::string to_record() const;
};

/// Regularized incomplete beta I_x(a, b), evaluated with a continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

CorrelationResult pearson(std::span<const double> xs, std::span<const double> ys);

} // namespace ted
