#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace divscope::util {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); needs at least two values.
double sample_sd(std::span<const double> xs);
// Population standard deviation (n denominator).
double population_sd(std::span<const double> xs);

// Standardizes a series with population moments so the result has mean 0 and
// sd 1. Returns nullopt when fewer than two values or the series is constant.
std::optional<std::vector<double>> zscore(std::span<const double> xs);

// Trailing rolling mean over up to `window` points; window 1 is the identity.
std::vector<double> rolling_mean(std::span<const double> xs, std::size_t window);

// Regularized incomplete beta I_x(a, b) via Lentz continued fractions.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p-value for a Student-t statistic with df degrees of freedom.
double student_t_p_two_sided(double t, double df);

// Two-sided critical value: |t| with P(|T| > t) == alpha.
double student_t_critical(double df, double alpha);

// Slope, intercept and slope standard error of a simple y-on-x regression.
struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
TrendFit linear_trend(std::span<const double> y);

}  // namespace divscope::util
