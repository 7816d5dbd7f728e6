#pragma once

#include <functional>
#include <vector>

namespace polyxport {

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample KS distance between the empirical law of `samples` and `cdf`.
/// `escaped` extra observations are placed at +infinity, so the empirical CDF
/// is defective in the same way as a limit law with escape mass.
KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf,
                       std::size_t escaped = 0);

/// Two-sample KS test (values at +infinity allowed).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Quadratic-time reference implementation of the one-sample distance.
double ks_distance_brute_force(const std::vector<double>& samples, const std::function<double(double)>& cdf);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Upper tail of the chi-square law.
double chi_square_survival(double statistic, double dof);

/// Goodness of fit of counts against expected probabilities (which should sum
/// to one). Cells with tiny expectation are pooled into their neighbour.
ChiSquareResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probabilities,
                               double min_expected = 5.0);

/// Independence test on an r x c contingency table.
ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table);

}  // namespace polyxport
