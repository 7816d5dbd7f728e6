#include "polyxport/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace polyxport {

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

namespace {

double ks_p_value(double d, double n_eff) {
  const double rn = std::sqrt(n_eff);
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

}  // namespace

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf,
                       std::size_t escaped) {
  const std::size_t total = samples.size() + escaped;
  if (total == 0) throw std::invalid_argument("ks_one_sample: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(total);
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double tail = cdf(std::numeric_limits<double>::infinity());
  d = std::max(d, std::abs(static_cast<double>(samples.size()) / n - tail));
  return {d, ks_p_value(d, n), total};
}

double ks_distance_brute_force(const std::vector<double>& samples, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (double t : samples) {
    std::size_t le = 0, lt = 0;
    for (double s : samples) {
      if (s <= t) ++le;
      if (s < t) ++lt;
    }
    const double f = cdf(t);
    d = std::max({d, std::abs(static_cast<double>(le) / n - f), std::abs(static_cast<double>(lt) / n - f)});
  }
  return d;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb)), a.size() + b.size()};
}

double chi_square_survival(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

ChiSquareResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probabilities,
                               double min_expected) {
  if (observed.size() != probabilities.size() || observed.empty())
    throw std::invalid_argument("chi_square_gof: size mismatch");
  double n = 0.0;
  for (double o : observed) n += o;
  std::vector<double> obs, expct;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    acc_o += observed[i];
    acc_e += n * probabilities[i];
    if (acc_e >= min_expected) {
      obs.push_back(acc_o);
      expct.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (expct.empty()) {
      obs.push_back(acc_o);
      expct.push_back(acc_e);
    } else {
      obs.back() += acc_o;
      expct.back() += acc_e;
    }
  }
  ChiSquareResult r;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (expct[i] <= 0.0) {
      if (obs[i] > 0.0) r.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    r.statistic += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  }
  r.dof = static_cast<double>(obs.size()) - 1.0;
  r.p_value = std::isinf(r.statistic) ? 0.0 : chi_square_survival(r.statistic, r.dof);
  return r;
}

ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table) {
  std::vector<double> rows, cols;
  if (table.empty()) throw std::invalid_argument("chi_square_independence: empty table");
  const std::size_t c = table.front().size();
  cols.assign(c, 0.0);
  double n = 0.0;
  for (const auto& row : table) {
    if (row.size() != c) throw std::invalid_argument("chi_square_independence: ragged table");
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      s += row[j];
      cols[j] += row[j];
    }
    rows.push_back(s);
    n += s;
  }
  ChiSquareResult r;
  std::size_t live_rows = 0, live_cols = 0;
  for (double x : rows) live_rows += x > 0.0;
  for (double x : cols) live_cols += x > 0.0;
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double e = rows[i] * cols[j] / n;
      if (e > 0.0) r.statistic += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  if (live_rows < 2 || live_cols < 2) return r;
  r.dof = static_cast<double>((live_rows - 1) * (live_cols - 1));
  r.p_value = chi_square_survival(r.statistic, r.dof);
  return r;
}

}  // namespace polyxport
