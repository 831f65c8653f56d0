#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "refwalk/errors.hpp"

namespace refwalk::stats {

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

namespace detail {

inline double upper_tail(double statistic, int dof) {
  if (dof <= 0) return 1.0;
  const boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace detail

/// Goodness of fit of counts against probabilities. Cells with expected count below
/// `min_expected` are pooled into one cell.
inline ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed, std::span<const double> probabilities,
                                      double min_expected = 5.0) {
  if (observed.size() != probabilities.size()) throw Error("chi_square_gof: size mismatch");
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  if (total == 0.0) throw Error("chi_square_gof: no observations");
  double mass = 0.0;
  for (double p : probabilities) mass += p;
  ChiSquareResult r;
  double pooled_o = 0.0, pooled_e = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = total * probabilities[i] / mass;
    const double o = static_cast<double>(observed[i]);
    if (e < min_expected) {
      pooled_o += o;
      pooled_e += e;
      continue;
    }
    r.statistic += (o - e) * (o - e) / e;
    ++cells;
  }
  if (pooled_e > 0.0) {
    r.statistic += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++cells;
  } else if (pooled_o > 0.0) {
    // mass observed where none was expected
    r.statistic = INFINITY;
    r.dof = std::max(cells, 1);
    r.p_value = 0.0;
    return r;
  }
  r.dof = cells - 1;
  r.p_value = detail::upper_tail(r.statistic, r.dof);
  return r;
}

/// Two-sample chi-square homogeneity test on count vectors over the same cells.
inline ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                             double min_expected = 5.0) {
  if (a.size() != b.size()) throw Error("chi_square_two_sample: size mismatch");
  double na = 0.0, nb = 0.0;
  for (auto x : a) na += static_cast<double>(x);
  for (auto x : b) nb += static_cast<double>(x);
  if (na == 0.0 || nb == 0.0) throw Error("chi_square_two_sample: empty sample");
  const double n = na + nb;
  ChiSquareResult r;
  double pa = 0.0, pb = 0.0;
  int cells = 0;
  auto add = [&](double oa, double ob) {
    const double col = oa + ob;
    const double ea = na * col / n, eb = nb * col / n;
    r.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    ++cells;
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double oa = static_cast<double>(a[i]), ob = static_cast<double>(b[i]);
    if ((oa + ob) * std::min(na, nb) / n < min_expected) {
      pa += oa;
      pb += ob;
    } else {
      add(oa, ob);
    }
  }
  if (pa + pb > 0.0) add(pa, pb);
  r.dof = cells - 1;
  r.p_value = detail::upper_tail(r.statistic, r.dof);
  return r;
}

struct MeanEstimate {
  double mean = 0.0;
  double half_width = 0.0;  // normal-approximation confidence half-width
  std::size_t count = 0;
};

inline MeanEstimate mean_ci(std::span<const double> values, double confidence = 0.95) {
  MeanEstimate m;
  m.count = values.size();
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    m.half_width = INFINITY;
    return m;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + confidence / 2.0);
  m.half_width = z * sd / std::sqrt(static_cast<double>(values.size()));
  return m;
}

/// Total variation distance between two probability vectors.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("total_variation: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return d / 2.0;
}

/// Empirical distribution of counts.
inline std::vector<double> normalize(std::span<const std::uint64_t> counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0.0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / total;
  return out;
}

}  // namespace refwalk::stats
