#pragma once

#include <cmath>
#include <vector>

#include "nazr/gmm.hpp"

namespace nazr::testing {

// Central finite differences of mean log P(X | model) with respect to every
// parameter, laid out like a FisherVector: [alpha | mu | sigma].
inline std::vector<double> finite_difference_gradient(const GmmModel& m,
                                                      const Matrix& x,
                                                      double h = 1e-5) {
  std::vector<double> out;
  out.reserve(m.k + 2 * m.k * m.d);
  auto probe = [&](auto&& param) {
    GmmModel p = m;
    double& v = param(p);
    const double saved = v;
    v = saved + h;
    const double up = mean_log_likelihood(p, x);
    v = saved - h;
    const double down = mean_log_likelihood(p, x);
    out.push_back((up - down) / (2.0 * h));
  };
  for (std::size_t j = 0; j < m.k; ++j)
    probe([j](GmmModel& p) -> double& { return p.alpha[j]; });
  for (std::size_t i = 0; i < m.k * m.d; ++i)
    probe([i](GmmModel& p) -> double& { return p.mu[i]; });
  for (std::size_t i = 0; i < m.k * m.d; ++i)
    probe([i](GmmModel& p) -> double& { return p.sigma[i]; });
  return out;
}

// |a - b|_2 / |b|_2
inline double vector_relative_error(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace nazr::testing
