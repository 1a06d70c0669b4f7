// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "codiemb/losses.hpp"

namespace codiemb::geometry {

namespace {

constexpr double kMachineEps = std::numeric_limits<double>::epsilon();

double rank_tolerance(const Matrix& x, double sigma_max) {
  return std::max(x.rows, x.cols) * kMachineEps * sigma_max;
}

}  // namespace

// One-sided Jacobi on the columns of A (transposed first when d > n so the
// working matrix is tall).  Rotations are swept until every column pair is
// numerically orthogonal; singular values are the final column norms.
Vec singular_values(const Matrix& x) {
  if (x.rows == 0 || x.cols == 0) throw DegenerateInputError("SVD of empty matrix");
  int m = x.rows, k = x.cols;
  bool transposed = k > m;
  if (transposed) std::swap(m, k);
  // column-major working copy a[(col)*m + row]
  std::vector<double> a(static_cast<size_t>(m) * k);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) {
      int row = transposed ? j : i;
      int col = transposed ? i : j;
      a[static_cast<size_t>(col) * m + row] = x(i, j);
    }

  const double tol = 1e-14;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool converged = true;
    for (int p = 0; p < k - 1; ++p) {
      for (int q = p + 1; q < k; ++q) {
        double* cp = &a[static_cast<size_t>(p) * m];
        double* cq = &a[static_cast<size_t>(q) * m];
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          app += cp[i] * cp[i];
          aqq += cq[i] * cq[i];
          apq += cp[i] * cq[i];
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        converged = false;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (int i = 0; i < m; ++i) {
          double vp = cp[i];
          double vq = cq[i];
          cp[i] = c * vp - s * vq;
          cq[i] = s * vp + c * vq;
        }
      }
    }
    if (converged) break;
  }

  Vec sigma(k);
  for (int j = 0; j < k; ++j) {
    double s = 0.0;
    const double* col = &a[static_cast<size_t>(j) * m];
    for (int i = 0; i < m; ++i) s += col[i] * col[i];
    sigma[j] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

double tok_sim(const Matrix& x) {
  const int n = x.rows;
  if (n < 2) throw DegenerateInputError("tok_sim needs at least 2 rows");
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      total += losses::cosine(x.row(i), x.row(j));
    }
  return total / (static_cast<double>(n) * (n - 1));
}

int numerical_rank(const Matrix& x) {
  Vec sigma = singular_values(x);
  if (sigma.empty() || sigma[0] == 0.0) return 0;
  double tol = rank_tolerance(x, sigma[0]);
  int rank = 0;
  for (double s : sigma)
    if (s > tol) ++rank;
  return rank;
}

double condition_number(const Matrix& x) {
  Vec sigma = singular_values(x);
  double tol = rank_tolerance(x, sigma.empty() ? 0.0 : sigma[0]);
  if (sigma.empty() || sigma.back() <= tol) return std::numeric_limits<double>::infinity();
  return sigma.front() / sigma.back();
}

double svd_entropy(const Matrix& x) {
  Vec sigma = singular_values(x);
  double total = 0.0;
  for (double s : sigma) total += s * s;
  if (total == 0.0) throw DegenerateInputError("svd_entropy of zero matrix");
  double h = 0.0;
  for (double s : sigma) {
    double p = s * s / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

GeometryReport diagnose_corpus(const TokenMatrixFn& token_matrix,
                               const std::vector<std::string>& texts) {
  GeometryReport report;
  double sum_tok = 0.0, sum_rank = 0.0, sum_cond = 0.0, sum_ent = 0.0;
  int cond_finite = 0;
  for (const auto& text : texts) {
    Matrix x = token_matrix(text);
    if (x.rows < 2) {
      ++report.skipped_count;
      continue;
    }
    sum_tok += tok_sim(x);
    sum_rank += numerical_rank(x);
    double kappa = condition_number(x);
    if (std::isfinite(kappa)) {
      sum_cond += kappa;
      ++cond_finite;
    } else {
      ++report.condition_inf_count;
    }
    sum_ent += svd_entropy(x);
    ++report.text_count;
  }
  if (report.text_count > 0) {
    report.tok_sim = sum_tok / report.text_count;
    report.mean_rank = sum_rank / report.text_count;
    report.svd_entropy = sum_ent / report.text_count;
    report.condition_number =
        cond_finite > 0 ? sum_cond / cond_finite : std::numeric_limits<double>::infinity();
  }
  return report;
}

}  // namespace codiemb::geometry
