#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cv2x/io.hpp"
#include "cv2x/link_sample.hpp"

namespace cv2x {

/// Floor applied to predicted probabilities so log-utilities stay finite.
inline constexpr double kProbabilityFloor = 1e-3;

/// Fitted coefficients of the two-distance model for one NSV bucket:
/// p = alpha * ln(d) + beta * ln(l) + gamma.
struct CoefficientRow {
  int nsv = 0;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double r_square = std::numeric_limits<double>::quiet_NaN();
  long n_instances = 0;
  std::string diagnostic;  // why the row is unfitted; not serialized

  bool fitted() const {
    return n_instances >= 3 && std::isfinite(alpha) && std::isfinite(beta) &&
           std::isfinite(gamma);
  }
};

/// Rows keyed by NSV, contiguous from 0. Queries above the last row clamp.
class CoefficientTable {
 public:
  CoefficientTable() = default;

  explicit CoefficientTable(std::vector<CoefficientRow> rows) : rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i)
      if (rows_[i].nsv != static_cast<int>(i))
        throw std::runtime_error("coefficient table: NSV keys must be contiguous from 0");
  }

  bool empty() const { return rows_.empty(); }
  int nsv_max() const { return static_cast<int>(rows_.size()) - 1; }
  const std::vector<CoefficientRow>& rows() const { return rows_; }

  const CoefficientRow& row(int nsv) const {
    if (rows_.empty()) throw std::runtime_error("coefficient table is empty");
    if (nsv < 0) nsv = 0;
    if (nsv > nsv_max()) nsv = nsv_max();
    return rows_[static_cast<std::size_t>(nsv)];
  }

  /// Row used for prediction at a given NSV: the clamped row itself when
  /// fitted, otherwise the nearest fitted row (lower NSV preferred).
  const CoefficientRow& effective_row(int nsv) const {
    const CoefficientRow& exact = row(nsv);
    if (exact.fitted()) return exact;
    for (int lo = exact.nsv - 1; lo >= 0; --lo)
      if (rows_[static_cast<std::size_t>(lo)].fitted())
        return rows_[static_cast<std::size_t>(lo)];
    for (int hi = exact.nsv + 1; hi <= nsv_max(); ++hi)
      if (rows_[static_cast<std::size_t>(hi)].fitted())
        return rows_[static_cast<std::size_t>(hi)];
    throw std::runtime_error("coefficient table has no fitted rows");
  }

 private:
  std::vector<CoefficientRow> rows_;
};

namespace detail {

// Solve the 3x3 system A x = b by Gaussian elimination with partial
// pivoting. Returns false when the system is singular.
inline bool solve3(double a[3][3], double b[3], double x[3]) {
  double scale = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) scale = std::max(scale, std::abs(a[r][c]));
  if (scale == 0.0) return false;
  for (int col = 0; col < 3; ++col) {
    int p = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[p][col])) p = r;
    if (p != col) {
      for (int c = 0; c < 3; ++c) std::swap(a[col][c], a[p][c]);
      std::swap(b[col], b[p]);
    }
    if (std::abs(a[col][col]) < 1e-12 * scale) return false;
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return true;
}

}  // namespace detail

/// NSV-bucketed ordinary least squares of p_success on (ln d, ln l, 1).
///
/// Natural logarithms throughout. Samples with NSV above nsv_max are rare
/// and excluded from the fit (prediction clamps to the last row instead).
/// Buckets with fewer than 3 samples, or with singular normal equations,
/// are marked unfitted with a diagnostic. R^2 is reported on the training
/// bucket; an exactly constant target yields R^2 = 1 by the SS_tot = 0
/// convention.
inline CoefficientTable fit(std::span<const LinkSample> samples, int nsv_max) {
  if (nsv_max < 0) throw std::invalid_argument("fit: nsv_max must be >= 0");
  const std::size_t buckets = static_cast<std::size_t>(nsv_max) + 1;

  struct Acc {
    double x11 = 0, x12 = 0, x1 = 0, x22 = 0, x2 = 0;
    double x1y = 0, x2y = 0, y = 0;
    long n = 0;
  };
  std::vector<Acc> acc(buckets);
  for (const LinkSample& s : samples) {
    if (s.nsv < 0) throw std::runtime_error("fit: negative NSV in sample log");
    if (s.nsv > nsv_max) continue;
    if (s.signal_distance_m <= 0.0 || s.main_interferer_distance_m <= 0.0)
      throw std::runtime_error("fit: non-positive distance in sample log");
    Acc& a = acc[static_cast<std::size_t>(s.nsv)];
    const double x1 = std::log(s.signal_distance_m);
    const double x2 = std::log(s.main_interferer_distance_m);
    const double y = s.p_success;
    a.x11 += x1 * x1;
    a.x12 += x1 * x2;
    a.x1 += x1;
    a.x22 += x2 * x2;
    a.x2 += x2;
    a.x1y += x1 * y;
    a.x2y += x2 * y;
    a.y += y;
    a.n += 1;
  }

  std::vector<CoefficientRow> rows(buckets);
  for (std::size_t k = 0; k < buckets; ++k) {
    CoefficientRow& row = rows[k];
    row.nsv = static_cast<int>(k);
    row.n_instances = acc[k].n;
    if (acc[k].n < 3) {
      row.diagnostic = "too few samples (need >= 3)";
      continue;
    }
    const Acc& a = acc[k];
    double lhs[3][3] = {{a.x11, a.x12, a.x1},
                        {a.x12, a.x22, a.x2},
                        {a.x1, a.x2, static_cast<double>(a.n)}};
    double rhs[3] = {a.x1y, a.x2y, a.y};
    double coef[3] = {0, 0, 0};
    if (!detail::solve3(lhs, rhs, coef)) {
      row.diagnostic = "singular normal equations (constant regressor)";
      continue;
    }
    row.alpha = coef[0];
    row.beta = coef[1];
    row.gamma = coef[2];
  }

  // residual pass for R^2
  std::vector<double> ss_res(buckets, 0.0), ss_tot(buckets, 0.0);
  for (const LinkSample& s : samples) {
    if (s.nsv > nsv_max) continue;
    const std::size_t k = static_cast<std::size_t>(s.nsv);
    if (!rows[k].fitted()) continue;
    const double mean = acc[k].y / static_cast<double>(acc[k].n);
    const double pred = rows[k].alpha * std::log(s.signal_distance_m) +
                        rows[k].beta * std::log(s.main_interferer_distance_m) +
                        rows[k].gamma;
    ss_res[k] += (s.p_success - pred) * (s.p_success - pred);
    ss_tot[k] += (s.p_success - mean) * (s.p_success - mean);
  }
  for (std::size_t k = 0; k < buckets; ++k)
    if (rows[k].fitted())
      rows[k].r_square = ss_tot[k] > 0.0 ? 1.0 - ss_res[k] / ss_tot[k] : 1.0;

  return CoefficientTable(std::move(rows));
}

/// Unclamped model value alpha*ln(d) + beta*ln(l) + gamma.
inline double predict_raw(const CoefficientRow& row, double d_m, double l_m) {
  if (d_m <= 0.0 || l_m <= 0.0)
    throw std::invalid_argument("predict: distances must be > 0");
  return row.alpha * std::log(d_m) + row.beta * std::log(l_m) + row.gamma;
}

/// Predicted success probability, clamped to [kProbabilityFloor, 1].
inline double predict_p(const CoefficientTable& table, int nsv, double d_m,
                        double l_m) {
  const double raw = predict_raw(table.effective_row(nsv), d_m, l_m);
  return std::min(1.0, std::max(kProbabilityFloor, raw));
}

inline constexpr const char* kCoefficientCsvHeader =
    "nsv,alpha,beta,gamma,r_square,n_instances";

inline void save_table(const std::string& path, const CoefficientTable& table) {
  std::ostringstream out;
  out << kCoefficientCsvHeader << '\n';
  for (const CoefficientRow& r : table.rows())
    out << r.nsv << ',' << format_double(r.alpha) << ',' << format_double(r.beta)
        << ',' << format_double(r.gamma) << ',' << format_double(r.r_square)
        << ',' << r.n_instances << '\n';
  write_file(path, out.str());
}

inline CoefficientTable load_table(const std::string& path) {
  const auto lines = read_lines(path);
  const auto expected = split_csv_line(kCoefficientCsvHeader);
  if (lines.empty())
    throw std::runtime_error("coefficient table: empty file " + path);
  const auto header = split_csv_line(lines[0]);
  for (const std::string& col : expected)
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw std::runtime_error("coefficient table: missing column '" + col +
                               "' in " + path);
  if (header != expected)
    throw std::runtime_error("coefficient table: unexpected column order in " + path);
  std::vector<CoefficientRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != 6)
      throw std::runtime_error("coefficient table: malformed row in " + path);
    CoefficientRow r;
    r.nsv = static_cast<int>(parse_long(cells[0], "nsv"));
    r.alpha = parse_double(cells[1], "alpha");
    r.beta = parse_double(cells[2], "beta");
    r.gamma = parse_double(cells[3], "gamma");
    r.r_square = parse_double(cells[4], "r_square");
    r.n_instances = parse_long(cells[5], "n_instances");
    rows.push_back(r);
  }
  return CoefficientTable(std::move(rows));
}

}  // namespace cv2x
