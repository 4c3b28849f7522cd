#pragma once

#include <string>
#include <vector>

#include "cv2x/regression.hpp"

namespace cv2xtest {

/// The reference coefficient table shipped with the project
/// (data/default_coefficients.csv), inlined for tests that need rows with
/// known signs and magnitudes.
inline cv2x::CoefficientTable reference_table() {
  const double alpha[] = {-0.83, -0.71, -0.61, -0.67, -0.72, -0.76, -0.74};
  const double beta[] = {0.52, 0.19, 0.12, 0.09, 0.06, -0.02, 0.25};
  const double gamma[] = {1.00, 1.42, 1.26, 1.44, 1.54, 1.73, 1.25};
  const double r2[] = {0.28, 0.46, 0.51, 0.59, 0.68, 0.72, 0.46};
  const long n[] = {321, 584, 598, 418, 203, 49, 8};
  std::vector<cv2x::CoefficientRow> rows(7);
  for (int i = 0; i < 7; ++i)
    rows[i] = {i, alpha[i], beta[i], gamma[i], r2[i], n[i], ""};
  return cv2x::CoefficientTable(std::move(rows));
}

inline std::string fixture_coefficients_path() {
  return std::string(CV2X_SOURCE_DIR) + "/data/default_coefficients.csv";
}

inline std::string cli_path() { return CV2X_CLI_PATH; }

}  // namespace cv2xtest
