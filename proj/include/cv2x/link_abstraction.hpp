#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cv2x/io.hpp"

namespace cv2x {

/// Monotone map from link SINR (dB) to packet success probability.
///
/// The default is a logistic curve; a measured curve can be loaded from a
/// CSV table (`sinr_db,p_success`, strictly increasing sinr_db) and is
/// evaluated by linear interpolation with flat extrapolation at both ends.
/// Doppler deliberately does not enter this map; it only drives the fading
/// correlation in the channel model.
class LinkAbstraction {
 public:
  static LinkAbstraction logistic(double midpoint_db = 2.0, double slope_db = 1.5) {
    if (slope_db <= 0.0)
      throw std::runtime_error("link abstraction: slope_db must be > 0");
    LinkAbstraction a;
    a.midpoint_db_ = midpoint_db;
    a.slope_db_ = slope_db;
    return a;
  }

  static LinkAbstraction table(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2)
      throw std::runtime_error("link abstraction: table needs >= 2 points");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].second < 0.0 || points[i].second > 1.0)
        throw std::runtime_error("link abstraction: p_success outside [0,1]");
      if (i > 0 && points[i].first <= points[i - 1].first)
        throw std::runtime_error("link abstraction: sinr_db not strictly increasing");
      if (i > 0 && points[i].second < points[i - 1].second)
        throw std::runtime_error("link abstraction: curve must be non-decreasing");
    }
    LinkAbstraction a;
    a.points_ = std::move(points);
    return a;
  }

  static LinkAbstraction from_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0]) !=
                             std::vector<std::string>{"sinr_db", "p_success"})
      throw std::runtime_error("link abstraction: expected header 'sinr_db,p_success' in " + path);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto cells = split_csv_line(lines[i]);
      if (cells.size() != 2)
        throw std::runtime_error("link abstraction: bad row in " + path);
      pts.emplace_back(parse_double(cells[0], "sinr_db"),
                       parse_double(cells[1], "p_success"));
    }
    return table(std::move(pts));
  }

  double success_probability(double sinr_db) const {
    if (points_.empty()) {
      const double z = (sinr_db - midpoint_db_) / slope_db_;
      return 1.0 / (1.0 + std::exp(-z));
    }
    if (sinr_db <= points_.front().first) return points_.front().second;
    if (sinr_db >= points_.back().first) return points_.back().second;
    auto hi = std::upper_bound(
        points_.begin(), points_.end(), sinr_db,
        [](double v, const std::pair<double, double>& p) { return v < p.first; });
    auto lo = hi - 1;
    const double t = (sinr_db - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  bool is_table() const { return !points_.empty(); }
  double midpoint_db() const { return midpoint_db_; }
  double slope_db() const { return slope_db_; }

 private:
  LinkAbstraction() = default;
  double midpoint_db_ = 2.0;
  double slope_db_ = 1.5;
  std::vector<std::pair<double, double>> points_;
};

inline double success_probability(const LinkAbstraction& abstraction, double sinr_db) {
  return abstraction.success_probability(sinr_db);
}

}  // namespace cv2x
