#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "cv2x/io.hpp"

namespace cv2x {

/// One logged reception event: the regression row of the pipeline.
///
/// signal_distance_m is the transmitter-receiver distance; the main
/// interferer distance is the receiver's closest co-resource interferer (the
/// RoI-diagonal sentinel when the subframe had none); nsv counts co-resource
/// interferers within the awareness threshold of the receiver.
struct LinkSample {
  int tx_id = 0;
  int rx_id = 0;
  long subframe = 0;
  double signal_distance_m = 0.0;
  double main_interferer_distance_m = 0.0;
  int nsv = 0;
  double sinr_db = 0.0;
  double p_success = 0.0;
  bool received = false;
};

inline constexpr const char* kLinkSampleCsvHeader =
    "tx_id,rx_id,subframe,d_m,l_m,nsv,sinr_db,p_success,received";

inline std::string to_csv(const std::vector<LinkSample>& samples) {
  std::ostringstream out;
  out << kLinkSampleCsvHeader << '\n';
  for (const LinkSample& s : samples) {
    out << s.tx_id << ',' << s.rx_id << ',' << s.subframe << ','
        << format_double(s.signal_distance_m) << ','
        << format_double(s.main_interferer_distance_m) << ',' << s.nsv << ','
        << format_double(s.sinr_db) << ',' << format_double(s.p_success) << ','
        << (s.received ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::vector<LinkSample> samples_from_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
                                     split_csv_line(kLinkSampleCsvHeader))
    throw std::runtime_error(std::string("sample log: expected header '") +
                             kLinkSampleCsvHeader + "'");
  std::vector<LinkSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 9)
      throw std::runtime_error("sample log: expected 9 columns, got " +
                               std::to_string(cells.size()));
    LinkSample s;
    s.tx_id = static_cast<int>(parse_long(cells[0], "tx_id"));
    s.rx_id = static_cast<int>(parse_long(cells[1], "rx_id"));
    s.subframe = parse_long(cells[2], "subframe");
    s.signal_distance_m = parse_double(cells[3], "d_m");
    s.main_interferer_distance_m = parse_double(cells[4], "l_m");
    s.nsv = static_cast<int>(parse_long(cells[5], "nsv"));
    s.sinr_db = parse_double(cells[6], "sinr_db");
    s.p_success = parse_double(cells[7], "p_success");
    s.received = parse_long(cells[8], "received") != 0;
    out.push_back(s);
  }
  return out;
}

inline void save_samples(const std::string& path,
                         const std::vector<LinkSample>& samples) {
  write_file(path, to_csv(samples));
}

inline std::vector<LinkSample> load_samples(const std::string& path) {
  return samples_from_csv_text(read_file(path));
}

}  // namespace cv2x
