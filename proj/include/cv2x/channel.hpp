#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cv2x/rng.hpp"

namespace cv2x {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double w) {
  return w > 0 ? 10.0 * std::log10(w) + 30.0
               : -std::numeric_limits<double>::infinity();
}

inline double to_db(double linear) {
  return linear > 0 ? 10.0 * std::log10(linear)
                    : -std::numeric_limits<double>::infinity();
}

/// Radio parameters shared by every link computation.
///
/// k_ref defaults to the free-space (Friis) constant at the 2 GHz carrier
/// with d0 = 1 m: (lambda / 4 pi d0)^2 ~= 1.4248e-4.
struct ChannelParams {
  double k_ref = 1.4248358585182895e-4;
  double d0 = 1.0;          // reference distance, m
  double omega = 2.0;       // pathloss exponent
  double carrier_hz = 2e9;
  double noise_dbm = -112.45;
  double noise_figure_db = 9.0;
  double coherence_gamma = 1.0;  // scales the fading decorrelation rate

  double noise_watts() const { return dbm_to_watts(noise_dbm + noise_figure_db); }

  void validate() const {
    if (omega < 2.0) throw std::runtime_error("channel: omega must be >= 2");
    if (d0 <= 0.0) throw std::runtime_error("channel: d0 must be > 0");
    if (k_ref <= 0.0) throw std::runtime_error("channel: k_ref must be > 0");
    if (carrier_hz <= 0.0) throw std::runtime_error("channel: carrier_hz must be > 0");
    if (coherence_gamma <= 0.0)
      throw std::runtime_error("channel: coherence_gamma must be > 0");
  }
};

/// Distance-power pathloss gain K * (d0/d)^omega.
inline double pathloss(const ChannelParams& params, double d_m) {
  if (d_m <= 0.0)
    throw std::domain_error("pathloss: degenerate geometry, d must be > 0");
  return params.k_ref * std::pow(params.d0 / d_m, params.omega);
}

/// Doppler shift of a link with relative speed v_rel (m/s).
inline double doppler(const ChannelParams& params, double v_rel) {
  if (v_rel < 0.0) throw std::invalid_argument("doppler: v_rel must be >= 0");
  return 2.0 * params.carrier_hz * v_rel / 3.0e8;
}

/// Mean amplitude coefficient of one link in one subframe.
struct ChannelCoefficient {
  double value = 1.0;
};

/// Rayleigh-amplitude fading with exponential temporal correlation.
///
/// The state is a complex Gaussian with unit mean-square amplitude; each
/// draw mixes the previous state with fresh noise using
/// rho = exp(-doppler_hz * dt / coherence_gamma), so zero Doppler keeps the
/// coefficient frozen and large Doppler decorrelates consecutive subframes.
class FadingProcess {
 public:
  explicit FadingProcess(SimRng rng) : rng_(rng) {
    const double inv_sqrt2 = 0.7071067811865476;
    re_ = rng_.gaussian() * inv_sqrt2;
    im_ = rng_.gaussian() * inv_sqrt2;
  }

  ChannelCoefficient draw(double doppler_hz, double dt_s, double coherence_gamma) {
    const double rho = std::exp(-doppler_hz * dt_s / coherence_gamma);
    const double mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double inv_sqrt2 = 0.7071067811865476;
    re_ = rho * re_ + mix * rng_.gaussian() * inv_sqrt2;
    im_ = rho * im_ + mix * rng_.gaussian() * inv_sqrt2;
    return {std::hypot(re_, im_)};
  }

  ChannelCoefficient current() const { return {std::hypot(re_, im_)}; }

 private:
  SimRng rng_;
  double re_ = 1.0;
  double im_ = 0.0;
};

/// Fresh independent coefficient (no temporal correlation).
inline ChannelCoefficient draw_channel(SimRng& rng) {
  const double inv_sqrt2 = 0.7071067811865476;
  const double re = rng.gaussian() * inv_sqrt2;
  const double im = rng.gaussian() * inv_sqrt2;
  return {std::hypot(re, im)};
}

/// Received power in watts for a transmit power, pathloss gain and channel.
inline double rx_power(double tx_power_dbm, double gain,
                       const ChannelCoefficient& ch) {
  if (gain < 0.0) throw std::invalid_argument("rx_power: gain must be >= 0");
  return dbm_to_watts(tx_power_dbm) * gain * ch.value * ch.value;
}

/// One co-resource interferer as seen by a receiver.
struct InterferenceSource {
  double tx_power_dbm = 26.0;
  double distance_m = 1.0;
  ChannelCoefficient ch;
};

/// Sum of received interferer powers. Callers must pass only transmitters
/// occupying the same subframe and channel as the link under test, with the
/// intended transmitter excluded.
inline double total_interference(std::span<const InterferenceSource> interferers,
                                 const ChannelParams& params) {
  double sum = 0.0;
  for (const InterferenceSource& s : interferers)
    sum += rx_power(s.tx_power_dbm, pathloss(params, s.distance_m), s.ch);
  return sum;
}

/// Linear SINR: signal over interference plus noise (noise figure included).
inline double sinr(double signal_w, double interference_w,
                   const ChannelParams& params) {
  if (signal_w < 0.0) throw std::invalid_argument("sinr: signal must be >= 0");
  if (interference_w < 0.0)
    throw std::invalid_argument("sinr: interference must be >= 0");
  return signal_w / (interference_w + params.noise_watts());
}

inline double sinr_db(double signal_w, double interference_w,
                      const ChannelParams& params) {
  return to_db(sinr(signal_w, interference_w, params));
}

}  // namespace cv2x
