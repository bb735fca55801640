#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "psdm/dsp.hpp"

// Channel impairments applied to the transmitted bus waveform. All
// operations act on the information ripple only; the DC component of the
// bus voltage passes through untouched.

namespace psdm {

constexpr double kSnrClean = std::numeric_limits<double>::infinity();

struct ImpairmentConfig {
  // (start time s, gain factor); piecewise constant, must cover t = 0.
  std::vector<std::pair<double, double>> gain_schedule{{0.0, 1.0}};
  double phase_offset_rad = 0.0;
  double freq_offset_hz = 0.0;
  double sro_hz = 0.0;       // chip-clock offset in Hz
  double snr_db = kSnrClean;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Random piecewise-constant gain profile: one draw from [gmin, gmax] per
// `period_s`, covering `duration_s`.
std::vector<std::pair<double, double>> random_gain_schedule(
    double period_s, double duration_s, double gmin, double gmax,
    std::uint64_t seed);

PassbandStream apply_gain_profile(
    const PassbandStream& signal,
    const std::vector<std::pair<double, double>>& schedule);

// Carrier offset injected at the channel: after nominal downconversion the
// receiver sees a residual rotation exp(j(2*pi*df*t + dphi)).
PassbandStream apply_cfo(const PassbandStream& signal, double freq_offset_hz,
                         double phase_offset_rad);

// Chip-clock mismatch: resample by (chip_rate + sro)/chip_rate with a
// windowed-sinc interpolator.
PassbandStream apply_sro(const PassbandStream& signal, double sro_hz,
                         double chip_rate);

PassbandStream add_awgn(const PassbandStream& signal, double snr_db,
                        std::uint64_t rng_seed);

// Full stack in order gain -> CFO -> SRO -> AWGN.
PassbandStream apply_impairments(const PassbandStream& signal,
                                 const ImpairmentConfig& cfg,
                                 double chip_rate);

}  // namespace psdm
