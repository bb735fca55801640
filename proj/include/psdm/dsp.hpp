#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

// Shared numeric primitives: Hadamard codes, SRRC pulse shaping, PI
// loop-gain design and FIR filtering. Everything here is a pure function
// of its inputs.

namespace psdm {

using cplx = std::complex<double>;

// Uniformly sampled real passband signal (bus-voltage ripple or full bus).
struct PassbandStream {
  std::vector<double> samples;
  double fs = 0.0;  // samples/second
};

// Complex sample sequence after down-conversion.
struct BasebandStream {
  std::vector<cplx> samples;
  double fs = 0.0;
};

struct SampleRateConfig {
  double fs_passband = 64000.0;  // samples/second
  double fc_carrier = 16000.0;   // Hz
  double chip_rate = 8000.0;     // Hz, 1/Tc
  int sps_passband = 8;          // samples per chip at the front end
  int sps_timing = 2;            // samples per chip entering the timing loop

  double tc() const { return 1.0 / chip_rate; }
  void validate() const;
};

struct HadamardMatrix {
  int order = 0;
  std::vector<std::vector<int>> rows;  // +1/-1 entries
};

struct PulseShape {
  std::vector<double> taps;
  double rolloff = 0.0;
  int span = 0;  // chips
  int sps = 0;   // samples per chip
  double energy = 0.0;
  // Delay through the filter in samples, (taps-1)/2.
  double group_delay() const { return 0.5 * (double(taps.size()) - 1.0); }
};

// PI loop-filter gains. kp is the paper's proportional term, ki the
// integral term; both carry the 1/(k0*kd) factor, so they may be negative.
struct LoopGains {
  double kp = 0.0;
  double ki = 0.0;
  double bn = 0.0;    // noise bandwidth, Hz
  double zeta = 0.0;  // damping
  double k0 = 0.0;    // NCO gain
  double kd = 0.0;    // detector gain
  double tc = 0.0;    // chip interval, seconds
};

// FIR output with the filter's group delay attached so downstream sample
// indices stay exact.
template <typename T>
struct FirResult {
  std::vector<T> samples;  // full linear convolution, len(x)+len(taps)-1
  double group_delay = 0.0;
};

// H_{2n} = [[H_n, H_n], [H_n, -H_n]], H_1 = [1].
HadamardMatrix hadamard(int order);

// Row `load_index` of H_8; the 8-chip spreading code of one load.
std::vector<int> spreading_code(int load_index);

// Unit-energy square-root raised-cosine pulse.
PulseShape make_pulse_shape(double rolloff, int span, int sps);

// Proportional/integral gains of the second-order loop for noise
// bandwidth bn; wn = 1.89*bn.
LoopGains loop_gains(double bn, double zeta, double k0, double kd, double tc);

FirResult<double> fir_filter(const std::vector<double>& x,
                             const std::vector<double>& taps);
FirResult<cplx> fir_filter(const std::vector<cplx>& x,
                           const std::vector<double>& taps);

}  // namespace psdm
