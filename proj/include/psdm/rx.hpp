#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "psdm/dsp.hpp"
#include "psdm/tx.hpp"

// Self-synchronizing receiver: downconversion, matched filtering, AGC,
// decision-feedback carrier loop, Gardner timing recovery with a cubic
// Farrow interpolator, correlator frame sync, despreading and DBPSK
// demodulation.

namespace psdm {

// ---------------------------------------------------------------- AGC

struct AgcState {
  double x = 1.0;       // divide-by factor (applied multiplicatively)
  double r = 1.0;       // reference level R
  double alpha = 0.01;  // step size
};

// y = x*u; x <- x*(1 - alpha*|u|) + alpha*R. The gain is clamped to
// [1e-6, 1e6] so all-zero stretches (guard chips) cannot run it away.
cplx agc_step(AgcState& state, cplx u);

// ---------------------------------------------------------- carrier loop

// Angular distance of y to the nearest BPSK symbol (0 or pi).
// |y| below `degenerate_eps` returns 0 and sets *degenerate.
double ped(cplx y, bool* degenerate = nullptr);

struct CarrierLoopState {
  LoopGains gains;
  double integrator = 0.0;
  double phase_acc = 0.0;  // current correction phase, wrapped to (-pi, pi]
  double last_error = 0.0;
};

// y = x * exp(-j*phase_acc); PI update of the accumulator from ped(y).
cplx carrier_sync_step(CarrierLoopState& state, cplx x);

// Mean PED output over both BPSK symbols as a function of the true offset.
std::vector<std::pair<double, double>> ped_s_curve(
    const std::vector<double>& phase_grid);

// ---------------------------------------------------------- timing loop

// Cubic fractional-delay interpolation. Window ordering follows the
// coefficient table: window[0] = i=-2 (newest sample), window[1] = i=-1,
// window[2] = i=0 (base point), window[3] = i=1 (oldest). The result is
// the signal value mu sample intervals past the base point; mu = 0
// returns window[2] exactly.
double farrow_interpolate(const std::array<double, 4>& window, double mu);
cplx farrow_interpolate(const std::array<cplx, 4>& window, double mu);

// e = Re{ conj(y_half) * (y_prev - y_curr) }, samples spaced Tc/2.
double gardner_ted(cplx y_prev, cplx y_half, cplx y_curr);

struct TimingLoopState {
  LoopGains gains;
  double integrator = 0.0;
  double mu = 0.0;       // fractional delay, [0, 1) in input samples
  double counter = 0.0;  // modulo-1 decrementing counter
  bool strobe = false;
  int n = 2;  // samples per chip at the loop input
  // Last 4 inputs, newest last.
  std::array<cplx, 4> history{};
  cplx chip_prev{};  // previous strobe output
  double nu = 0.0;     // loop-filter output
  double last_ted = 0.0;
};

// One modulo-1 counter step: counter <- (counter - M) mod 1 with
// M = 1/N + nu. Returns the strobe flag; on strobe, state.mu is updated
// to N * (counter value before the decrement).
bool timing_control_step(TimingLoopState& state, double nu);

struct TimingOutput {
  std::vector<cplx> chips;
  // Position of each chip in input samples: basepoint index + mu.
  std::vector<double> chip_positions;
  std::vector<double> ted_trace;  // one entry per chip
  std::vector<double> mu_trace;   // counter mu, per chip
  bool unlocked = false;  // loss-of-signal diagnostic
};

class TimingRecovery {
 public:
  TimingRecovery(const LoopGains& gains, int sps);

  // Feed one input sample; returns a chip sample when the strobe fires.
  std::optional<cplx> push(cplx x);

  const TimingLoopState& state() const { return st_; }
  // Basepoint of the most recent strobe, in input samples since start.
  double last_chip_position() const { return last_pos_; }
  bool unlocked() const { return zero_run_ >= 100 * st_.n; }

 private:
  TimingLoopState st_;
  std::array<cplx, 4> prev_win_{};
  std::int64_t sample_index_ = -1;
  double last_pos_ = 0.0;
  int zero_run_ = 0;
  int warmup_ = 0;
};

// Batch driver over a 2-samples/chip stream.
TimingOutput timing_recovery(const std::vector<cplx>& stream,
                             const LoopGains& gains);

// ------------------------------------------------------------ frame sync

struct FrameSyncEvent {
  std::size_t payload_start_chip = 0;  // chip index of first payload chip
  double metric = 0.0;                 // normalized, pre-nonlinearity
  bool ambiguous = false;  // a second qualifying peak within one frame
};

class FrameSync {
 public:
  // `code` selects the 64-chip sync codeword; threshold applies to the
  // normalized pre-nonlinearity metric.
  FrameSync(int code, double threshold = 0.5,
            std::size_t frame_len_chips = 470);

  std::optional<FrameSyncEvent> push(cplx chip);

  double last_metric() const { return last_metric_; }       // pre-nonlinearity
  double last_metric_nl() const { return last_metric_ * last_metric_; }
  std::size_t chips_seen() const { return chip_count_; }

 private:
  double metric_now() const;

  std::vector<double> pattern_;  // 64 codeword chips + 14 zero guard taps
  double threshold_;
  std::size_t frame_len_;
  std::vector<cplx> ring_;  // doubled buffer for contiguous windows
  std::size_t pos_ = 0;
  std::size_t chip_count_ = 0;
  double last_metric_ = 0.0;
  // Peak tracking above threshold.
  bool tracking_ = false;
  double peak_metric_ = 0.0;
  std::size_t peak_chip_ = 0;
  int since_peak_ = 0;
  // Suppression window after an event.
  bool have_event_ = false;
  std::size_t last_event_chip_ = 0;
  double last_event_metric_ = 0.0;
};

// ---------------------------------------------------- despread and demod

// symbol k = (1/8) * sum_m chips[start + 8k + m] * code[m]; as many whole
// symbols as the stream holds. Throws if not even one fits.
std::vector<cplx> despread(const std::vector<cplx>& chips,
                           const std::vector<int>& code, std::size_t start);

// bit k = 1 iff Re{ s(k) * conj(s(k-1)) } < 0.
std::vector<int> dbpsk_demod(const std::vector<cplx>& symbols);

// ------------------------------------------------------------- receiver

struct ReceiverConfig {
  SampleRateConfig rates;
  PulseShape pulse;  // defaulted to the transmit shape when taps empty
  double agc_reference = 1.0;
  double agc_alpha = 0.01;
  double carrier_bn = 200.0;
  double timing_bn = 100.0;
  double zeta = 0.7071;
  double carrier_k0 = 1.0, carrier_kd = 1.0;
  double timing_k0 = -1.0, timing_kd = 2.55;
  double sync_threshold = 0.5;
  int payload_bits = 48;
  bool record_traces = true;
};

struct Detection {
  EnergyPacketMessage msg;
  double time_s = 0.0;  // valid-data timestamp
  std::size_t payload_start_chip = 0;
  double sync_metric = 0.0;
  bool crc_ok = false;
};

struct ReceiverDiagnostics {
  // Per decimated sample (2 samples/chip).
  std::vector<double> agc_gain;
  std::vector<double> phase_err;
  std::vector<double> phase_acc;
  // Per chip.
  std::vector<double> ted_err;
  std::vector<double> mu;           // fractional chip sampling phase, [0,1)
  std::vector<double> corr_metric;  // normalized frame-sync metric
  std::vector<Detection> crc_failures;
  bool timing_unlocked = false;
};

struct ReceiverResult {
  std::vector<Detection> messages;
  std::vector<cplx> chips;  // timing-recovered chip stream
  ReceiverDiagnostics diag;
};

// Full pipeline over a bus-voltage capture for the load using spreading
// code `load_code`.
ReceiverResult receive(const PassbandStream& signal, int load_code,
                       const ReceiverConfig& cfg);

}  // namespace psdm
