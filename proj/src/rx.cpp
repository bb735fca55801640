#include "psdm/rx.hpp"

#include <algorithm>
#include <cmath>

#include "psdm/kernels.hpp"

namespace psdm {

// ---------------------------------------------------------------- AGC

cplx agc_step(AgcState& state, cplx u) {
  const cplx y = state.x * u;
  state.x = state.x * (1.0 - state.alpha * std::abs(u)) +
            state.alpha * state.r;
  state.x = std::clamp(state.x, 1e-6, 1e6);
  return y;
}

// ---------------------------------------------------------- carrier loop

double ped(cplx y, bool* degenerate) {
  if (std::abs(y) < 1e-12) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  // Fold Re < 0 onto the positive half-plane: distance to the nearest of
  // the two BPSK symbols.
  const double re = y.real() >= 0.0 ? y.real() : -y.real();
  const double im = y.real() >= 0.0 ? y.imag() : -y.imag();
  return std::atan2(im, re);
}

namespace {

double wrap_pi(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace

cplx carrier_sync_step(CarrierLoopState& state, cplx x) {
  const cplx y = x * std::polar(1.0, -state.phase_acc);
  const double e = ped(y);
  state.last_error = e;
  state.integrator += state.gains.ki * e;
  state.phase_acc =
      wrap_pi(state.phase_acc + state.gains.kp * e + state.integrator);
  return y;
}

std::vector<std::pair<double, double>> ped_s_curve(
    const std::vector<double>& phase_grid) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(phase_grid.size());
  for (double phi : phase_grid) {
    const double ep = ped(std::polar(1.0, phi));
    const double em = ped(std::polar(1.0, phi + M_PI));
    curve.emplace_back(phi, 0.5 * (ep + em));
  }
  return curve;
}

// ---------------------------------------------------------- timing loop

namespace {

// b_l(i) per coefficient table; rows i = -2..1, columns l = 0..3.
constexpr double kFarrow[4][4] = {
    // b0,   b1,     b2,   b3
    {0.0, -1.0 / 6.0, 0.0, 1.0 / 6.0},   // i = -2
    {0.0, 1.0, 0.5, -0.5},               // i = -1
    {1.0, -0.5, -1.0, 0.5},              // i = 0
    {0.0, -1.0 / 3.0, 0.5, -1.0 / 6.0},  // i = 1
};

template <typename T>
T farrow_eval(const std::array<T, 4>& w, double mu) {
  T v[4] = {};
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 4; ++i) v[l] += kFarrow[i][l] * w[std::size_t(i)];
  return ((v[3] * mu + v[2]) * mu + v[1]) * mu + v[0];
}

}  // namespace

double farrow_interpolate(const std::array<double, 4>& window, double mu) {
  return farrow_eval(window, mu);
}

cplx farrow_interpolate(const std::array<cplx, 4>& window, double mu) {
  return farrow_eval(window, mu);
}

double gardner_ted(cplx y_prev, cplx y_half, cplx y_curr) {
  return (std::conj(y_half) * (y_prev - y_curr)).real();
}

bool timing_control_step(TimingLoopState& state, double nu) {
  const double m = 1.0 / double(state.n) + nu;
  double next = state.counter - m;
  const bool strobe = next < 0.0;
  if (strobe)
    state.mu = std::clamp(double(state.n) * state.counter, 0.0, 1.0 - 1e-12);
  next -= std::floor(next);
  state.counter = next;
  state.strobe = strobe;
  return strobe;
}

TimingRecovery::TimingRecovery(const LoopGains& gains, int sps) {
  st_.gains = gains;
  st_.n = sps;
}

std::optional<cplx> TimingRecovery::push(cplx x) {
  ++sample_index_;
  std::rotate(st_.history.begin(), st_.history.begin() + 1,
              st_.history.end());
  st_.history[3] = x;

  if (std::abs(x) < 1e-6)
    ++zero_run_;
  else
    zero_run_ = 0;

  // Window in coefficient order: newest first, basepoint = sample n-2.
  const std::array<cplx, 4> win = {st_.history[3], st_.history[2],
                                   st_.history[1], st_.history[0]};
  const bool strobe = timing_control_step(st_, st_.nu);

  std::optional<cplx> out;
  if (strobe && sample_index_ >= 4) {
    const cplx y = farrow_interpolate(win, st_.mu);  // mu updated on strobe
    // Half-chip point interpolated from the previous window with the same
    // mu, so the three TED taps are exactly half a chip apart even when
    // mu wraps on this strobe.
    const cplx y_half = farrow_interpolate(prev_win_, st_.mu);
    const double e = gardner_ted(st_.chip_prev, y_half, y);
    st_.last_ted = e;
    st_.integrator += st_.gains.ki * e;
    st_.nu = st_.gains.kp * e + st_.integrator;
    st_.chip_prev = y;
    last_pos_ = double(sample_index_ - 2) + st_.mu;
    out = y;
  }
  prev_win_ = win;
  return out;
}

TimingOutput timing_recovery(const std::vector<cplx>& stream,
                             const LoopGains& gains) {
  TimingRecovery loop(gains, 2);
  TimingOutput out;
  for (cplx x : stream) {
    if (auto chip = loop.push(x)) {
      out.chips.push_back(*chip);
      out.chip_positions.push_back(loop.last_chip_position());
      out.ted_trace.push_back(loop.state().last_ted);
      out.mu_trace.push_back(loop.state().mu);
    }
    if (loop.unlocked()) out.unlocked = true;
  }
  return out;
}

// ------------------------------------------------------------ frame sync

FrameSync::FrameSync(int code, double threshold, std::size_t frame_len_chips)
    : threshold_(threshold), frame_len_(frame_len_chips) {
  const std::vector<int> cw = sync_codeword(code);
  pattern_.assign(cw.begin(), cw.end());
  pattern_.resize(kSyncWordChips, 0.0);
  ring_.assign(2 * kSyncWordChips, cplx{});
}

double FrameSync::metric_now() const {
  // Window of the last 78 chips, oldest first, contiguous in the doubled
  // ring. pos_ is the slot just written.
  const std::size_t start = pos_ + 1;
  const cplx corr =
      kernels::dot_cr(ring_.data() + start, pattern_.data(), kSyncWordChips);
  const double energy = kernels::energy(ring_.data() + start, kSyncWordChips);
  const double c2 = corr.real() * corr.real() + corr.imag() * corr.imag();
  return c2 / (double(kSyncCodewordChips) * energy + 1e-30);
}

std::optional<FrameSyncEvent> FrameSync::push(cplx chip) {
  pos_ = (pos_ + 1) % kSyncWordChips;
  ring_[pos_] = chip;
  ring_[pos_ + kSyncWordChips] = chip;
  const std::size_t cur = chip_count_++;
  const double metric = metric_now();
  last_metric_ = metric;

  std::optional<FrameSyncEvent> finalize;
  if (!tracking_) {
    if (metric >= threshold_) {
      tracking_ = true;
      peak_metric_ = metric;
      peak_chip_ = cur;
      since_peak_ = 0;
    }
  } else {
    if (metric > peak_metric_) {
      peak_metric_ = metric;
      peak_chip_ = cur;
      since_peak_ = 0;
    } else if (++since_peak_ >= 4 || metric < 0.5 * threshold_) {
      tracking_ = false;
      FrameSyncEvent ev;
      ev.payload_start_chip = peak_chip_ + 1;
      ev.metric = peak_metric_;
      if (have_event_ && peak_chip_ - last_event_chip_ < frame_len_) {
        // Second qualifying peak inside one frame: keep the larger one.
        if (peak_metric_ > last_event_metric_) {
          ev.ambiguous = true;
          finalize = ev;
          last_event_chip_ = peak_chip_;
          last_event_metric_ = peak_metric_;
        }
      } else {
        finalize = ev;
        have_event_ = true;
        last_event_chip_ = peak_chip_;
        last_event_metric_ = peak_metric_;
      }
    }
  }
  return finalize;
}

// ---------------------------------------------------- despread and demod

std::vector<cplx> despread(const std::vector<cplx>& chips,
                           const std::vector<int>& code, std::size_t start) {
  if (code.empty()) throw std::invalid_argument("empty spreading code");
  if (start + code.size() > chips.size())
    throw std::invalid_argument("stream shorter than one code length");
  const std::size_t nsym = (chips.size() - start) / code.size();
  std::vector<cplx> symbols(nsym);
  const double inv = 1.0 / double(code.size());
  for (std::size_t k = 0; k < nsym; ++k) {
    cplx acc{};
    for (std::size_t m = 0; m < code.size(); ++m)
      acc += chips[start + k * code.size() + m] * double(code[m]);
    symbols[k] = acc * inv;
  }
  return symbols;
}

std::vector<int> dbpsk_demod(const std::vector<cplx>& symbols) {
  if (symbols.size() < 2)
    throw std::invalid_argument("need at least 2 symbols");
  std::vector<int> bits(symbols.size() - 1);
  for (std::size_t k = 1; k < symbols.size(); ++k)
    bits[k - 1] = (symbols[k] * std::conj(symbols[k - 1])).real() < 0.0;
  return bits;
}

// ------------------------------------------------------------- receiver

namespace {

EnergyPacketMessage parse_fields(const std::vector<int>& bits) {
  // Field extraction without the CRC check, for diagnostics.
  auto take = [&](std::size_t pos, int width) {
    std::uint32_t v = 0;
    for (int b = 0; b < width; ++b)
      v = (v << 1) | std::uint32_t(bits[pos + std::size_t(b)] & 1);
    return v;
  };
  EnergyPacketMessage m;
  m.dest_address = std::uint8_t(take(0, 8));
  m.current_ma = std::uint16_t(take(8, 16));
  m.duration_ms = std::uint16_t(take(24, 16));
  return m;
}

}  // namespace

ReceiverResult receive(const PassbandStream& signal, int load_code,
                       const ReceiverConfig& cfg) {
  cfg.rates.validate();
  const PulseShape pulse =
      cfg.pulse.taps.empty()
          ? make_pulse_shape(0.5, 8, cfg.rates.sps_passband)
          : cfg.pulse;
  const double tc = cfg.rates.tc();
  const int payload_symbols = cfg.payload_bits + 1;
  const std::size_t payload_chip_count =
      std::size_t(payload_symbols) * kSpreadFactor;
  const std::size_t frame_len = kSyncWordChips + payload_chip_count;

  // DC removal and complex downconversion.
  double dc = 0.0;
  for (double v : signal.samples) dc += v;
  dc /= std::max<std::size_t>(signal.samples.size(), 1);
  std::vector<cplx> bb(signal.samples.size());
  const double w0 = 2.0 * M_PI * cfg.rates.fc_carrier / cfg.rates.fs_passband;
  for (std::size_t k = 0; k < bb.size(); ++k)
    bb[k] = 2.0 * (signal.samples[k] - dc) * std::polar(1.0, -w0 * double(k));

  FirResult<cplx> mf = fir_filter(bb, pulse.taps);

  const int decim = cfg.rates.sps_passband / cfg.rates.sps_timing;
  AgcState agc;
  agc.r = cfg.agc_reference;
  agc.alpha = cfg.agc_alpha;
  CarrierLoopState carrier;
  carrier.gains =
      loop_gains(cfg.carrier_bn, cfg.zeta, cfg.carrier_k0, cfg.carrier_kd, tc);
  TimingRecovery timing(
      loop_gains(cfg.timing_bn, cfg.zeta, cfg.timing_k0, cfg.timing_kd, tc),
      cfg.rates.sps_timing);
  FrameSync fsync(load_code, cfg.sync_threshold, frame_len);
  const std::vector<int> code = spreading_code(load_code);

  ReceiverResult res;
  std::vector<double> chip_pos;  // decimated-sample position per chip
  std::vector<FrameSyncEvent> pending;

  auto try_decode = [&]() {
    while (!pending.empty()) {
      const FrameSyncEvent ev = pending.front();
      if (res.chips.size() < ev.payload_start_chip + payload_chip_count)
        return;
      pending.erase(pending.begin());
      std::vector<cplx> frame_chips(
          res.chips.begin() + long(ev.payload_start_chip),
          res.chips.begin() +
              long(ev.payload_start_chip + payload_chip_count));
      const std::vector<cplx> symbols = despread(frame_chips, code, 0);
      const std::vector<int> bits = dbpsk_demod(symbols);
      Detection det;
      det.payload_start_chip = ev.payload_start_chip;
      det.sync_metric = ev.metric;
      // Timestamp of the end of the last payload chip, corrected for the
      // tx pulse and matched-filter group delays.
      const double pos2 =
          chip_pos[ev.payload_start_chip + payload_chip_count - 1];
      det.time_s = (pos2 * double(decim) - 2.0 * pulse.group_delay()) /
                       cfg.rates.fs_passband +
                   tc;
      if (auto msg = decode_payload(bits)) {
        det.msg = *msg;
        det.crc_ok = true;
        res.messages.push_back(det);
      } else {
        det.msg = parse_fields(bits);
        det.crc_ok = false;
        res.diag.crc_failures.push_back(det);
      }
    }
  };

  for (std::size_t m = 0; m * std::size_t(decim) < mf.samples.size(); ++m) {
    const cplx u = mf.samples[m * std::size_t(decim)];
    const cplx y_agc = agc_step(agc, u);
    // Derotate every sample with the current correction; the phase
    // detector itself runs decision-directed on the recovered chips only,
    // so half-chip transition samples cannot disturb the loop.
    const cplx y = y_agc * std::polar(1.0, -carrier.phase_acc);
    if (cfg.record_traces) {
      res.diag.agc_gain.push_back(agc.x);
      res.diag.phase_err.push_back(carrier.last_error);
      res.diag.phase_acc.push_back(carrier.phase_acc);
    }
    if (auto chip = timing.push(y)) {
      // Coast through low-amplitude chips (sync-word guard): their phase
      // is noise and would only inject jitter into the loop.
      if (std::abs(*chip) >= 0.5 * cfg.agc_reference) {
        const double e = ped(*chip);
        carrier.last_error = e;
        carrier.integrator += carrier.gains.ki * e;
        carrier.phase_acc += carrier.gains.kp * e + carrier.integrator;
        carrier.phase_acc = std::remainder(carrier.phase_acc, 2.0 * M_PI);
      } else {
        carrier.phase_acc =
            std::remainder(carrier.phase_acc + carrier.integrator, 2.0 * M_PI);
      }
      res.chips.push_back(*chip);
      chip_pos.push_back(timing.last_chip_position());
      if (auto ev = fsync.push(*chip)) {
        if (ev->ambiguous && !pending.empty())
          pending.back() = *ev;  // larger peak supersedes the earlier one
        else
          pending.push_back(*ev);
      }
      if (cfg.record_traces) {
        res.diag.ted_err.push_back(timing.state().last_ted);
        const double ph = std::fmod(timing.last_chip_position(),
                                    double(cfg.rates.sps_timing));
        res.diag.mu.push_back(ph / double(cfg.rates.sps_timing));
        res.diag.corr_metric.push_back(fsync.last_metric());
      }
      try_decode();
    }
    if (timing.unlocked()) res.diag.timing_unlocked = true;
  }
  try_decode();
  return res;
}

}  // namespace psdm
