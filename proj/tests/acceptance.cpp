// End-to-end acceptance gate. Each criterion prints one PASS/FAIL line;
// the exit status is the number of failed criteria. Argument: path to the
// shipped scenarios directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "psdm/channel.hpp"
#include "psdm/grid.hpp"
#include "psdm/rx.hpp"
#include "psdm/tx.hpp"

using namespace psdm;

namespace {

constexpr double kTc = 125e-6;

int g_failures = 0;

void report(int id, bool ok, const char* what) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, what);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::vector<EnergyPacketMessage> random_messages(std::size_t n,
                                                 std::uint8_t dest,
                                                 std::uint64_t seed,
                                                 bool random_dest = false) {
  std::mt19937_64 rng(seed);
  std::vector<EnergyPacketMessage> msgs(n);
  for (auto& m : msgs) {
    m.dest_address = random_dest ? std::uint8_t(rng()) : dest;
    m.current_ma = std::uint16_t(rng());
    m.duration_ms = std::uint16_t(rng());
  }
  return msgs;
}

PassbandStream frames_to_bus(const std::vector<ChipFrame>& frames) {
  SampleRateConfig rates;
  const PulseShape pulse = make_pulse_shape(0.5, 8, rates.sps_passband);
  ChipFrame all;
  for (const ChipFrame& f : frames) {
    const std::vector<int> c = f.all_chips();
    all.sync_word.insert(all.sync_word.end(), c.begin(), c.end());
  }
  return inject_power_signal(modulate(all, rates, pulse), PowerSignalConfig{});
}

std::vector<int> message_bits(const std::vector<EnergyPacketMessage>& msgs) {
  std::vector<int> bits;
  for (const auto& m : msgs) {
    const std::vector<int> b = encode_payload(m);
    bits.insert(bits.end(), b.begin(), b.end());
  }
  return bits;
}

// ---------------------------------------------------------------------

bool criterion1() {
  const auto start = std::chrono::steady_clock::now();
  // Fully random payloads: the correlation sidelobe check needs the bit
  // stream free of repeating header structure across frames.
  const auto msgs = random_messages(10, 1, 101, true);
  std::vector<ChipFrame> frames;
  for (const auto& m : msgs) frames.push_back(make_message_frame(m, 3));
  const PassbandStream clean = frames_to_bus(frames);

  ImpairmentConfig imp;
  const double dur = double(clean.samples.size()) / clean.fs;
  imp.gain_schedule = random_gain_schedule(0.175, dur + 0.1, 0.5, 1.25, 7);
  imp.phase_offset_rad = M_PI / 6.0;
  imp.freq_offset_hz = 5.0;
  imp.sro_hz = 2.0;
  imp.snr_db = 20.0;
  imp.rng_seed = 7;
  const PassbandStream bus = apply_impairments(clean, imp, 8000.0);

  ReceiverConfig cfg;
  cfg.record_traces = false;
  const ReceiverResult rr = receive(bus, 3, cfg);
  if (rr.messages.size() != msgs.size()) return false;
  std::vector<EnergyPacketMessage> got;
  for (const auto& d : rr.messages) got.push_back(d.msg);

  // BER: CRC-clean payloads determine all 48 bits, so field equality in
  // order is bit equality.
  const std::vector<int> sent = message_bits(msgs);
  const std::vector<int> recv = message_bits(got);
  if (sent != recv) return false;

  // Bit cross-correlation: unique peak at lag 0 by at least 3x.
  const long n = long(sent.size());
  auto pm = [](int b) { return b ? 1.0 : -1.0; };
  double peak0 = 0.0, worst = 0.0;
  for (long lag = -(n - 1); lag < n; ++lag) {
    double acc = 0.0;
    for (long k = 0; k < n; ++k) {
      const long j = k + lag;
      if (j < 0 || j >= n) continue;
      acc += pm(sent[std::size_t(k)]) * pm(recv[std::size_t(j)]);
    }
    if (lag == 0)
      peak0 = std::abs(acc);
    else
      worst = std::max(worst, std::abs(acc));
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return peak0 >= 3.0 * worst && elapsed < 30.0;
}

bool criterion2() {
  for (double c : {0.5, 1.25}) {
    AgcState s;
    s.r = 1.0;
    s.alpha = 0.01;
    const double target = s.r / c;
    const double gap0 = std::abs(s.x - target);
    const int n5 = int(5.0 / (s.alpha * c));
    int tau_meas = -1;
    for (int k = 0; k < 2 * n5; ++k) {
      agc_step(s, cplx{c, 0.0});
      if (tau_meas < 0 && std::abs(s.x - target) <= gap0 / std::exp(1.0))
        tau_meas = k + 1;
      if (k + 1 == n5 && std::abs(s.x - target) > 0.01 * target) return false;
    }
    const double tau_expect = 1.0 / (s.alpha * c);
    if (tau_meas < 0) return false;
    if (std::abs(double(tau_meas) - tau_expect) > 0.1 * tau_expect)
      return false;
  }
  return true;
}

bool criterion3() {
  CarrierLoopState loop;
  loop.gains = loop_gains(200.0, 0.7071, 1.0, 1.0, kTc);
  std::mt19937_64 rng(3);
  const int n25ms = int(0.025 / kTc);
  double tail_err = 0.0;
  int tail = 0;
  bool converged_by_25ms = false;
  for (int k = 0; k < 4 * n25ms; ++k) {
    const double s = (rng() & 1) ? 1.0 : -1.0;
    carrier_sync_step(loop, s * std::polar(1.0, M_PI / 6.0));
    if (k + 1 == n25ms)
      converged_by_25ms =
          std::abs(std::remainder(loop.phase_acc - M_PI / 6.0, 2.0 * M_PI)) <=
          0.02;
    if (k >= 3 * n25ms) {
      tail_err += loop.last_error;
      ++tail;
    }
  }
  return converged_by_25ms && std::abs(tail_err / tail) < 0.01;
}

bool criterion4() {
  const auto msgs = random_messages(10, 2, 104);
  std::vector<ChipFrame> frames;
  for (const auto& m : msgs) frames.push_back(make_message_frame(m, 3));
  const PassbandStream clean = frames_to_bus(frames);
  const PassbandStream bus = apply_cfo(clean, 5.0, 0.0);

  const ReceiverResult rr = receive(bus, 3, ReceiverConfig{});
  if (rr.messages.size() != msgs.size()) return false;
  for (std::size_t k = 0; k < msgs.size(); ++k) {
    if (rr.messages[k].msg.current_ma != msgs[k].current_ma) return false;
    if (rr.messages[k].msg.duration_ms != msgs[k].duration_ms) return false;
  }
  // Steady state: every despread symbol past the first frame folds to
  // within 0.1 rad of the real axis.
  const std::vector<int> code = spreading_code(3);
  for (std::size_t f = 1; f < rr.messages.size(); ++f) {
    const std::size_t start = rr.messages[f].payload_start_chip;
    const std::vector<cplx> frame_chips(rr.chips.begin() + long(start),
                                        rr.chips.begin() + long(start + 392));
    for (const cplx& sym : despread(frame_chips, code, 0))
      if (std::abs(ped(sym)) > 0.1) return false;
  }
  return true;
}

bool criterion5() {
  // The timing unit in isolation, as in the figure-level test: a random
  // chip stream at 2 samples/chip through the matched pulse cascade,
  // stretched by a 2 Hz chip-clock offset.
  std::mt19937_64 rng(105);
  std::vector<int> chips(20000);
  for (int& c : chips) c = (rng() & 1) ? 1 : -1;
  const PulseShape p = make_pulse_shape(0.5, 8, 2);
  std::vector<double> impulses(chips.size() * 2, 0.0);
  for (std::size_t k = 0; k < chips.size(); ++k)
    impulses[k * 2] = double(chips[k]);
  const FirResult<double> tx = fir_filter(impulses, p.taps);
  PassbandStream s{fir_filter(tx.samples, p.taps).samples, 16000.0};
  s = apply_sro(s, 2.0, 8000.0);
  std::vector<cplx> stream(s.samples.size());
  for (std::size_t n = 0; n < stream.size(); ++n)
    stream[n] = {s.samples[n], 0.0};
  const TimingOutput out =
      timing_recovery(stream, loop_gains(100.0, 0.7071, -1.0, 2.55, kTc));
  if (out.chips.size() < 15000) return false;

  // Two-cluster collapse: sigma of the distance to +-A below 0.05*A.
  double amp = 0.0;
  std::size_t namp = 0;
  for (std::size_t k = 3000; k < out.chips.size(); ++k) {
    amp += std::abs(out.chips[k].real());
    ++namp;
  }
  amp /= double(namp);
  double var = 0.0;
  for (std::size_t k = 3000; k < out.chips.size(); ++k) {
    const double y = out.chips[k].real();
    const double sgn = y >= 0.0 ? 1.0 : -1.0;
    var += (y - sgn * amp) * (y - sgn * amp) + out.chips[k].imag() *
                                                   out.chips[k].imag();
  }
  var /= double(namp);
  if (std::sqrt(var) >= 0.05 * amp) return false;

  // Fractional-delay ramp: slope of the sampling phase in chip units
  // gives a cyclic period of chip_rate/sro = 4000 chips, +-5%.
  double acc = 0.0;
  std::size_t nmu = 0;
  for (std::size_t k = 3001; k < out.chip_positions.size(); ++k) {
    const double a = std::fmod(out.chip_positions[k - 1], 2.0) / 2.0;
    const double b = std::fmod(out.chip_positions[k], 2.0) / 2.0;
    double du = b - a;
    if (du < -0.5) du += 1.0;
    if (du > 0.5) du -= 1.0;
    acc += du;
    ++nmu;
  }
  const double period = 1.0 / std::abs(acc / double(nmu));
  return period > 3800.0 && period < 4200.0;
}

bool criterion6() {
  std::vector<ChipFrame> frames;
  const auto m1 = random_messages(10, 1, 61);
  const auto m2 = random_messages(10, 2, 62);
  for (std::size_t k = 0; k < 10; ++k) {
    frames.push_back(make_message_frame(m1[k], 3));
    frames.push_back(make_message_frame(m2[k], 5));
  }
  const PassbandStream bus = frames_to_bus(frames);
  ReceiverConfig cfg;
  cfg.record_traces = false;
  const ReceiverResult r3 = receive(bus, 3, cfg);
  const ReceiverResult r5 = receive(bus, 5, cfg);
  if (r3.messages.size() != 10 || r5.messages.size() != 10) return false;
  for (const auto& d : r3.messages)
    if (d.msg.dest_address != 1) return false;
  for (const auto& d : r5.messages)
    if (d.msg.dest_address != 2) return false;

  // Pure-noise false-alarm floor at the default threshold.
  FrameSync fs(3);
  std::mt19937_64 rng(63);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 1000000; ++k)
    if (fs.push(cplx{g(rng), g(rng)})) return false;
  return true;
}

bool criterion7() {
  struct Row {
    double bn, zeta, k0, kd;
  };
  for (const Row& r : {Row{200.0, 0.7071, 1.0, 1.0},
                       Row{100.0, 0.7071, -1.0, 2.55}}) {
    const LoopGains g = loop_gains(r.bn, r.zeta, r.k0, r.kd, kTc);
    const double wn = 1.89 * r.bn;
    const double t = wn * kTc;
    const double den = 4.0 + 4.0 * r.zeta * t + t * t;
    const double kp = (8.0 * r.zeta * t / den) / (r.k0 * r.kd);
    const double ki = (4.0 * t * t / den) / (r.k0 * r.kd);
    if (std::abs(g.kp - kp) > 1e-12 * std::abs(kp)) return false;
    if (std::abs(g.ki - ki) > 1e-12 * std::abs(ki)) return false;
  }
  return true;
}

bool criterion8() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int rep = 0; rep < 10000; ++rep) {
    const double a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
    auto poly = [&](double t) { return ((a * t + b) * t + c) * t + d; };
    const std::array<double, 4> w = {poly(2.0), poly(1.0), poly(0.0),
                                     poly(-1.0)};
    const double mu = frac(rng);
    const double ref = poly(mu);
    if (std::abs(farrow_interpolate(w, mu) - ref) >
        1e-12 * (1.0 + std::abs(ref)))
      return false;
    if (farrow_interpolate(w, 0.0) != w[2]) return false;
  }
  return true;
}

bool criterion9(const std::string& scenario_dir) {
  GridScenario s;
  try {
    s = scenario_from_file(scenario_dir + "/fig12.json");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scenario load failed: %s\n", e.what());
    return false;
  }
  const ScenarioTrace tr = run_scenario(s);

  // One detection per scheduled frame, at schedule + 470 chips, +-2 chips.
  if (tr.detections.size() != s.tx_schedule.size()) return false;
  for (std::size_t k = 0; k < tr.detections.size(); ++k) {
    const TxCommand& cmd = s.tx_schedule[k];
    const DetectionRecord& det = tr.detections[k];
    if (det.msg.dest_address != cmd.msg.dest_address) return false;
    const double expect = cmd.time_s + 470.0 * kTc;
    if (std::abs(det.time_s - expect) > 2.0 * kTc) return false;
  }

  // Current pulses of exactly the commanded durations.
  for (std::size_t li = 0; li < s.loads.size(); ++li) {
    double expect_s = 0.0;
    for (const auto& cmd : s.tx_schedule)
      if (cmd.msg.dest_address == s.loads[li].address)
        expect_s += double(cmd.msg.duration_ms) / 1000.0;
    std::size_t on = 0;
    for (double i : tr.load_currents[li])
      if (std::abs(i - s.loads[li].idle_current_a) > 1e-9) ++on;
    const double tol = double(s.tx_schedule.size()) + 1.0;  // grid rounding
    if (std::abs(double(on) - expect_s * tr.fs) > tol) return false;
  }

  // Total current = sum of loads at every sample.
  for (std::size_t n = 0; n < tr.total_current.size(); ++n) {
    double sum = 0.0;
    for (std::size_t li = 0; li < s.loads.size(); ++li)
      sum += tr.load_currents[li][n];
    if (std::abs(sum - tr.total_current[n]) > 1e-9) return false;
  }

  // Packet energy within 1% of v_dc * i * duration.
  for (const DetectionRecord& det : tr.detections) {
    std::size_t li = 0;
    while (s.loads[li].address != det.address) ++li;
    const double dur = double(det.msg.duration_ms) / 1000.0;
    const double amps = double(det.msg.current_ma) / 1000.0;
    const double idle =
        s.loads[li].idle_current_a * s.v_dc * dur;  // baseline under the pulse
    const double e =
        packet_energy(tr, li, det.time_s, det.time_s + dur) - idle;
    const double expect = s.v_dc * (amps - s.loads[li].idle_current_a) * dur;
    if (std::abs(e - expect) > 0.01 * std::abs(expect)) return false;
  }
  return true;
}

bool criterion10(double elapsed_budget_s) {
  // Hadamard orthogonality.
  for (int order : {8, 64}) {
    const HadamardMatrix h = hadamard(order);
    for (int r = 0; r < order; ++r)
      for (int c = 0; c < order; ++c) {
        int dot = 0;
        for (int k = 0; k < order; ++k)
          dot += h.rows[std::size_t(r)][std::size_t(k)] *
                 h.rows[std::size_t(c)][std::size_t(k)];
        if (dot != (r == c ? order : 0)) return false;
      }
  }
  // S-curve zeros and odd symmetry.
  if (std::abs(ped(cplx{1.0, 0.0})) > 1e-12) return false;
  if (std::abs(ped(cplx{-1.0, 0.0})) > 1e-12) return false;
  for (double phi = 0.05; phi < M_PI / 2.0 - 0.05; phi += 0.07)
    if (std::abs(ped(std::polar(1.0, phi)) + ped(std::polar(1.0, -phi))) >
        1e-12)
      return false;
  // TED zero mean at the optimum instants (alternating chips cancel).
  std::mt19937_64 rng(10);
  double acc = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double a = (rng() & 1) ? 1.0 : -1.0;
    const double b = (rng() & 1) ? 1.0 : -1.0;
    acc += gardner_ted(cplx{a, 0.0}, cplx{0.5 * (a + b), 0.0}, cplx{b, 0.0});
  }
  if (std::abs(acc / 10000.0) > 0.05) return false;
  // Spread/despread identity.
  const std::vector<int> code = spreading_code(3);
  std::vector<int> syms(64);
  for (int& v : syms) v = (rng() & 1) ? 1 : -1;
  std::vector<cplx> chips;
  for (int c : spread(syms, code)) chips.push_back(cplx{double(c), 0.0});
  const std::vector<cplx> back = despread(chips, code, 0);
  for (std::size_t k = 0; k < syms.size(); ++k)
    if (std::abs(back[k].real() - double(syms[k])) > 1e-12) return false;
  // Determinism under a fixed seed.
  EnergyPacketMessage m;
  m.dest_address = 1;
  m.current_ma = 1000;
  m.duration_ms = 10;
  const PassbandStream clean = frames_to_bus({make_message_frame(m, 3)});
  const PassbandStream a = add_awgn(clean, 15.0, 99);
  const PassbandStream b = add_awgn(clean, 15.0, 99);
  if (a.samples != b.samples) return false;
  return elapsed_budget_s < 120.0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string scenario_dir = argc > 1 ? argv[1] : "scenarios";
  const auto t0 = std::chrono::steady_clock::now();

  report(1, criterion1(),
         "10 frames through the combined channel: BER 0, unique "
         "cross-correlation peak at lag 0 (>= 3x), < 30 s");
  report(2, criterion2(),
         "AGC step response settles to R/c within 1% by 5/(alpha*c) samples, "
         "time constant within 10% of 1/(alpha*c)");
  report(3, criterion3(),
         "carrier loop acquires pi/6 within 25 ms to +-0.02 rad, residual "
         "error mean < 0.01 rad");
  report(4, criterion4(),
         "carrier loop tracks 5 Hz: symbols within 0.1 rad of the real axis, "
         "all 10 frames decode");
  report(5, criterion5(),
         "250 ppm clock offset: two-cluster constellation (sigma < 0.05 amp), "
         "fractional-delay ramp period 4000 chips +-5%");
  report(6, criterion6(),
         "code selectivity: each receiver decodes exactly its own 10 frames; "
         "zero false alarms on 1e6 noise chips");
  report(7, criterion7(),
         "PI loop gains match the independent formula evaluation to 1e-12 "
         "for both parameter sets");
  report(8, criterion8(),
         "cubic interpolator exact on 1e4 random cubics, mu=0 identity");
  report(9, criterion9(scenario_dir),
         "shipped grid scenario: detections at schedule +- 2 chips, exact "
         "pulse durations, current conservation, energy within 1%");
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  report(10, criterion10(elapsed),
         "module invariants (orthogonality, s-curve, TED, spreading, "
         "determinism) within the runtime budget");

  std::printf("%d/10 criteria passed\n", 10 - g_failures);
  return g_failures;
}
