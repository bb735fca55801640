#include "psdm/channel.hpp"

#include <fftw3.h>

#include <cmath>
#include <random>

namespace psdm {

namespace {

double mean_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return v.empty() ? 0.0 : m / double(v.size());
}

// Split the stream into its DC level and the information ripple.
std::pair<double, std::vector<double>> split_dc(const PassbandStream& s) {
  const double dc = mean_of(s.samples);
  std::vector<double> ripple(s.samples.size());
  for (std::size_t n = 0; n < ripple.size(); ++n)
    ripple[n] = s.samples[n] - dc;
  return {dc, std::move(ripple)};
}

PassbandStream join_dc(double dc, std::vector<double> ripple, double fs) {
  PassbandStream out;
  out.fs = fs;
  out.samples = std::move(ripple);
  for (double& v : out.samples) v += dc;
  return out;
}

// Analytic signal via the DFT: negative frequencies zeroed, positive
// doubled.
std::vector<cplx> analytic_signal(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = x[i];
  fftw_plan fwd = fftw_plan_dft_1d(
      int(n), reinterpret_cast<fftw_complex*>(in.data()),
      reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
      FFTW_ESTIMATE);
  fftw_execute(fwd);
  fftw_destroy_plan(fwd);
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) out[k] *= 2.0;
  for (std::size_t k = n / 2 + 1; k < n; ++k) out[k] = 0.0;
  fftw_plan inv = fftw_plan_dft_1d(
      int(n), reinterpret_cast<fftw_complex*>(out.data()),
      reinterpret_cast<fftw_complex*>(in.data()), FFTW_BACKWARD,
      FFTW_ESTIMATE);
  fftw_execute(inv);
  fftw_destroy_plan(inv);
  for (auto& v : in) v /= double(n);
  return in;
}

double bessel_i0(double x) {
  // Series expansion, converges quickly for the argument range used here.
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace

void ImpairmentConfig::validate() const {
  if (gain_schedule.empty())
    throw std::invalid_argument("gain schedule must not be empty");
  if (gain_schedule.front().first > 0.0)
    throw std::invalid_argument("gain schedule must cover t = 0");
  double prev = -1.0;
  for (const auto& [t, g] : gain_schedule) {
    if (t <= prev && prev >= 0.0)
      throw std::invalid_argument("gain schedule times must increase");
    if (g < 0.1 || g > 10.0)
      throw std::invalid_argument("gain factor outside [0.1, 10]");
    prev = t;
  }
}

std::vector<std::pair<double, double>> random_gain_schedule(
    double period_s, double duration_s, double gmin, double gmax,
    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(gmin, gmax);
  std::vector<std::pair<double, double>> sched;
  for (double t = 0.0; t < duration_s; t += period_s)
    sched.emplace_back(t, dist(rng));
  return sched;
}

PassbandStream apply_gain_profile(
    const PassbandStream& signal,
    const std::vector<std::pair<double, double>>& schedule) {
  if (schedule.empty() || schedule.front().first > 0.0)
    throw std::invalid_argument("gain schedule must cover t = 0");
  auto [dc, ripple] = split_dc(signal);
  std::size_t seg = 0;
  for (std::size_t n = 0; n < ripple.size(); ++n) {
    const double t = double(n) / signal.fs;
    while (seg + 1 < schedule.size() && schedule[seg + 1].first <= t) ++seg;
    ripple[n] *= schedule[seg].second;
  }
  return join_dc(dc, std::move(ripple), signal.fs);
}

PassbandStream apply_cfo(const PassbandStream& signal, double freq_offset_hz,
                         double phase_offset_rad) {
  if (freq_offset_hz == 0.0 && phase_offset_rad == 0.0) return signal;
  auto [dc, ripple] = split_dc(signal);
  const std::vector<cplx> a = analytic_signal(ripple);
  const double dw = 2.0 * M_PI * freq_offset_hz / signal.fs;
  for (std::size_t n = 0; n < ripple.size(); ++n) {
    const cplx rot = std::polar(1.0, dw * double(n) + phase_offset_rad);
    ripple[n] = (a[n] * rot).real();
  }
  return join_dc(dc, std::move(ripple), signal.fs);
}

PassbandStream apply_sro(const PassbandStream& signal, double sro_hz,
                         double chip_rate) {
  if (sro_hz == 0.0) return signal;
  if (!(std::abs(sro_hz) < chip_rate / 100.0))
    throw std::invalid_argument("|sro| must be below chip_rate/100");
  auto [dc, ripple] = split_dc(signal);
  const double ratio = (chip_rate + sro_hz) / chip_rate;
  const std::size_t nx = ripple.size();
  const std::size_t ny = std::size_t(double(nx - 1) * ratio) + 1;
  // 32-tap Kaiser-windowed sinc, evaluated at the exact fractional offset.
  constexpr int kHalf = 16;
  constexpr double kBeta = 10.0;
  const double i0b = bessel_i0(kBeta);
  std::vector<double> out(ny, 0.0);
  for (std::size_t n = 0; n < ny; ++n) {
    const double t = double(n) / ratio;
    const long base = long(std::floor(t));
    const double frac = t - double(base);
    double acc = 0.0;
    for (int k = -kHalf + 1; k <= kHalf; ++k) {
      const long idx = base + k;
      if (idx < 0 || idx >= long(nx)) continue;
      const double u = double(k) - frac;
      const double sinc =
          u == 0.0 ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
      const double wu = u / double(kHalf);
      if (std::abs(wu) >= 1.0) continue;
      const double w = bessel_i0(kBeta * std::sqrt(1.0 - wu * wu)) / i0b;
      acc += ripple[idx] * sinc * w;
    }
    out[n] = acc;
  }
  return join_dc(dc, std::move(out), signal.fs);
}

PassbandStream add_awgn(const PassbandStream& signal, double snr_db,
                        std::uint64_t rng_seed) {
  if (std::isinf(snr_db) && snr_db > 0) return signal;
  if (!std::isfinite(snr_db))
    throw std::invalid_argument("snr_db must be finite or +inf");
  auto [dc, ripple] = split_dc(signal);
  double p = 0.0;
  for (double v : ripple) p += v * v;
  p /= std::max<std::size_t>(ripple.size(), 1);
  const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (double& v : ripple) v += gauss(rng);
  return join_dc(dc, std::move(ripple), signal.fs);
}

PassbandStream apply_impairments(const PassbandStream& signal,
                                 const ImpairmentConfig& cfg,
                                 double chip_rate) {
  cfg.validate();
  PassbandStream s = apply_gain_profile(signal, cfg.gain_schedule);
  s = apply_cfo(s, cfg.freq_offset_hz, cfg.phase_offset_rad);
  s = apply_sro(s, cfg.sro_hz, chip_rate);
  if (std::isfinite(cfg.snr_db)) s = add_awgn(s, cfg.snr_db, cfg.rng_seed);
  return s;
}

}  // namespace psdm
