#include "psdm/dsp.hpp"

#include <cmath>

#include "psdm/kernels.hpp"

namespace psdm {

void SampleRateConfig::validate() const {
  if (sps_passband < 1 ||
      std::abs(fs_passband - sps_passband * chip_rate) > 1e-9)
    throw std::invalid_argument(
        "fs_passband must equal sps_passband * chip_rate");
  if (!(fc_carrier < fs_passband / 2))
    throw std::invalid_argument("fc_carrier must be below Nyquist");
  if (sps_timing != 2)
    throw std::invalid_argument("sps_timing must be 2 (Gardner TED)");
}

HadamardMatrix hadamard(int order) {
  if (order < 1 || (order & (order - 1)) != 0)
    throw std::invalid_argument("hadamard order must be a power of two");
  HadamardMatrix h;
  h.order = order;
  h.rows.assign(order, std::vector<int>(order, 1));
  for (int block = 1; block < order; block *= 2) {
    for (int r = 0; r < block; ++r) {
      for (int c = 0; c < block; ++c) {
        const int v = h.rows[r][c];
        h.rows[r][c + block] = v;
        h.rows[r + block][c] = v;
        h.rows[r + block][c + block] = -v;
      }
    }
  }
  return h;
}

std::vector<int> spreading_code(int load_index) {
  if (load_index < 0 || load_index >= 8)
    throw std::invalid_argument("load_index must be in [0, 8)");
  static const HadamardMatrix h8 = hadamard(8);
  return h8.rows[load_index];
}

namespace {

double srrc_tap(double t, double beta) {
  // t in chip intervals.
  const double eps = 1e-9;
  if (std::abs(t) < eps) return 1.0 - beta + 4.0 * beta / M_PI;
  const double tb = 1.0 / (4.0 * beta);
  if (std::abs(std::abs(t) - tb) < eps) {
    const double a = (1.0 + 2.0 / M_PI) * std::sin(M_PI / (4.0 * beta));
    const double b = (1.0 - 2.0 / M_PI) * std::cos(M_PI / (4.0 * beta));
    return beta / std::sqrt(2.0) * (a + b);
  }
  const double num = std::sin(M_PI * t * (1.0 - beta)) +
                     4.0 * beta * t * std::cos(M_PI * t * (1.0 + beta));
  const double fbt = 4.0 * beta * t;
  const double den = M_PI * t * (1.0 - fbt * fbt);
  return num / den;
}

}  // namespace

PulseShape make_pulse_shape(double rolloff, int span, int sps) {
  if (!(rolloff > 0.0 && rolloff <= 1.0))
    throw std::invalid_argument("rolloff must be in (0, 1]");
  if (span < 4) throw std::invalid_argument("span must be >= 4 chips");
  if (sps < 2) throw std::invalid_argument("sps must be >= 2");
  PulseShape p;
  p.rolloff = rolloff;
  p.span = span;
  p.sps = sps;
  const int half = span * sps / 2;
  p.taps.resize(2 * half + 1);
  for (int k = -half; k <= half; ++k)
    p.taps[k + half] = srrc_tap(double(k) / sps, rolloff);
  double e = 0.0;
  for (double v : p.taps) e += v * v;
  const double scale = 1.0 / std::sqrt(e);
  for (double& v : p.taps) v *= scale;
  p.energy = 1.0;
  return p;
}

LoopGains loop_gains(double bn, double zeta, double k0, double kd, double tc) {
  if (k0 * kd == 0.0) throw std::invalid_argument("k0*kd must be nonzero");
  if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
  if (!(tc > 0.0)) throw std::invalid_argument("tc must be positive");
  if (bn < 0.0) throw std::invalid_argument("bn must be non-negative");
  LoopGains g;
  g.bn = bn;
  g.zeta = zeta;
  g.k0 = k0;
  g.kd = kd;
  g.tc = tc;
  const double wn = 1.89 * bn;
  const double th = wn * tc;
  const double den = 4.0 + 4.0 * zeta * th + th * th;
  g.kp = (8.0 * zeta * th) / den / (k0 * kd);
  g.ki = (4.0 * th * th) / den / (k0 * kd);
  return g;
}

FirResult<double> fir_filter(const std::vector<double>& x,
                             const std::vector<double>& taps) {
  if (taps.empty()) throw std::invalid_argument("taps must be non-empty");
  const std::size_t nx = x.size(), nt = taps.size();
  FirResult<double> r;
  r.group_delay = 0.5 * (double(nt) - 1.0);
  if (nx == 0) return r;
  r.samples.assign(nx + nt - 1, 0.0);
  // Reversed taps turn each output into a dot product over a window.
  std::vector<double> rev(taps.rbegin(), taps.rend());
  for (std::size_t n = 0; n < r.samples.size(); ++n) {
    // y[n] = sum_k taps[k] * x[n-k]; window of x is [n-nt+1, n].
    const std::size_t lo = n >= nt - 1 ? n - (nt - 1) : 0;
    const std::size_t hi = std::min(n, nx - 1);
    if (lo > hi) continue;
    // rev index aligned so rev[j] pairs with x[lo+j].
    const std::size_t roff = lo - (n - (nt - 1));
    r.samples[n] = kernels::dot(rev.data() + roff, x.data() + lo, hi - lo + 1);
  }
  return r;
}

FirResult<cplx> fir_filter(const std::vector<cplx>& x,
                           const std::vector<double>& taps) {
  if (taps.empty()) throw std::invalid_argument("taps must be non-empty");
  const std::size_t nx = x.size(), nt = taps.size();
  FirResult<cplx> r;
  r.group_delay = 0.5 * (double(nt) - 1.0);
  if (nx == 0) return r;
  r.samples.assign(nx + nt - 1, cplx{});
  std::vector<double> rev(taps.rbegin(), taps.rend());
  for (std::size_t n = 0; n < r.samples.size(); ++n) {
    const std::size_t lo = n >= nt - 1 ? n - (nt - 1) : 0;
    const std::size_t hi = std::min(n, nx - 1);
    if (lo > hi) continue;
    const std::size_t roff = lo - (n - (nt - 1));
    r.samples[n] =
        kernels::dot_cr(x.data() + lo, rev.data() + roff, hi - lo + 1);
  }
  return r;
}

}  // namespace psdm
