#include "psdm/tx.hpp"

#include <cmath>

namespace psdm {

std::uint8_t crc8(const std::uint8_t* data, std::size_t len) {
  std::uint8_t crc = 0x00;
  for (std::size_t i = 0; i < len; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b)
      crc = (crc & 0x80) ? std::uint8_t((crc << 1) ^ 0x07)
                         : std::uint8_t(crc << 1);
  }
  return crc;
}

namespace {

void push_bits(std::vector<int>& bits, std::uint32_t value, int width) {
  for (int b = width - 1; b >= 0; --b) bits.push_back(int((value >> b) & 1u));
}

std::uint32_t pop_bits(const std::vector<int>& bits, std::size_t& pos,
                       int width) {
  std::uint32_t v = 0;
  for (int b = 0; b < width; ++b) v = (v << 1) | std::uint32_t(bits[pos++] & 1);
  return v;
}

}  // namespace

std::vector<int> encode_payload(const EnergyPacketMessage& msg) {
  const std::uint8_t bytes[5] = {
      msg.dest_address,
      std::uint8_t(msg.current_ma >> 8), std::uint8_t(msg.current_ma & 0xff),
      std::uint8_t(msg.duration_ms >> 8), std::uint8_t(msg.duration_ms & 0xff)};
  std::vector<int> bits;
  bits.reserve(48);
  for (std::uint8_t by : bytes) push_bits(bits, by, 8);
  push_bits(bits, crc8(bytes, 5), 8);
  return bits;
}

std::optional<EnergyPacketMessage> decode_payload(
    const std::vector<int>& bits) {
  if (bits.size() != 48) return std::nullopt;
  std::size_t pos = 0;
  EnergyPacketMessage msg;
  msg.dest_address = std::uint8_t(pop_bits(bits, pos, 8));
  msg.current_ma = std::uint16_t(pop_bits(bits, pos, 16));
  msg.duration_ms = std::uint16_t(pop_bits(bits, pos, 16));
  const std::uint8_t rx_crc = std::uint8_t(pop_bits(bits, pos, 8));
  const std::uint8_t bytes[5] = {
      msg.dest_address,
      std::uint8_t(msg.current_ma >> 8), std::uint8_t(msg.current_ma & 0xff),
      std::uint8_t(msg.duration_ms >> 8), std::uint8_t(msg.duration_ms & 0xff)};
  if (crc8(bytes, 5) != rx_crc) return std::nullopt;
  return msg;
}

std::vector<int> dbpsk_encode(const std::vector<int>& bits) {
  std::vector<int> sym;
  sym.reserve(bits.size() + 1);
  sym.push_back(+1);
  for (int b : bits) sym.push_back(b ? -sym.back() : sym.back());
  return sym;
}

std::vector<int> spread(const std::vector<int>& symbols,
                        const std::vector<int>& code) {
  if (code.size() != std::size_t(kSpreadFactor))
    throw std::invalid_argument("spreading code must have 8 chips");
  std::vector<int> chips;
  chips.reserve(symbols.size() * code.size());
  for (int s : symbols)
    for (int c : code) chips.push_back(s * c);
  return chips;
}

std::vector<int> sync_codeword(int dest) {
  // Row of H_8 spread with itself (SF 8) -> 64 chips; distinct rows stay
  // orthogonal at zero lag.
  const std::vector<int> row = spreading_code(dest);
  return spread(row, row);
}

std::vector<int> ChipFrame::all_chips() const {
  std::vector<int> out = sync_word;
  out.insert(out.end(), payload_chips.begin(), payload_chips.end());
  return out;
}

ChipFrame build_frame(const std::vector<int>& payload_chips, int dest) {
  if (payload_chips.size() % kSpreadFactor != 0)
    throw std::invalid_argument("payload chips must be a multiple of 8");
  ChipFrame f;
  f.sync_word = sync_codeword(dest);  // throws on unknown destination
  f.sync_word.resize(kSyncWordChips, 0);  // 14 zero-amplitude guard chips
  f.payload_chips = payload_chips;
  return f;
}

ChipFrame make_message_frame(const EnergyPacketMessage& msg, int dest) {
  const std::vector<int> bits = encode_payload(msg);
  const std::vector<int> symbols = dbpsk_encode(bits);
  return build_frame(spread(symbols, spreading_code(dest)), dest);
}

PassbandStream modulate(const ChipFrame& frame, const SampleRateConfig& rates,
                        const PulseShape& pulse) {
  rates.validate();
  const std::vector<int> chips = frame.all_chips();
  // Impulse train at sps_passband, then pulse-shaping FIR.
  std::vector<double> impulses(chips.size() * rates.sps_passband, 0.0);
  for (std::size_t k = 0; k < chips.size(); ++k)
    impulses[k * rates.sps_passband] = double(chips[k]);
  FirResult<double> shaped = fir_filter(impulses, pulse.taps);
  PassbandStream out;
  out.fs = rates.fs_passband;
  out.samples.resize(shaped.samples.size());
  const double w0 = 2.0 * M_PI * rates.fc_carrier / rates.fs_passband;
  for (std::size_t n = 0; n < shaped.samples.size(); ++n)
    out.samples[n] = shaped.samples[n] * std::cos(w0 * double(n));
  return out;
}

PassbandStream inject_power_signal(const PassbandStream& info,
                                   const PowerSignalConfig& cfg) {
  if (!(cfg.mod_index > 0.0 && cfg.mod_index <= 0.05))
    throw std::invalid_argument("mod_index must be in (0, 0.05]");
  double peak = 0.0;
  for (double v : info.samples) peak = std::max(peak, std::abs(v));
  PassbandStream out;
  out.fs = info.fs;
  out.samples.resize(info.samples.size(), cfg.v_dc);
  if (peak > 0.0) {
    const double scale = cfg.v_dc * cfg.mod_index / peak;
    for (std::size_t n = 0; n < info.samples.size(); ++n)
      out.samples[n] = cfg.v_dc + scale * info.samples[n];
  }
  return out;
}

}  // namespace psdm
