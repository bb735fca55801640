#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psdm/dsp.hpp"

// Transmit chain: energy-packet framing, DBPSK coding, Walsh-Hadamard
// spreading, pulse shaping, carrier modulation and superposition onto the
// DC bus voltage.

namespace psdm {

struct EnergyPacketMessage {
  std::uint8_t dest_address = 0;
  std::uint16_t current_ma = 0;   // commanded current, milliamps
  std::uint16_t duration_ms = 0;  // dispatch duration, milliseconds
};

// CRC-8, polynomial 0x07, init 0x00, MSB first.
std::uint8_t crc8(const std::uint8_t* data, std::size_t len);

// 48 bits: address(8) | current(16) | duration(16) | crc8(8), MSB first.
std::vector<int> encode_payload(const EnergyPacketMessage& msg);

// Inverse of encode_payload. Empty optional on CRC mismatch or wrong size.
std::optional<EnergyPacketMessage> decode_payload(const std::vector<int>& bits);

// Differential coding: s(0) = +1, s(k) = s(k-1) on bit 0, -s(k-1) on bit 1.
std::vector<int> dbpsk_encode(const std::vector<int>& bits);

// Each symbol becomes 8 chips symbol*code.
std::vector<int> spread(const std::vector<int>& symbols,
                        const std::vector<int>& code);

constexpr int kSyncCodewordChips = 64;
constexpr int kGuardChips = 14;
constexpr int kSyncWordChips = kSyncCodewordChips + kGuardChips;  // 78
constexpr int kSpreadFactor = 8;

struct ChipFrame {
  // 78 entries: 64-chip codeword then 14 zero-amplitude guard chips.
  std::vector<int> sync_word;
  std::vector<int> payload_chips;  // +1/-1, multiple of 8

  std::size_t total_chips() const {
    return sync_word.size() + payload_chips.size();
  }
  // Sync word followed by payload, as transmitted.
  std::vector<int> all_chips() const;
};

// 64-chip sync codeword of one destination: H_8 row spread with itself.
std::vector<int> sync_codeword(int dest);

ChipFrame build_frame(const std::vector<int>& payload_chips, int dest);

// Convenience: message -> complete on-air frame for `dest`.
ChipFrame make_message_frame(const EnergyPacketMessage& msg, int dest);

// Chips upsampled, SRRC-shaped and mixed onto the carrier.
PassbandStream modulate(const ChipFrame& frame, const SampleRateConfig& rates,
                        const PulseShape& pulse);

struct PowerSignalConfig {
  double v_dc = 15.0;
  double mod_index = 0.02;  // ripple amplitude as fraction of v_dc
};

// v_bus(t) = v_dc * (1 + mod_index * info(t)/max|info|).
PassbandStream inject_power_signal(const PassbandStream& info,
                                   const PowerSignalConfig& cfg);

}  // namespace psdm
