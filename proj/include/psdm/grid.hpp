#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psdm/channel.hpp"
#include "psdm/rx.hpp"
#include "psdm/tx.hpp"

// Discrete-time DC-grid simulation: one broadcasting generator, loads with
// receiver instances, energy-packet dispatch and v*i*t energy accounting.

namespace psdm {

struct LoadSpec {
  std::uint8_t address = 0;
  int code = 0;  // spreading-code row index
  double idle_current_a = 0.0;
};

struct TxCommand {
  double time_s = 0.0;
  EnergyPacketMessage msg;
};

struct GridScenario {
  double v_dc = 15.0;
  double mod_index = 0.02;
  SampleRateConfig rates;
  std::vector<LoadSpec> loads;
  std::vector<TxCommand> tx_schedule;
  double sim_duration_s = 0.5;
  ImpairmentConfig impairments;

  void validate() const;
  const LoadSpec& load_by_address(std::uint8_t addr) const;
};

GridScenario scenario_from_json_text(const std::string& text);
GridScenario scenario_from_file(const std::string& path);

struct DetectionRecord {
  std::uint8_t address = 0;
  double time_s = 0.0;
  EnergyPacketMessage msg;
};

struct ScenarioTrace {
  double fs = 0.0;
  std::vector<double> bus_voltage;                 // V per step
  std::vector<std::vector<double>> load_currents;  // [load][step], A
  std::vector<double> total_current;               // A per step
  std::vector<DetectionRecord> detections;
  std::vector<std::string> warnings;
};

// Commanded-current state machine of one load.
struct LoadControllerState {
  double idle_a = 0.0;
  double setpoint_a = 0.0;
  double active_from_s = -1.0;
  double active_until_s = -1.0;
  bool overlap_warning = false;
};

// Current at time t; a detection activates the setpoint for its duration.
// Overlapping commands: the later command wins from its activation.
double load_controller_step(LoadControllerState& ctrl,
                            const std::optional<EnergyPacketMessage>& det,
                            double t);

ScenarioTrace run_scenario(const GridScenario& scenario);

// Integral of v_bus * i_load over [t0, t1), joules.
double packet_energy(const ScenarioTrace& trace, std::size_t load_index,
                     double t0, double t1);

}  // namespace psdm
