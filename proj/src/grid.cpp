#include "psdm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace psdm {

void GridScenario::validate() const {
  rates.validate();
  std::set<int> addrs, codes;
  for (const auto& l : loads) {
    if (!addrs.insert(l.address).second)
      throw std::invalid_argument("duplicate load address");
    if (!codes.insert(l.code).second)
      throw std::invalid_argument("duplicate spreading code");
  }
  for (const auto& cmd : tx_schedule) {
    if (cmd.time_s < 0.0 || cmd.time_s >= sim_duration_s)
      throw std::invalid_argument(
          "schedule time outside [0, sim_duration)");
    load_by_address(cmd.msg.dest_address);
  }
  impairments.validate();
}

const LoadSpec& GridScenario::load_by_address(std::uint8_t addr) const {
  for (const auto& l : loads)
    if (l.address == addr) return l;
  throw std::invalid_argument("no load with address " +
                              std::to_string(int(addr)));
}

namespace {

using nlohmann::json;

double snr_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "clean") return kSnrClean;
    throw std::invalid_argument("impairments.snr_db: unknown value " + s);
  }
  return j.get<double>();
}

}  // namespace

GridScenario scenario_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  GridScenario s;
  s.v_dc = j.value("v_dc", 15.0);
  s.mod_index = j.value("mod_index", 0.02);
  if (j.contains("rates")) {
    const json& r = j.at("rates");
    s.rates.chip_rate = r.value("chip_rate", 8000.0);
    s.rates.fc_carrier = r.value("fc_carrier", 16000.0);
    s.rates.sps_passband = r.value("sps_passband", 8);
    s.rates.fs_passband = s.rates.chip_rate * s.rates.sps_passband;
  }
  for (const json& l : j.at("loads")) {
    LoadSpec spec;
    spec.address = std::uint8_t(l.at("address").get<int>());
    spec.code = l.at("code").get<int>();
    spec.idle_current_a = l.value("idle_current_a", 0.0);
    s.loads.push_back(spec);
  }
  for (const json& c : j.value("tx_schedule", json::array())) {
    TxCommand cmd;
    cmd.time_s = c.at("time_s").get<double>();
    cmd.msg.dest_address = std::uint8_t(c.at("dest_address").get<int>());
    cmd.msg.current_ma = std::uint16_t(c.at("current_ma").get<int>());
    cmd.msg.duration_ms = std::uint16_t(c.at("duration_ms").get<int>());
    s.tx_schedule.push_back(cmd);
  }
  s.sim_duration_s = j.value("sim_duration_s", 0.5);
  if (j.contains("impairments")) {
    const json& im = j.at("impairments");
    ImpairmentConfig cfg;
    if (im.contains("gain_schedule")) {
      cfg.gain_schedule.clear();
      for (const json& g : im.at("gain_schedule"))
        cfg.gain_schedule.emplace_back(g.at(0).get<double>(),
                                       g.at(1).get<double>());
    } else if (im.contains("gain_period_s")) {
      cfg.gain_schedule = random_gain_schedule(
          im.at("gain_period_s").get<double>(), s.sim_duration_s,
          im.value("gain_min", 0.5), im.value("gain_max", 1.25),
          im.value("rng_seed", std::uint64_t(0)) ^ 0x9e3779b97f4a7c15ull);
    }
    cfg.phase_offset_rad = im.value("phase_offset_rad", 0.0);
    cfg.freq_offset_hz = im.value("freq_offset_hz", 0.0);
    cfg.sro_hz = im.value("sro_hz", 0.0);
    if (im.contains("snr_db")) cfg.snr_db = snr_from_json(im.at("snr_db"));
    cfg.rng_seed = im.value("rng_seed", std::uint64_t(0));
    s.impairments = cfg;
  }
  s.validate();
  return s;
}

GridScenario scenario_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

double load_controller_step(LoadControllerState& ctrl,
                            const std::optional<EnergyPacketMessage>& det,
                            double t) {
  if (det) {
    if (t < ctrl.active_until_s) ctrl.overlap_warning = true;
    ctrl.setpoint_a = double(det->current_ma) / 1000.0;
    ctrl.active_from_s = t;
    ctrl.active_until_s = t + double(det->duration_ms) / 1000.0;
  }
  if (t >= ctrl.active_from_s && t < ctrl.active_until_s)
    return ctrl.setpoint_a;
  return ctrl.idle_a;
}

ScenarioTrace run_scenario(const GridScenario& scenario) {
  scenario.validate();
  const double fs = scenario.rates.fs_passband;
  const std::size_t nsamp = std::size_t(scenario.sim_duration_s * fs);
  const PulseShape pulse =
      make_pulse_shape(0.5, 8, scenario.rates.sps_passband);

  // Generator: place modulated frames on the information path.
  std::vector<double> info(nsamp, 0.0);
  double busy_until = -1.0;
  for (const auto& cmd : scenario.tx_schedule) {
    const LoadSpec& dest = scenario.load_by_address(cmd.msg.dest_address);
    const ChipFrame frame = make_message_frame(cmd.msg, dest.code);
    if (cmd.time_s < busy_until)
      throw std::invalid_argument("tx_schedule frames overlap in time");
    busy_until =
        cmd.time_s + double(frame.total_chips()) / scenario.rates.chip_rate;
    const PassbandStream wave = modulate(frame, scenario.rates, pulse);
    const std::size_t s0 = std::size_t(std::llround(cmd.time_s * fs));
    for (std::size_t k = 0; k < wave.samples.size() && s0 + k < nsamp; ++k)
      info[s0 + k] += wave.samples[k];
  }

  PowerSignalConfig pcfg;
  pcfg.v_dc = scenario.v_dc;
  pcfg.mod_index = scenario.mod_index;
  PassbandStream bus = inject_power_signal({std::move(info), fs}, pcfg);
  bus = apply_impairments(bus, scenario.impairments, scenario.rates.chip_rate);
  bus.samples.resize(nsamp, scenario.v_dc);  // SRO may change the length

  ScenarioTrace trace;
  trace.fs = fs;
  trace.bus_voltage = bus.samples;
  trace.load_currents.assign(scenario.loads.size(),
                             std::vector<double>(nsamp, 0.0));
  trace.total_current.assign(nsamp, 0.0);

  // One receiver per load, then replay detections through the controllers.
  std::vector<std::vector<Detection>> dets(scenario.loads.size());
  for (std::size_t li = 0; li < scenario.loads.size(); ++li) {
    ReceiverConfig rcfg;
    rcfg.rates = scenario.rates;
    rcfg.record_traces = false;
    const ReceiverResult rr = receive(bus, scenario.loads[li].code, rcfg);
    for (const Detection& d : rr.messages)
      if (d.msg.dest_address == scenario.loads[li].address)
        dets[li].push_back(d);
  }

  for (std::size_t li = 0; li < scenario.loads.size(); ++li) {
    LoadControllerState ctrl;
    ctrl.idle_a = scenario.loads[li].idle_current_a;
    std::size_t next = 0;
    for (std::size_t n = 0; n < nsamp; ++n) {
      const double t = double(n) / fs;
      std::optional<EnergyPacketMessage> det;
      if (next < dets[li].size() && dets[li][next].time_s <= t) {
        det = dets[li][next].msg;
        DetectionRecord rec;
        rec.address = scenario.loads[li].address;
        rec.time_s = dets[li][next].time_s;
        rec.msg = dets[li][next].msg;
        trace.detections.push_back(rec);
        ++next;
      }
      trace.load_currents[li][n] = load_controller_step(ctrl, det, t);
      trace.total_current[n] += trace.load_currents[li][n];
    }
    if (ctrl.overlap_warning)
      trace.warnings.push_back("overlapping command at load address " +
                               std::to_string(int(scenario.loads[li].address)));
  }
  std::sort(trace.detections.begin(), trace.detections.end(),
            [](const DetectionRecord& a, const DetectionRecord& b) {
              return a.time_s < b.time_s;
            });
  return trace;
}

double packet_energy(const ScenarioTrace& trace, std::size_t load_index,
                     double t0, double t1) {
  if (load_index >= trace.load_currents.size())
    throw std::invalid_argument("load index out of range");
  const double dt = 1.0 / trace.fs;
  const std::size_t n0 = std::size_t(std::max(0.0, t0 * trace.fs));
  const std::size_t n1 = std::min<std::size_t>(
      trace.bus_voltage.size(), std::size_t(std::max(0.0, t1 * trace.fs)));
  double e = 0.0;
  for (std::size_t n = n0; n < n1; ++n)
    e += trace.bus_voltage[n] * trace.load_currents[load_index][n] * dt;
  return e;
}

}  // namespace psdm
