#include "ips/scenario_io.hpp"

#include <fstream>

#include "ips/error.hpp"

namespace ips {
namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

ordered_json xy(const Position2D& p) { return ordered_json::array({p.x, p.y}); }
Position2D xy_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

ordered_json offset_json(const SensorOffset& o) {
  return ordered_json{{"x_off", o.x_off}, {"y_off", o.y_off}, {"phi_off", o.phi_off}};
}
SensorOffset offset_from(const json& j) {
  return {j.at("x_off").get<double>(), j.at("y_off").get<double>(), j.at("phi_off").get<double>()};
}

ordered_json clock_json(const ClockModel& c) {
  return ordered_json{{"offset", c.offset}, {"drift", c.drift}};
}
ClockModel clock_from(const json& j) {
  return {j.at("offset").get<double>(), j.at("drift").get<double>()};
}

ordered_json anchors_json(const std::vector<Anchor>& anchors) {
  ordered_json arr = ordered_json::array();
  for (const Anchor& a : anchors) {
    arr.push_back(ordered_json{{"id", a.id},
                               {"kind", a.kind == AnchorKind::kUwb ? "uwb" : "wifi"},
                               {"position", xy(a.position)}});
  }
  return arr;
}
std::vector<Anchor> anchors_from(const json& j) {
  std::vector<Anchor> out;
  for (const json& a : j) {
    const std::string kind = a.at("kind").get<std::string>();
    if (kind != "uwb" && kind != "wifi") {
      throw Error(ErrorCode::kSchemaViolation, "unknown anchor kind '" + kind + "'");
    }
    out.push_back({a.at("id").get<std::string>(),
                   kind == "uwb" ? AnchorKind::kUwb : AnchorKind::kWifi,
                   xy_from(a.at("position"))});
  }
  return out;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

}  // namespace

ordered_json scenario_to_json(const Scenario& sc) {
  ordered_json j;
  j["seed"] = sc.seed;
  j["bounds"] = ordered_json{{"width", sc.bounds.width}, {"height", sc.bounds.height}};
  j["uwb_anchors"] = anchors_json(sc.uwb_anchors);
  j["wifi_anchors"] = anchors_json(sc.wifi_anchors);
  j["subcarriers"] = sc.subcarriers;
  j["subcarrier_spacing_hz"] = sc.subcarrier_spacing_hz;

  ordered_json field;
  field["earth_ut"] = sc.magnetic_field.earth_ut;
  field["bump_scale"] = sc.magnetic_field.bump_scale;
  field["bumps"] = ordered_json::array();
  for (const MagneticBump& b : sc.magnetic_field.bumps) {
    field["bumps"].push_back(ordered_json{
        {"center", xy(b.center)}, {"sigma_m", b.sigma_m}, {"amplitude_ut", b.amplitude_ut}});
  }
  j["magnetic_field"] = field;

  ordered_json mp = ordered_json::array();
  for (const auto& rays : sc.multipath) {
    ordered_json arr = ordered_json::array();
    for (const Ray& r : rays) {
      arr.push_back(ordered_json{{"wall", static_cast<int>(r.wall)},
                                 {"gain", r.gain},
                                 {"path_offset_m", r.path_offset_m}});
    }
    mp.push_back(arr);
  }
  j["multipath"] = mp;
  j["session_phase"] = sc.session_phase;
  j["path_loss"] = ordered_json{{"p0_dbm", sc.path_loss.p0_dbm},
                                {"d0_m", sc.path_loss.d0_m},
                                {"exponent", sc.path_loss.exponent}};
  j["sensor_offsets"] = ordered_json{{"uwb", offset_json(sc.sensor_offsets.uwb)},
                                     {"wifi", offset_json(sc.sensor_offsets.wifi)},
                                     {"imu", offset_json(sc.sensor_offsets.imu)}};
  return j;
}

Scenario scenario_from_json(const json& j) {
  return guarded([&] {
    Scenario sc;
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.bounds = {j.at("bounds").at("width").get<double>(), j.at("bounds").at("height").get<double>()};
    sc.uwb_anchors = anchors_from(j.at("uwb_anchors"));
    sc.wifi_anchors = anchors_from(j.at("wifi_anchors"));
    sc.subcarriers = j.at("subcarriers").get<std::size_t>();
    sc.subcarrier_spacing_hz = j.at("subcarrier_spacing_hz").get<double>();
    const json& field = j.at("magnetic_field");
    sc.magnetic_field.earth_ut = field.at("earth_ut").get<std::array<double, 3>>();
    sc.magnetic_field.bump_scale = field.at("bump_scale").get<double>();
    for (const json& b : field.at("bumps")) {
      sc.magnetic_field.bumps.push_back({xy_from(b.at("center")), b.at("sigma_m").get<double>(),
                                         b.at("amplitude_ut").get<std::array<double, 3>>()});
    }
    for (const json& rays : j.at("multipath")) {
      std::vector<Ray> list;
      for (const json& r : rays) {
        const int wall = r.at("wall").get<int>();
        if (wall < -1 || wall > 3) throw Error(ErrorCode::kSchemaViolation, "bad wall index");
        list.push_back({static_cast<Wall>(wall), r.at("gain").get<double>(),
                        r.at("path_offset_m").get<double>()});
      }
      sc.multipath.push_back(std::move(list));
    }
    sc.session_phase = j.at("session_phase").get<std::vector<double>>();
    const json& pl = j.at("path_loss");
    sc.path_loss = {pl.at("p0_dbm").get<double>(), pl.at("d0_m").get<double>(),
                    pl.at("exponent").get<double>()};
    const json& off = j.at("sensor_offsets");
    sc.sensor_offsets = {offset_from(off.at("uwb")), offset_from(off.at("wifi")),
                         offset_from(off.at("imu"))};
    if (sc.multipath.size() != sc.wifi_anchors.size() ||
        sc.session_phase.size() != sc.wifi_anchors.size()) {
      throw Error(ErrorCode::kSchemaViolation, "per-anchor wifi tables have the wrong length");
    }
    return sc;
  });
}

ordered_json sim_config_to_json(const SimConfig& c) {
  ordered_json j;
  j["duration_s"] = c.duration_s;
  j["speed_mps"] = c.speed_mps;
  j["rates"] = ordered_json{{"gt", c.rates.gt}, {"csi", c.rates.csi}, {"uwb", c.rates.uwb},
                            {"imu", c.rates.imu}};
  const NoiseConfig& n = c.noise;
  j["noise"] = ordered_json{{"uwb_sigma_m", n.uwb_sigma_m},
                            {"uwb_nlos_prob", n.uwb_nlos_prob},
                            {"uwb_nlos_bias_m", n.uwb_nlos_bias_m},
                            {"uwb_dropout_prob", n.uwb_dropout_prob},
                            {"uwb_power_sigma_db", n.uwb_power_sigma_db},
                            {"rssi_sigma_db", n.rssi_sigma_db},
                            {"csi_magnitude_sigma", n.csi_magnitude_sigma},
                            {"csi_phase_sigma_rad", n.csi_phase_sigma_rad},
                            {"csi_gain_sigma_db", n.csi_gain_sigma_db},
                            {"imu_accel_sigma", n.imu_accel_sigma},
                            {"imu_gyro_sigma", n.imu_gyro_sigma},
                            {"mag_sigma_ut", n.mag_sigma_ut}};
  j["clocks"] = ordered_json{{"uwb", clock_json(c.clocks.uwb)},
                             {"wifi", clock_json(c.clocks.wifi)},
                             {"imu", clock_json(c.clocks.imu)}};
  j["rssi_attenuation_db"] = c.rssi_attenuation_db;
  j["noise_seed"] = c.noise_seed;
  j["trajectory"] = ordered_json{{"lane_spacing_m", c.trajectory.lane_spacing_m},
                                 {"margin_m", c.trajectory.margin_m},
                                 {"turn_speed_factor", c.trajectory.turn_speed_factor}};
  return j;
}

SimConfig sim_config_from_json(const json& j) {
  return guarded([&] {
    SimConfig c;
    c.duration_s = j.at("duration_s").get<double>();
    c.speed_mps = j.at("speed_mps").get<double>();
    const json& r = j.at("rates");
    c.rates = {r.at("gt").get<double>(), r.at("csi").get<double>(), r.at("uwb").get<double>(),
               r.at("imu").get<double>()};
    const json& n = j.at("noise");
    c.noise.uwb_sigma_m = n.at("uwb_sigma_m").get<double>();
    c.noise.uwb_nlos_prob = n.at("uwb_nlos_prob").get<double>();
    c.noise.uwb_nlos_bias_m = n.at("uwb_nlos_bias_m").get<double>();
    c.noise.uwb_dropout_prob = n.at("uwb_dropout_prob").get<double>();
    c.noise.uwb_power_sigma_db = n.at("uwb_power_sigma_db").get<double>();
    c.noise.rssi_sigma_db = n.at("rssi_sigma_db").get<double>();
    c.noise.csi_magnitude_sigma = n.at("csi_magnitude_sigma").get<double>();
    c.noise.csi_phase_sigma_rad = n.at("csi_phase_sigma_rad").get<double>();
    c.noise.csi_gain_sigma_db = n.at("csi_gain_sigma_db").get<double>();
    c.noise.imu_accel_sigma = n.at("imu_accel_sigma").get<double>();
    c.noise.imu_gyro_sigma = n.at("imu_gyro_sigma").get<double>();
    c.noise.mag_sigma_ut = n.at("mag_sigma_ut").get<double>();
    const json& k = j.at("clocks");
    c.clocks = {clock_from(k.at("uwb")), clock_from(k.at("wifi")), clock_from(k.at("imu"))};
    c.rssi_attenuation_db = j.at("rssi_attenuation_db").get<double>();
    c.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    const json& t = j.at("trajectory");
    c.trajectory = {t.at("lane_spacing_m").get<double>(), t.at("margin_m").get<double>(),
                    t.at("turn_speed_factor").get<double>()};
    return c;
  });
}

ordered_json perturbation_to_json(const Perturbation& p) {
  return ordered_json{{"sensor_offset_delta", offset_json(p.sensor_offset_delta)},
                      {"anchor_jitter_sigma_m", p.anchor_jitter_sigma_m},
                      {"session_phase_reseed", p.session_phase_reseed},
                      {"magnetic_drift", p.magnetic_drift}};
}

Perturbation perturbation_from_json(const json& j) {
  return guarded([&] {
    Perturbation p;
    p.sensor_offset_delta = offset_from(j.at("sensor_offset_delta"));
    p.anchor_jitter_sigma_m = j.at("anchor_jitter_sigma_m").get<double>();
    p.session_phase_reseed = j.at("session_phase_reseed").get<bool>();
    p.magnetic_drift = j.at("magnetic_drift").get<double>();
    return p;
  });
}

ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["seed"] = m.seed;
  j["perturbation"] = perturbation_to_json(m.perturbation);
  j["dataset1"] = ordered_json{{"scenario", scenario_to_json(m.dataset1)},
                               {"sim_config", sim_config_to_json(m.config1)}};
  j["dataset2"] = ordered_json{{"scenario", scenario_to_json(m.dataset2)},
                               {"sim_config", sim_config_to_json(m.config2)}};
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  return guarded([&] {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.perturbation = perturbation_from_json(j.at("perturbation"));
    m.dataset1 = scenario_from_json(j.at("dataset1").at("scenario"));
    m.config1 = sim_config_from_json(j.at("dataset1").at("sim_config"));
    m.dataset2 = scenario_from_json(j.at("dataset2").at("scenario"));
    m.config2 = sim_config_from_json(j.at("dataset2").at("sim_config"));
    return m;
  });
}

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedLine, path + ": " + e.what());
  }
}

}  // namespace ips
