#include "handover/harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "handover/detector/load_curve.hpp"
#include "handover/error.hpp"

namespace handover::harness {

using config::Json;

std::string to_string(ControllerKind c) { return c == ControllerKind::admittance ? "admittance" : "pd"; }
std::string to_string(ReleaseKind r) { return r == ReleaseKind::network ? "network" : "threshold"; }

ControllerKind parse_controller(std::string_view name) {
  if (name == "admittance") return ControllerKind::admittance;
  if (name == "pd") return ControllerKind::pd;
  throw ConfigError("controller must be 'admittance' or 'pd', got '" + std::string(name) + "'");
}

ReleaseKind parse_release(std::string_view name) {
  if (name == "network") return ReleaseKind::network;
  if (name == "threshold") return ReleaseKind::threshold;
  throw ConfigError("release must be 'network' or 'threshold', got '" + std::string(name) + "'");
}

Eigen::VectorXd default_grasp_q() {
  constexpr double half_pi = std::numbers::pi / 2.0;
  Eigen::VectorXd q(6);
  q << half_pi, -1.2, 1.6, -half_pi - 0.4, -half_pi, 0.0;
  return q;
}

namespace {

detector::LoadCurveParams curve_of(const Scenario& s, double engagement) {
  detector::LoadCurveParams c;
  c.f_L0 = s.object_weight();
  c.f_G0 = s.transfer.f_G0;
  c.engagement_time = engagement;
  c.transfer_duration = s.transfer.transfer_duration;
  c.plateau_duration = s.transfer.plateau_duration;
  c.pull_duration = s.transfer.pull_duration;
  c.pull_magnitude = s.transfer.pull_magnitude;
  c.residual_grip = s.transfer.residual_grip;
  c.noise_sigma = s.transfer.noise_sigma;
  c.com_offset = s.transfer.com_offset;
  return c;
}

void positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

void Scenario::validate() const {
  positive(control_rate, "control_rate");
  positive(sensor_rate, "sensor_rate");
  if (control_rate != sensor_rate)
    throw ConfigError("sensor_rate must equal control_rate (one reading per control cycle)");
  positive(object_mass, "object_mass");
  positive(approach_duration, "approach_duration");
  positive(retreat_duration, "retreat_duration");
  positive(release_timeout, "release_timeout");
  positive(max_duration, "max_duration");
  if (!(pinv_damping >= 0.0)) throw ConfigError("pinv_damping must be non-negative");
  if (grasp_q.size() != robot.joint_count())
    throw ConfigError("grasp_q has " + std::to_string(grasp_q.size()) + " entries for a " +
                      std::to_string(robot.joint_count()) + "-joint robot");
  if (!(receiver_engagement_time > 0.0 && receiver_engagement_time < max_duration))
    throw ConfigError("receiver_engagement_time must lie inside the episode");
  try {
    curve_of(*this, receiver_engagement_time).validate();
    safety.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  for (std::size_t i = 1; i < hand_motion.size(); ++i)
    if (!(hand_motion[i].time > hand_motion[i - 1].time))
      throw ConfigError("hand_motion waypoint times must be strictly increasing");
  for (const auto& d : disturbances) positive(d.width, "disturbance width");
  if (!(pd.kp > 0.0) || !(pd.kd >= 0.0)) throw ConfigError("pd gains must satisfy kp > 0, kd >= 0");
  if (!(detector.probability_threshold > 0.0 && detector.probability_threshold < 1.0))
    throw ConfigError("detector.probability_threshold must lie in (0, 1)");
  if (detector.consecutive_required < 1 || detector.hold_samples < 1 || detector.calibration_samples < 1)
    throw ConfigError("detector sample counts must be positive");
  if (!(detector.theta > 0.0 && detector.theta <= 1.0)) throw ConfigError("detector.theta must lie in (0, 1]");
  if (detector.calibration_samples > approach_duration * control_rate)
    throw ConfigError("threshold calibration window is longer than the approach");
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("scenario field '") + key + "' has the wrong type");
  }
}

}  // namespace

Scenario scenario_from_json(const Json& j) {
  config::check_keys(j, "scenario",
                     {"name", "seed", "object_mass", "grasp_q", "handover_hand_position", "delivery_offset",
                      "hand_motion", "receiver_engagement_time", "transfer", "disturbances", "controller",
                      "release", "control_rate", "sensor_rate", "approach_duration", "retreat_duration",
                      "release_timeout", "max_duration", "pinv_damping", "robot", "safety", "admittance", "pd",
                      "detector"});
  Scenario s;
  if (j.contains("robot")) s.robot = config::model_from_json(j.at("robot"));
  s.grasp_q = j.contains("grasp_q") ? config::vector_from_json(j.at("grasp_q"), "grasp_q") : default_grasp_q();
  read(j, "name", s.name);
  read(j, "seed", s.seed);
  read(j, "object_mass", s.object_mass);
  if (j.contains("handover_hand_position"))
    s.handover_hand_position = config::vec3_from_json(j.at("handover_hand_position"), "handover_hand_position");
  if (j.contains("delivery_offset"))
    s.delivery_offset = config::vec3_from_json(j.at("delivery_offset"), "delivery_offset");
  if (j.contains("hand_motion")) {
    for (const auto& w : j.at("hand_motion")) {
      config::check_keys(w, "hand_motion", {"t", "position"});
      HandWaypoint hw;
      read(w, "t", hw.time);
      hw.position = config::vec3_from_json(w.at("position"), "hand_motion.position");
      s.hand_motion.push_back(hw);
    }
  }
  read(j, "receiver_engagement_time", s.receiver_engagement_time);
  if (j.contains("transfer")) {
    const Json& t = j.at("transfer");
    config::check_keys(t, "transfer",
                       {"f_G0", "transfer_duration", "plateau_duration", "pull_duration", "pull_magnitude",
                        "residual_grip", "noise_sigma", "com_offset"});
    read(t, "f_G0", s.transfer.f_G0);
    read(t, "transfer_duration", s.transfer.transfer_duration);
    read(t, "plateau_duration", s.transfer.plateau_duration);
    read(t, "pull_duration", s.transfer.pull_duration);
    read(t, "pull_magnitude", s.transfer.pull_magnitude);
    read(t, "residual_grip", s.transfer.residual_grip);
    read(t, "noise_sigma", s.transfer.noise_sigma);
    if (t.contains("com_offset")) s.transfer.com_offset = config::vec3_from_json(t.at("com_offset"), "com_offset");
  }
  if (j.contains("disturbances")) {
    for (const auto& d : j.at("disturbances")) {
      config::check_keys(d, "disturbances", {"anchor", "offset", "peak", "width"});
      ScenarioDisturbance sd;
      std::string anchor = "engagement";
      read(d, "anchor", anchor);
      if (anchor == "arrival")
        sd.anchor = DisturbanceAnchor::arrival;
      else if (anchor == "engagement")
        sd.anchor = DisturbanceAnchor::engagement;
      else
        throw ConfigError("disturbance anchor must be 'arrival' or 'engagement'");
      read(d, "offset", sd.offset);
      read(d, "peak", sd.peak);
      read(d, "width", sd.width);
      s.disturbances.push_back(sd);
    }
  }
  if (j.contains("controller")) s.controller = parse_controller(j.at("controller").get<std::string>());
  if (j.contains("release")) s.release = parse_release(j.at("release").get<std::string>());
  read(j, "control_rate", s.control_rate);
  read(j, "sensor_rate", s.sensor_rate);
  read(j, "approach_duration", s.approach_duration);
  read(j, "retreat_duration", s.retreat_duration);
  read(j, "release_timeout", s.release_timeout);
  read(j, "max_duration", s.max_duration);
  read(j, "pinv_damping", s.pinv_damping);
  if (j.contains("safety")) s.safety = config::safety_from_json(j.at("safety"));
  if (j.contains("admittance")) s.admittance = config::admittance_from_json(j.at("admittance"));
  if (j.contains("pd")) {
    config::check_keys(j.at("pd"), "pd", {"kp", "kd"});
    read(j.at("pd"), "kp", s.pd.kp);
    read(j.at("pd"), "kd", s.pd.kd);
  }
  if (j.contains("detector")) {
    const Json& d = j.at("detector");
    config::check_keys(d, "detector",
                       {"probability_threshold", "consecutive_required", "theta", "hold_samples",
                        "calibration_samples"});
    read(d, "probability_threshold", s.detector.probability_threshold);
    read(d, "consecutive_required", s.detector.consecutive_required);
    read(d, "theta", s.detector.theta);
    read(d, "hold_samples", s.detector.hold_samples);
    read(d, "calibration_samples", s.detector.calibration_samples);
  }
  s.validate();
  return s;
}

Json to_json(const Scenario& s) {
  Json motion = Json::array();
  for (const auto& w : s.hand_motion) motion.push_back({{"t", w.time}, {"position", config::to_json(w.position)}});
  Json dist = Json::array();
  for (const auto& d : s.disturbances)
    dist.push_back({{"anchor", d.anchor == DisturbanceAnchor::arrival ? "arrival" : "engagement"},
                    {"offset", d.offset},
                    {"peak", d.peak},
                    {"width", d.width}});
  const TransferProfile& t = s.transfer;
  return {{"name", s.name},
          {"seed", s.seed},
          {"object_mass", s.object_mass},
          {"grasp_q", config::to_json(s.grasp_q)},
          {"handover_hand_position", config::to_json(s.handover_hand_position)},
          {"delivery_offset", config::to_json(s.delivery_offset)},
          {"hand_motion", motion},
          {"receiver_engagement_time", s.receiver_engagement_time},
          {"transfer",
           {{"f_G0", t.f_G0},
            {"transfer_duration", t.transfer_duration},
            {"plateau_duration", t.plateau_duration},
            {"pull_duration", t.pull_duration},
            {"pull_magnitude", t.pull_magnitude},
            {"residual_grip", t.residual_grip},
            {"noise_sigma", t.noise_sigma},
            {"com_offset", config::to_json(t.com_offset)}}},
          {"disturbances", dist},
          {"controller", to_string(s.controller)},
          {"release", to_string(s.release)},
          {"control_rate", s.control_rate},
          {"sensor_rate", s.sensor_rate},
          {"approach_duration", s.approach_duration},
          {"retreat_duration", s.retreat_duration},
          {"release_timeout", s.release_timeout},
          {"max_duration", s.max_duration},
          {"pinv_damping", s.pinv_damping},
          {"robot", config::to_json(s.robot)},
          {"safety", config::to_json(s.safety)},
          {"admittance", config::to_json(s.admittance)},
          {"pd", {{"kp", s.pd.kp}, {"kd", s.pd.kd}}},
          {"detector",
           {{"probability_threshold", s.detector.probability_threshold},
            {"consecutive_required", s.detector.consecutive_required},
            {"theta", s.detector.theta},
            {"hold_samples", s.detector.hold_samples},
            {"calibration_samples", s.detector.calibration_samples}}}};
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  Json j = config::load_json_file(path);
  for (const auto& o : overrides) config::apply_override(j, o);
  return scenario_from_json(j);
}

HumanState human_motion(const Scenario& s, double t) {
  HumanState h;
  const auto& w = s.hand_motion;
  if (w.empty()) {
    h.hand_position = s.handover_hand_position;
    return h;
  }
  if (t < w.front().time) {
    h.hand_position = w.front().position;
    return h;
  }
  if (t >= w.back().time) {
    h.hand_position = w.back().position;
    return h;
  }
  const auto next = std::upper_bound(w.begin(), w.end(), t,
                                     [](double value, const HandWaypoint& p) { return value < p.time; });
  const HandWaypoint& b = *next;
  const HandWaypoint& a = *(next - 1);
  const double span = b.time - a.time;
  h.hand_velocity = (b.position - a.position) / span;
  h.hand_position = a.position + h.hand_velocity * (t - a.time);
  return h;
}

std::vector<Scenario> random_scenarios(const Scenario& base, const ScenarioRanges& r, int count,
                                       std::uint64_t seed, bool with_disturbances) {
  if (count < 1) throw ConfigError("a batch needs at least one scenario");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Scenario s = base;
    s.name = "batch-" + std::to_string(k);
    s.hand_motion.clear();
    s.disturbances.clear();
    s.handover_hand_position = Eigen::Vector3d(r.hand_x.sample(rng), r.hand_y.sample(rng), r.hand_z.sample(rng));
    s.object_mass = r.object_mass.sample(rng);
    const double delay = r.engagement_delay.sample(rng);
    s.receiver_engagement_time = s.approach_duration + delay;
    s.transfer.transfer_duration = r.transfer_duration.sample(rng);
    s.transfer.plateau_duration = r.plateau_duration.sample(rng);
    s.transfer.pull_duration = r.pull_duration.sample(rng);
    s.transfer.pull_magnitude = r.pull_magnitude.sample(rng);
    s.transfer.noise_sigma = r.noise_sigma.sample(rng);
    if (with_disturbances) {
      std::uniform_int_distribution<int> count_dist(r.min_disturbances, r.max_disturbances);
      const int n = count_dist(rng);
      const double earliest = -delay + 0.05;
      for (int i = 0; i < n; ++i) {
        ScenarioDisturbance d;
        d.width = r.disturbance_width.sample(rng);
        const double latest = r.disturbance_horizon * s.transfer.transfer_duration - d.width;
        d.offset = Range{earliest, std::max(earliest, latest)}.sample(rng);
        const bool cancelling = unit(rng) < r.cancelling_fraction;
        d.peak = (cancelling ? r.cancelling_peak.sample(rng) : r.general_peak.sample(rng)) * s.object_weight();
        s.disturbances.push_back(d);
      }
    }
    s.seed = rng();
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace handover::harness
