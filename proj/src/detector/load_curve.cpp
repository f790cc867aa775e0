#include "handover/detector/load_curve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "handover/error.hpp"

namespace handover::detector {

void LoadCurveParams::validate() const {
  if (!(f_L0 > 0.0)) throw Error("initial load f_L0 must be positive");
  if (!(pull_magnitude > 0.0)) throw Error("pull magnitude must be positive");
  if (!(noise_sigma >= 0.0)) throw Error("noise sigma must be non-negative");
  if (!(transfer_duration > 0.0) || !(pull_duration > 0.0))
    throw Error("transfer and pull durations must be positive");
  if (!(plateau_duration >= 0.0) || !(engagement_time >= 0.0))
    throw Error("engagement time and plateau duration must be non-negative");
  if (!(f_G0 >= residual_grip) || !(residual_grip >= 0.0))
    throw Error("grip forces must satisfy f_G0 >= residual_grip >= 0");
  for (const auto& d : disturbance_events)
    if (!(d.width > 0.0)) throw Error("disturbance width must be positive");
}

LoadState evaluate_load(const LoadCurveParams& p, double t) {
  LoadState s;
  const double tau = t - p.engagement_time;
  if (tau < 0.0) {
    s.fz = -p.f_L0;
    s.transferred = 0.0;
    s.grip = p.f_G0;
  } else if (tau < p.transfer_duration) {
    s.transferred = tau / p.transfer_duration;
    s.fz = -p.f_L0 * (1.0 - s.transferred);
    s.grip = p.f_G0 - (p.f_G0 - p.residual_grip) * s.transferred;
  } else {
    s.transferred = 1.0;
    s.grip = p.residual_grip;
    const double u = (tau - p.transfer_duration - p.plateau_duration) / p.pull_duration;
    s.fz = (u > 0.0 && u < 1.0) ? -p.pull_magnitude * (1.0 - std::abs(2.0 * u - 1.0)) : 0.0;
  }
  s.release = t > p.pull_onset();
  return s;
}

double disturbance_force(const std::vector<DisturbanceEvent>& events, double t) {
  double f = 0.0;
  for (const auto& d : events) {
    const double local = t - d.time;
    if (local < 0.0 || local > d.width) continue;
    const double edge = std::min(0.005, d.width / 4.0);
    const double shape = std::min({1.0, local / edge, (d.width - local) / edge});
    f += d.peak * shape;
  }
  return f;
}

std::array<double, 6> draw_noise(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 6> n{};
  for (auto& v : n) v = normal(rng);
  return n;
}

WrenchSample sensor_wrench(double fz, const Eigen::Vector3d& com_offset, double sigma,
                           const std::array<double, 6>& noise) {
  const double torque_sigma = sigma * 0.02;
  WrenchSample w{};
  w[0] = sigma * noise[0];
  w[1] = sigma * noise[1];
  w[2] = fz + sigma * noise[2];
  // r x (0, 0, fz)
  w[3] = com_offset.y() * fz + torque_sigma * noise[3];
  w[4] = -com_offset.x() * fz + torque_sigma * noise[4];
  w[5] = torque_sigma * noise[5];
  return w;
}

std::vector<ForceSample> generate_handover_sequence(const LoadCurveParams& p, double duration, double rate) {
  p.validate();
  if (!(rate > 0.0)) throw Error("sample rate must be positive");
  if (!(duration > 0.0)) throw Error("sequence duration must be positive");
  if (p.schedule_end() > duration + 1e-12) {
    std::ostringstream os;
    os << "handover schedule ends at " << p.schedule_end() << " s, beyond the " << duration
       << " s sequence";
    throw Error(os.str());
  }
  for (const auto& d : p.disturbance_events)
    if (d.time + d.width > duration + 1e-12) throw Error("disturbance extends beyond the sequence");

  const auto count = static_cast<std::size_t>(std::llround(duration * rate));
  std::vector<ForceSample> out(count);
  std::mt19937_64 rng(p.seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / rate;
    const LoadState s = evaluate_load(p, t);
    const double fz = s.fz + disturbance_force(p.disturbance_events, t);
    out[i].time = t;
    out[i].wrench = sensor_wrench(fz, p.com_offset, p.noise_sigma, draw_noise(rng));
    out[i].label = s.release ? 1 : 0;
  }
  return out;
}

double Range::sample(std::mt19937_64& rng) const {
  if (min == max) return min;
  std::uniform_real_distribution<double> dist(min, max);
  return dist(rng);
}

void GeneratorRanges::validate() const {
  const std::pair<const char*, const Range*> ranges[] = {
      {"f_L0", &f_L0},
      {"f_G0", &f_G0},
      {"engagement_time", &engagement_time},
      {"transfer_duration", &transfer_duration},
      {"plateau_duration", &plateau_duration},
      {"pull_duration", &pull_duration},
      {"pull_magnitude", &pull_magnitude},
      {"residual_grip", &residual_grip},
      {"noise_sigma", &noise_sigma},
      {"tail_duration", &tail_duration},
      {"com_lateral", &com_lateral},
      {"com_height", &com_height},
      {"disturbance_width", &disturbance_width},
      {"cancelling_peak", &cancelling_peak},
      {"general_peak", &general_peak},
  };
  for (const auto& [name, r] : ranges)
    if (!(r->min <= r->max) || !std::isfinite(r->min) || !std::isfinite(r->max))
      throw Error(std::string("empty parameter range for ") + name);
  if (!(f_L0.min > 0.0)) throw Error("f_L0 range must be positive");
  if (!(pull_magnitude.min > 0.0)) throw Error("pull magnitude range must be positive");
  if (!(transfer_duration.min > 0.0) || !(pull_duration.min > 0.0) || !(disturbance_width.min > 0.0))
    throw Error("duration ranges must be positive");
  if (!(noise_sigma.min >= 0.0)) throw Error("noise range must be non-negative");
  if (!(residual_grip.max <= f_G0.min)) throw Error("residual grip must not exceed the initial grip");
  if (max_disturbances < 0) throw Error("max_disturbances must be non-negative");
}

std::vector<DisturbanceEvent> sample_disturbances(const GeneratorRanges& ranges,
                                                  const LoadCurveParams& curve,
                                                  std::mt19937_64& rng, double earliest) {
  std::vector<DisturbanceEvent> events;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (ranges.max_disturbances == 0 || unit(rng) >= ranges.disturbance_probability) return events;
  std::uniform_int_distribution<int> count_dist(1, ranges.max_disturbances);
  const int count = count_dist(rng);
  const double horizon =
      curve.engagement_time + ranges.disturbance_horizon * curve.transfer_duration;
  for (int k = 0; k < count; ++k) {
    DisturbanceEvent d;
    d.width = ranges.disturbance_width.sample(rng);
    const double latest = horizon - d.width;
    if (latest <= earliest) continue;
    d.time = Range{earliest, latest}.sample(rng);
    const bool cancelling = unit(rng) < ranges.cancelling_fraction;
    const double factor = cancelling ? ranges.cancelling_peak.sample(rng) : ranges.general_peak.sample(rng);
    d.peak = factor * curve.f_L0;
    events.push_back(d);
  }
  return events;
}

SequenceSpec sample_sequence_spec(const GeneratorRanges& ranges, std::mt19937_64& rng) {
  SequenceSpec spec;
  LoadCurveParams& c = spec.curve;
  c.f_L0 = ranges.f_L0.sample(rng);
  c.f_G0 = ranges.f_G0.sample(rng);
  c.engagement_time = ranges.engagement_time.sample(rng);
  c.transfer_duration = ranges.transfer_duration.sample(rng);
  c.plateau_duration = ranges.plateau_duration.sample(rng);
  c.pull_duration = ranges.pull_duration.sample(rng);
  c.pull_magnitude = ranges.pull_magnitude.sample(rng);
  c.residual_grip = ranges.residual_grip.sample(rng);
  c.noise_sigma = ranges.noise_sigma.sample(rng);
  c.com_offset = Eigen::Vector3d(ranges.com_lateral.sample(rng), ranges.com_lateral.sample(rng),
                                 ranges.com_height.sample(rng));
  c.disturbance_events = sample_disturbances(ranges, c, rng);
  c.seed = rng();
  spec.duration = c.schedule_end() + ranges.tail_duration.sample(rng);
  return spec;
}

}  // namespace handover::detector
