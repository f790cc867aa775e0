#include "handover/harness/batch.hpp"

#include <cstdio>

#include "handover/csv.hpp"
#include "handover/error.hpp"

namespace handover::harness {

Arm proposed_arm() { return Arm{"proposed", ControllerKind::admittance, ReleaseKind::network}; }
Arm baseline_arm() { return Arm{"baseline", ControllerKind::pd, ReleaseKind::threshold}; }

std::vector<Arm> parse_arms(std::string_view selection) {
  if (selection == "both") return {proposed_arm(), baseline_arm()};
  if (selection == "proposed-only") return {proposed_arm()};
  if (selection == "baseline-only") return {baseline_arm()};
  throw ConfigError("arms must be 'both', 'proposed-only' or 'baseline-only', got '" + std::string(selection) + "'");
}

BatchResult evaluate_batch(const std::vector<Scenario>& scenarios, const std::vector<Arm>& arms,
                           std::shared_ptr<const detector::LstmNetwork<float>> network,
                           const EpisodeProgress& progress) {
  if (scenarios.empty()) throw ConfigError("a batch needs at least one scenario");
  if (arms.empty()) throw ConfigError("a batch needs at least one arm");
  BatchResult result;
  for (const Arm& arm : arms) result.summary.push_back(ArmSummary{arm.name});
  std::vector<double> latency_sum(arms.size(), 0.0), compute_sum(arms.size(), 0.0);

  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    for (std::size_t a = 0; a < arms.size(); ++a) {
      Scenario s = scenarios[i];
      s.controller = arms[a].controller;
      s.release = arms[a].release;
      EpisodeOptions opts;
      opts.network = network;
      EpisodeRecord rec{i, arms[a].name, s.seed, run_handover(s, opts)};

      ArmSummary& sum = result.summary[a];
      const EpisodeMetrics& m = rec.metrics;
      if (sum.episodes == 0) sum.min_separation = m.min_separation;
      ++sum.episodes;
      switch (m.outcome) {
        case Outcome::success:
          ++sum.successes;
          latency_sum[a] += m.release_latency();
          break;
        case Outcome::premature_drop: ++sum.premature_drops; break;
        case Outcome::failed_release: ++sum.failed_releases; break;
      }
      sum.safety_violations += m.safety_violations;
      sum.max_limit_excess = std::max(sum.max_limit_excess, m.max_limit_excess);
      sum.min_separation = std::min(sum.min_separation, m.min_separation);
      compute_sum[a] += m.compute.mean;
      sum.max_cycle_time = std::max(sum.max_cycle_time, m.compute.max);
      if (progress) progress(rec);
      result.episodes.push_back(std::move(rec));
    }
  }
  for (std::size_t a = 0; a < arms.size(); ++a) {
    ArmSummary& sum = result.summary[a];
    sum.mean_release_latency = sum.successes > 0 ? latency_sum[a] / sum.successes : 0.0;
    sum.mean_cycle_time = compute_sum[a] / sum.episodes;
  }
  return result;
}

void write_episodes_csv(const std::filesystem::path& path, const BatchResult& result) {
  csv::write_atomically(path, [&](std::ostream& out) {
    csv::Writer w(out);
    w.header({"scenario", "arm", "seed", "outcome", "release_time", "release_latency", "transferred_at_release",
              "arrival_time", "engagement_time", "min_separation", "max_directed_speed", "max_limit_excess",
              "safety_violations", "accel_infeasible_cycles", "max_path_deviation"});
    for (const auto& r : result.episodes) {
      const EpisodeMetrics& m = r.metrics;
      w.field(static_cast<long long>(r.scenario)).field(r.arm).field(std::to_string(r.seed));
      w.field(to_string(m.outcome)).field(m.release_time);
      w.field(m.release_time >= 0.0 ? m.release_latency() : 0.0).field(m.transferred_at_release);
      w.field(m.arrival_time).field(m.engagement_time).field(m.min_separation).field(m.max_directed_speed);
      w.field(m.max_limit_excess).field(static_cast<long long>(m.safety_violations));
      w.field(static_cast<long long>(m.accel_infeasible_cycles)).field(m.max_path_deviation);
      w.end_row();
    }
  });
}

void write_summary_csv(const std::filesystem::path& path, const BatchResult& result) {
  csv::write_atomically(path, [&](std::ostream& out) {
    csv::Writer w(out);
    w.header({"arm", "episodes", "successes", "failures", "premature_drops", "failed_releases",
              "mean_release_latency", "safety_violations", "max_limit_excess", "min_separation"});
    for (const auto& s : result.summary) {
      w.field(s.arm).field(static_cast<long long>(s.episodes)).field(static_cast<long long>(s.successes));
      w.field(static_cast<long long>(s.failures())).field(static_cast<long long>(s.premature_drops));
      w.field(static_cast<long long>(s.failed_releases)).field(s.mean_release_latency);
      w.field(static_cast<long long>(s.safety_violations)).field(s.max_limit_excess).field(s.min_separation);
      w.end_row();
    }
  });
}

std::string summary_table(const BatchResult& result) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %10s %10s %11s %10s %12s\n", "arm", "episodes", "success",
                "failures", "premature", "no-release", "latency[s]", "violations", "cycle[ms]");
  out += line;
  for (const auto& s : result.summary) {
    std::snprintf(line, sizeof line, "%-10s %8d %8d %8d %10d %10d %11.3f %10d %12.3f\n", s.arm.c_str(), s.episodes,
                  s.successes, s.failures(), s.premature_drops, s.failed_releases, s.mean_release_latency,
                  s.safety_violations, s.mean_cycle_time * 1e3);
    out += line;
  }
  return out;
}

}  // namespace handover::harness
