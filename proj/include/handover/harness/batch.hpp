#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "handover/harness/simulation.hpp"

namespace handover::harness {

/// A controller/release combination evaluated on every scenario.
struct Arm {
  std::string name;
  ControllerKind controller = ControllerKind::admittance;
  ReleaseKind release = ReleaseKind::network;
};

Arm proposed_arm();  // admittance + network release
Arm baseline_arm();  // PD + force threshold

/// "both", "proposed-only" or "baseline-only".
std::vector<Arm> parse_arms(std::string_view selection);

struct EpisodeRecord {
  std::size_t scenario = 0;
  std::string arm;
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
};

struct ArmSummary {
  std::string arm;
  int episodes = 0;
  int successes = 0;
  int premature_drops = 0;
  int failed_releases = 0;
  double mean_release_latency = 0.0;  // s, over successes
  int safety_violations = 0;          // cycles, summed
  double max_limit_excess = 0.0;
  double min_separation = 0.0;
  double mean_cycle_time = 0.0;  // console only
  double max_cycle_time = 0.0;   // console only

  int failures() const { return premature_drops + failed_releases; }
};

struct BatchResult {
  std::vector<EpisodeRecord> episodes;  // scenario-major, arms in the given order
  std::vector<ArmSummary> summary;
};

using EpisodeProgress = std::function<void(const EpisodeRecord&)>;

/// Runs every arm on every scenario; each pair shares the scenario seed.
BatchResult evaluate_batch(const std::vector<Scenario>& scenarios, const std::vector<Arm>& arms,
                           std::shared_ptr<const detector::LstmNetwork<float>> network,
                           const EpisodeProgress& progress = {});

void write_episodes_csv(const std::filesystem::path& path, const BatchResult& result);
void write_summary_csv(const std::filesystem::path& path, const BatchResult& result);
/// Fixed-width table for the console.
std::string summary_table(const BatchResult& result);

}  // namespace handover::harness
