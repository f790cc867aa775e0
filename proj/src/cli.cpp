#include "handover/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "handover/config.hpp"
#include "handover/csv.hpp"
#include "handover/detector/dataset.hpp"
#include "handover/detector/load_curve.hpp"
#include "handover/detector/training.hpp"
#include "handover/detector/weights_io.hpp"
#include "handover/error.hpp"
#include "handover/harness/batch.hpp"
#include "handover/harness/simulation.hpp"

namespace handover::cli {

namespace fs = std::filesystem;
using config::Json;

namespace {

struct Common {
  std::string out;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::vector<std::string> overrides;
};

fs::path output_dir(const Common& c) {
  fs::path dir;
  if (!c.out.empty())
    dir = c.out;
  else if (const char* env = std::getenv("HANDOVER_OUT_DIR"); env && *env)
    dir = env;
  else
    dir = "out";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
  return dir;
}

Json with_overrides(Json base, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) config::apply_override(base, o);
  return base;
}

std::string ms(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f ms", seconds * 1e3);
  return buf;
}

// ---- gen-data ---------------------------------------------------------------

Json range_json(const detector::Range& r) { return Json::array({r.min, r.max}); }

detector::Range range_from(const Json& j, const char* key, detector::Range fallback) {
  if (!j.contains(key)) return fallback;
  const Eigen::VectorXd v = config::vector_from_json(j.at(key), std::string("ranges.") + key, 2);
  return {v(0), v(1)};
}

Json ranges_to_json(const detector::GeneratorRanges& r) {
  return {{"f_L0", range_json(r.f_L0)},
          {"f_G0", range_json(r.f_G0)},
          {"engagement_time", range_json(r.engagement_time)},
          {"transfer_duration", range_json(r.transfer_duration)},
          {"plateau_duration", range_json(r.plateau_duration)},
          {"pull_duration", range_json(r.pull_duration)},
          {"pull_magnitude", range_json(r.pull_magnitude)},
          {"residual_grip", range_json(r.residual_grip)},
          {"noise_sigma", range_json(r.noise_sigma)},
          {"tail_duration", range_json(r.tail_duration)},
          {"com_lateral", range_json(r.com_lateral)},
          {"com_height", range_json(r.com_height)},
          {"disturbance_probability", r.disturbance_probability},
          {"max_disturbances", r.max_disturbances},
          {"disturbance_width", range_json(r.disturbance_width)},
          {"cancelling_fraction", r.cancelling_fraction},
          {"cancelling_peak", range_json(r.cancelling_peak)},
          {"general_peak", range_json(r.general_peak)},
          {"disturbance_horizon", r.disturbance_horizon}};
}

detector::GeneratorRanges ranges_from_json(const Json& j) {
  config::check_keys(j, "ranges",
                     {"f_L0", "f_G0", "engagement_time", "transfer_duration", "plateau_duration", "pull_duration",
                      "pull_magnitude", "residual_grip", "noise_sigma", "tail_duration", "com_lateral",
                      "com_height", "disturbance_probability", "max_disturbances", "disturbance_width",
                      "cancelling_fraction", "cancelling_peak", "general_peak", "disturbance_horizon"});
  detector::GeneratorRanges r;
  r.f_L0 = range_from(j, "f_L0", r.f_L0);
  r.f_G0 = range_from(j, "f_G0", r.f_G0);
  r.engagement_time = range_from(j, "engagement_time", r.engagement_time);
  r.transfer_duration = range_from(j, "transfer_duration", r.transfer_duration);
  r.plateau_duration = range_from(j, "plateau_duration", r.plateau_duration);
  r.pull_duration = range_from(j, "pull_duration", r.pull_duration);
  r.pull_magnitude = range_from(j, "pull_magnitude", r.pull_magnitude);
  r.residual_grip = range_from(j, "residual_grip", r.residual_grip);
  r.noise_sigma = range_from(j, "noise_sigma", r.noise_sigma);
  r.tail_duration = range_from(j, "tail_duration", r.tail_duration);
  r.com_lateral = range_from(j, "com_lateral", r.com_lateral);
  r.com_height = range_from(j, "com_height", r.com_height);
  r.disturbance_width = range_from(j, "disturbance_width", r.disturbance_width);
  r.cancelling_peak = range_from(j, "cancelling_peak", r.cancelling_peak);
  r.general_peak = range_from(j, "general_peak", r.general_peak);
  r.disturbance_probability = j.value("disturbance_probability", r.disturbance_probability);
  r.max_disturbances = j.value("max_disturbances", r.max_disturbances);
  r.cancelling_fraction = j.value("cancelling_fraction", r.cancelling_fraction);
  r.disturbance_horizon = j.value("disturbance_horizon", r.disturbance_horizon);
  return r;
}

int cmd_gen_data(const Common& common, std::ostream& out) {
  const Json defaults = {{"sequences", 200},
                         {"rate", 500.0},
                         {"window", detector::kDefaultWindow},
                         {"stride", detector::kDefaultStride},
                         {"ranges", ranges_to_json(detector::GeneratorRanges{})}};
  const Json cfg = with_overrides(defaults, common.overrides);
  config::check_keys(cfg, "gen-data config", {"sequences", "rate", "window", "stride", "ranges"});
  const int count = cfg.at("sequences").get<int>();
  const double rate = cfg.at("rate").get<double>();
  const int window = cfg.at("window").get<int>();
  const int stride = cfg.at("stride").get<int>();
  if (count < 1) throw ConfigError("sequences must be at least 1");
  if (!(rate > 0.0)) throw ConfigError("rate must be positive");
  if (window < 1 || stride < 1) throw ConfigError("window and stride must be positive");
  const detector::GeneratorRanges ranges = ranges_from_json(cfg.at("ranges"));
  ranges.validate();

  // Generate everything before touching the output directory.
  std::mt19937_64 rng(common.seed);
  std::vector<std::vector<detector::ForceSample>> sequences;
  Json seeds = Json::array();
  for (int i = 0; i < count; ++i) {
    const detector::SequenceSpec spec = detector::sample_sequence_spec(ranges, rng);
    sequences.push_back(detector::generate_handover_sequence(spec.curve, spec.duration, rate));
    seeds.push_back(spec.curve.seed);
  }

  std::array<long long, 2> sample_counts{0, 0}, window_counts{0, 0};
  long long skipped = 0;
  for (const auto& seq : sequences) {
    for (const auto& s : seq) ++sample_counts[s.label];
    const std::size_t windows = detector::expected_window_count(seq.size(), window, stride);
    if (windows == 0) ++skipped;
    for (std::size_t k = 0; k < windows; ++k)
      ++window_counts[seq[k * static_cast<std::size_t>(stride) + static_cast<std::size_t>(window) - 1].label];
  }

  const fs::path dir = output_dir(common);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "seq_%05zu.csv", i);
    detector::write_sequence_csv(dir / name, sequences[i]);
  }
  const Json manifest = {{"command", "gen-data"},
                         {"seed", common.seed},
                         {"config", cfg},
                         {"sequences", count},
                         {"samples", sample_counts[0] + sample_counts[1]},
                         {"sample_class_counts", sample_counts},
                         {"windows", window_counts[0] + window_counts[1]},
                         {"window_class_counts", window_counts},
                         {"skipped_sequences", skipped},
                         {"sequence_seeds", seeds}};
  config::write_json_file(dir / "manifest.json", manifest);
  out << "wrote " << count << " sequences (" << window_counts[0] + window_counts[1] << " windows: "
      << window_counts[0] << " hold / " << window_counts[1] << " release) to " << dir.string() << "\n";
  return kOk;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const Common& common, const std::string& dataset, const std::string& resume, std::ostream& out) {
  if (dataset.empty()) throw ConfigError("train needs --dataset");
  const detector::TrainingConfig d;
  const detector::NetworkShape ds;
  const Json defaults = {{"hidden", ds.hidden},
                         {"dense1", ds.dense1},
                         {"dense2", ds.dense2},
                         {"batch_size", d.batch_size},
                         {"micro_batch", d.micro_batch},
                         {"learning_rate", d.learning_rate},
                         {"patience", d.patience},
                         {"max_epochs", d.max_epochs},
                         {"max_samples", d.max_samples},
                         {"balance", detector::to_string(d.balance)},
                         {"window", d.window},
                         {"stride", d.stride},
                         {"val_fraction", 0.1}};
  const Json cfg_json = with_overrides(defaults, common.overrides);
  config::check_keys(cfg_json, "train config",
                     {"hidden", "dense1", "dense2", "batch_size", "micro_batch", "learning_rate", "patience",
                      "max_epochs", "max_samples", "balance", "window", "stride", "val_fraction"});
  detector::TrainingConfig cfg;
  cfg.batch_size = cfg_json.at("batch_size").get<int>();
  cfg.micro_batch = cfg_json.at("micro_batch").get<int>();
  cfg.learning_rate = cfg_json.at("learning_rate").get<double>();
  cfg.patience = cfg_json.at("patience").get<int>();
  cfg.max_epochs = cfg_json.at("max_epochs").get<int>();
  cfg.max_samples = cfg_json.at("max_samples").get<std::size_t>();
  cfg.balance = detector::parse_balance_strategy(cfg_json.at("balance").get<std::string>());
  cfg.window = cfg_json.at("window").get<int>();
  cfg.stride = cfg_json.at("stride").get<int>();
  cfg.seed = common.seed;
  cfg.validate();
  const double val_fraction = cfg_json.at("val_fraction").get<double>();
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");

  const auto sequences = detector::read_dataset_dir(dataset);
  const detector::WindowedDataset data = detector::window_dataset(sequences, cfg.window, cfg.stride);
  if (data.samples.empty()) throw Error("dataset yields no windows");
  const auto val_sequences =
      static_cast<std::uint32_t>(std::floor(val_fraction * static_cast<double>(data.sequences.size())));
  const auto first_val = static_cast<std::uint32_t>(data.sequences.size()) - val_sequences;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    (data.samples[i].sequence < first_val ? train_idx : val_idx).push_back(i);

  detector::NetworkShape shape;
  shape.hidden = cfg_json.at("hidden").get<int>();
  shape.dense1 = cfg_json.at("dense1").get<int>();
  shape.dense2 = cfg_json.at("dense2").get<int>();
  shape.window = cfg.window;
  detector::LstmNetwork<float> net =
      resume.empty() ? detector::make_detector_network(shape, common.seed) : detector::load_weights(resume);
  if (net.shape().window != cfg.window)
    throw DimensionError("weights expect window " + std::to_string(net.shape().window) + ", config uses " +
                         std::to_string(cfg.window));

  const detector::BalancedSet set = detector::prepare_training_set(data, train_idx, cfg);
  const double initial_loss = detector::evaluate_loss(net, data, set.indices, set.class_weights, cfg.micro_batch);
  out << "training on " << set.indices.size() << " windows (" << train_idx.size() << " before balancing), "
      << val_idx.size() << " validation windows; initial loss " << initial_loss << "\n";

  const auto t0 = std::chrono::steady_clock::now();
  const detector::TrainingResult result = detector::train(net, data, train_idx, val_idx, cfg,
                                                          [&](const detector::EpochRecord& r) {
                                                            out << "epoch " << r.epoch << " loss " << r.train_loss;
                                                            if (!std::isnan(r.val_loss)) out << " val " << r.val_loss;
                                                            out << "\n";
                                                          });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double final_loss =
      detector::evaluate_loss(result.best, data, set.indices, set.class_weights, cfg.micro_batch);

  const fs::path dir = output_dir(common);
  detector::save_weights(dir / "weights.json", result.best);
  csv::write_atomically(dir / "history.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    w.header({"epoch", "train_loss", "val_loss"});
    for (const auto& r : result.history) {
      w.field(static_cast<long long>(r.epoch)).field(r.train_loss);
      if (std::isnan(r.val_loss))
        w.field(std::string_view());
      else
        w.field(r.val_loss);
      w.end_row();
    }
  });
  Json manifest = {{"command", "train"},
                   {"seed", common.seed},
                   {"config", cfg_json},
                   {"dataset", fs::absolute(dataset).lexically_normal().string()},
                   {"resumed_from", resume},
                   {"training_windows", set.indices.size()},
                   {"validation_windows", val_idx.size()},
                   {"epochs", result.history.size()},
                   {"best_epoch", result.best_epoch},
                   {"best_loss", result.best_loss},
                   {"initial_loss", initial_loss},
                   {"final_loss", final_loss}};
  if (!val_idx.empty()) manifest["validation_accuracy"] = detector::accuracy(result.best, data, val_idx);
  config::write_json_file(dir / "train_manifest.json", manifest);
  out << "best epoch " << result.best_epoch << ", final loss " << final_loss << ", " << seconds
      << " s; weights in " << (dir / "weights.json").string() << "\n";
  return kOk;
}

// ---- simulate / compare -----------------------------------------------------

std::shared_ptr<const detector::LstmNetwork<float>> load_network(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const detector::LstmNetwork<float>>(detector::load_weights(path));
}

Json metrics_json(const harness::EpisodeMetrics& m) {
  return {{"outcome", harness::to_string(m.outcome)},
          {"release_time", m.release_time},
          {"release_latency", m.release_time >= 0.0 ? m.release_latency() : 0.0},
          {"transferred_at_release", m.transferred_at_release},
          {"arrival_time", m.arrival_time},
          {"engagement_time", m.engagement_time},
          {"pull_onset", m.pull_onset},
          {"min_separation", m.min_separation},
          {"max_directed_speed", m.max_directed_speed},
          {"max_limit_excess", m.max_limit_excess},
          {"safety_violations", m.safety_violations},
          {"accel_infeasible_cycles", m.accel_infeasible_cycles},
          {"max_path_deviation", m.max_path_deviation},
          {"cycles", m.cycles},
          {"end_time", m.end_time}};
}

Json scenario_json(const std::string& path, const Common& common, const std::string& controller,
                   const std::string& release) {
  Json j = path.empty() ? harness::to_json(harness::Scenario{}) : config::load_json_file(path);
  j = with_overrides(std::move(j), common.overrides);
  if (!controller.empty()) j["controller"] = controller;
  if (!release.empty()) j["release"] = release;
  if (common.seed_given) j["seed"] = common.seed;
  return j;
}

int cmd_simulate(const Common& common, const std::string& scenario_path, const std::string& weights,
                 const std::string& controller, const std::string& release, std::ostream& out) {
  if (scenario_path.empty()) throw ConfigError("simulate needs --scenario");
  const harness::Scenario s =
      harness::scenario_from_json(scenario_json(scenario_path, common, controller, release));
  if (s.release == harness::ReleaseKind::network && weights.empty())
    throw ConfigError("release 'network' needs --weights");
  harness::EpisodeOptions opts;
  if (s.release == harness::ReleaseKind::network) opts.network = load_network(weights);

  const fs::path dir = output_dir(common);
  harness::EpisodeMetrics m;
  csv::write_atomically(dir / "episode.csv", [&](std::ostream& o) {
    opts.log = &o;
    m = harness::run_handover(s, opts);
  });
  config::write_json_file(dir / "metrics.json",
                          {{"command", "simulate"}, {"scenario", harness::to_json(s)}, {"metrics", metrics_json(m)}});
  out << "outcome " << harness::to_string(m.outcome) << ", release at " << m.release_time << " s (transferred "
      << m.transferred_at_release << "), min separation " << m.min_separation << " m, max directed speed "
      << m.max_directed_speed << " m/s, safety violations " << m.safety_violations << "\n";
  out << "cycle compute: mean " << ms(m.compute.mean) << ", max " << ms(m.compute.max) << " over " << m.cycles
      << " cycles\n";
  return m.outcome == harness::Outcome::success ? kOk : kEpisodeFailure;
}

int cmd_compare(const Common& common, const std::string& scenario_path, const std::string& weights,
                const std::string& arms_name, int episodes, bool clean, std::ostream& out) {
  if (episodes < 1) throw ConfigError("compare needs at least one episode");
  const harness::Scenario base = harness::scenario_from_json(scenario_json(scenario_path, common, "", ""));
  const auto arms = harness::parse_arms(arms_name);
  bool needs_network = false;
  for (const auto& a : arms) needs_network |= a.release == harness::ReleaseKind::network;
  if (needs_network && weights.empty()) throw ConfigError("the proposed arm needs --weights");
  const auto network = needs_network ? load_network(weights) : nullptr;

  const auto scenarios =
      harness::random_scenarios(base, harness::ScenarioRanges{}, episodes, common.seed, !clean);
  const harness::BatchResult result =
      harness::evaluate_batch(scenarios, arms, network, [&](const harness::EpisodeRecord& r) {
        out << "episode " << r.scenario << " " << r.arm << ": " << harness::to_string(r.metrics.outcome) << "\n";
      });

  const fs::path dir = output_dir(common);
  harness::write_episodes_csv(dir / "episodes.csv", result);
  harness::write_summary_csv(dir / "summary.csv", result);
  Json arm_names = Json::array();
  for (const auto& a : arms) arm_names.push_back(a.name);
  config::write_json_file(dir / "compare_manifest.json", {{"command", "compare"},
                                                          {"seed", common.seed},
                                                          {"episodes", episodes},
                                                          {"disturbances", !clean},
                                                          {"arms", arm_names},
                                                          {"base_scenario", harness::to_json(base)}});
  out << harness::summary_table(result);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulated robot-to-human handover: data generation, detector training and evaluation",
               "handover"};
  app.require_subcommand(1);

  Common common;
  std::string scenario, dataset, weights, arms = "both", controller, release;
  int episodes = 60;
  bool clean = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory (default $HANDOVER_OUT_DIR or ./out)");
    sub->add_option("--seed", common.seed, "Random seed")->each([&](const std::string&) { common.seed_given = true; });
    sub->add_option("--override", common.overrides, "key=value configuration override (repeatable)")
        ->take_all();
  };

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic load-transfer sequences");
  add_common(gen);
  auto* train = app.add_subcommand("train", "Train the release detector");
  add_common(train);
  train->add_option("--dataset", dataset, "Directory of seq_*.csv files")->required();
  train->add_option("--weights", weights, "Resume from this weight file");
  auto* sim = app.add_subcommand("simulate", "Run one handover episode");
  add_common(sim);
  sim->add_option("--scenario", scenario, "Scenario JSON file")->required();
  sim->add_option("--weights", weights, "Detector weights (network release)");
  sim->add_option("--controller", controller, "admittance | pd");
  sim->add_option("--release", release, "network | threshold");
  auto* cmp = app.add_subcommand("compare", "Paired comparison of the proposed and baseline arms");
  add_common(cmp);
  cmp->add_option("--scenario", scenario, "Base scenario JSON file");
  cmp->add_option("--weights", weights, "Detector weights for the proposed arm");
  cmp->add_option("--arms", arms, "both | proposed-only | baseline-only");
  cmp->add_option("--episodes", episodes, "Number of paired scenarios")->check(CLI::NonNegativeNumber);
  cmp->add_flag("--clean", clean, "No disturbance pulses");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, out);
    if (*train) return cmd_train(common, dataset, weights, out);
    if (*sim) return cmd_simulate(common, scenario, weights, controller, release, out);
    if (*cmp) return cmd_compare(common, scenario, weights, arms, episodes, clean, out);
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace handover::cli
