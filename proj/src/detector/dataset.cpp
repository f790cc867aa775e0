#include "handover/detector/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>

#include "handover/csv.hpp"
#include "handover/error.hpp"

namespace handover::detector {

ForceWindow WindowedDataset::materialize(std::size_t index) const {
  const WindowRef& ref = samples.at(index);
  return sequences[ref.sequence].middleRows(ref.end - window, window);
}

std::array<std::size_t, 2> WindowedDataset::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& s : samples) ++counts[s.label ? 1 : 0];
  return counts;
}

SequenceMatrix to_matrix(const std::vector<ForceSample>& sequence) {
  SequenceMatrix m(static_cast<Eigen::Index>(sequence.size()), kFeatureCount);
  for (std::size_t i = 0; i < sequence.size(); ++i)
    for (int c = 0; c < kFeatureCount; ++c)
      m(static_cast<Eigen::Index>(i), c) = static_cast<float>(sequence[i].wrench[c]);
  return m;
}

std::size_t expected_window_count(std::size_t length, int window, int stride) {
  if (length < static_cast<std::size_t>(window)) return 0;
  return (length - static_cast<std::size_t>(window)) / static_cast<std::size_t>(stride) + 1;
}

WindowedDataset window_dataset(const std::vector<std::vector<ForceSample>>& sequences, int window,
                               int stride) {
  if (window < 1) throw Error("window length must be positive");
  if (stride < 1) throw Error("stride must be at least 1");
  WindowedDataset data;
  data.window = window;
  data.stride = stride;
  for (const auto& seq : sequences) {
    if (seq.size() < static_cast<std::size_t>(window)) {
      std::clog << "warning: skipping sequence of " << seq.size() << " samples (window " << window
                << ")\n";
      ++data.skipped_sequences;
      continue;
    }
    const auto id = static_cast<std::uint32_t>(data.sequences.size());
    data.sequences.push_back(to_matrix(seq));
    const std::size_t count = expected_window_count(seq.size(), window, stride);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t end = k * static_cast<std::size_t>(stride) + static_cast<std::size_t>(window);
      data.samples.push_back(WindowRef{id, static_cast<std::uint32_t>(end), seq[end - 1].label});
    }
  }
  return data;
}

BalanceStrategy parse_balance_strategy(const std::string& name) {
  if (name == "weighted-loss") return BalanceStrategy::weighted_loss;
  if (name == "oversample") return BalanceStrategy::oversample;
  if (name == "undersample") return BalanceStrategy::undersample;
  throw Error("unknown balancing strategy '" + name + "'");
}

std::string to_string(BalanceStrategy s) {
  switch (s) {
    case BalanceStrategy::weighted_loss: return "weighted-loss";
    case BalanceStrategy::oversample: return "oversample";
    case BalanceStrategy::undersample: return "undersample";
  }
  return "unknown";
}

BalancedSet balance_dataset(const WindowedDataset& data, const std::vector<std::size_t>& indices,
                            BalanceStrategy strategy, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i : indices) by_class[data.samples.at(i).label ? 1 : 0].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw Error("balancing needs samples from both classes");

  BalancedSet out;
  const std::size_t total = indices.size();
  if (strategy == BalanceStrategy::weighted_loss) {
    out.indices = indices;
    for (int c = 0; c < 2; ++c)
      out.class_weights[c] = static_cast<double>(total) / (2.0 * static_cast<double>(by_class[c].size()));
    return out;
  }

  std::mt19937_64 rng(seed);
  const int minority = by_class[0].size() < by_class[1].size() ? 0 : 1;
  auto& small = by_class[minority];
  auto& large = by_class[1 - minority];
  if (strategy == BalanceStrategy::undersample) {
    std::shuffle(large.begin(), large.end(), rng);
    large.resize(small.size());
    out.indices = small;
    out.indices.insert(out.indices.end(), large.begin(), large.end());
  } else {
    out.indices = large;
    const std::size_t repeats = large.size() / small.size();
    for (std::size_t r = 0; r < repeats; ++r) out.indices.insert(out.indices.end(), small.begin(), small.end());
    std::vector<std::size_t> extra = small;
    std::shuffle(extra.begin(), extra.end(), rng);
    extra.resize(large.size() - repeats * small.size());
    out.indices.insert(out.indices.end(), extra.begin(), extra.end());
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

void write_sequence_csv(const std::filesystem::path& path, const std::vector<ForceSample>& sequence) {
  csv::write_atomically(path, [&](std::ostream& out) {
    csv::Writer w(out);
    w.header({"t", "Fx", "Fy", "Fz", "Tx", "Ty", "Tz", "label"});
    for (const auto& s : sequence) {
      w.field(s.time);
      for (double v : s.wrench) w.field(v);
      w.field(static_cast<long long>(s.label));
      w.end_row();
    }
  });
}

std::vector<ForceSample> read_sequence_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty() || rows.front().size() != 8 || rows.front()[0] != "t")
    throw Error("malformed sequence file " + path.string());
  std::vector<ForceSample> seq;
  seq.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 8) throw Error("malformed row " + std::to_string(r) + " in " + path.string());
    ForceSample s;
    s.time = std::stod(f[0]);
    for (int c = 0; c < 6; ++c) s.wrench[c] = std::stod(f[c + 1]);
    s.label = std::stoi(f[7]);
    if (s.label != 0 && s.label != 1) throw Error("labels must be 0 or 1 in " + path.string());
    seq.push_back(s);
  }
  return seq;
}

std::vector<std::vector<ForceSample>> read_dataset_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("dataset directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("seq_", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  if (files.empty()) throw Error("no sequence files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<ForceSample>> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_sequence_csv(f));
  return out;
}

}  // namespace handover::detector
