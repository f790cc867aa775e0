#include "handover/detector/weights_io.hpp"

#include <fstream>
#include <json.hpp>
#include <string>

#include "handover/csv.hpp"
#include "handover/error.hpp"

namespace handover::detector {

namespace {

constexpr const char* kFormat = "handover-lstm-v1";

using Json = nlohmann::json;

std::pair<const char*, ParameterLayout::Slot> named_slots(const ParameterLayout& L, int k) {
  switch (k) {
    case 0: return {"wx", L.wx};
    case 1: return {"wh", L.wh};
    case 2: return {"b", L.b};
    case 3: return {"w1", L.w1};
    case 4: return {"b1", L.b1};
    case 5: return {"w2", L.w2};
    case 6: return {"b2", L.b2};
    case 7: return {"w3", L.w3};
    default: return {"b3", L.b3};
  }
}

constexpr int kSlotCount = 9;

std::string shape_text(long long r, long long c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

void save_weights(const std::filesystem::path& path, const LstmNetwork<float>& net) {
  const NetworkShape& s = net.shape();
  Json j;
  j["format"] = kFormat;
  j["shape"] = {{"input", s.input},   {"hidden", s.hidden}, {"dense1", s.dense1},
                {"dense2", s.dense2}, {"output", s.output}, {"window", s.window}};
  j["input_scale"] = std::vector<float>(net.input_scale().data(), net.input_scale().data() + s.input);
  Json tensors = Json::object();
  for (int k = 0; k < kSlotCount; ++k) {
    const auto [name, slot] = named_slots(net.layout(), k);
    const float* p = net.parameters().data() + slot.offset;
    tensors[name] = {{"shape", {slot.rows, slot.cols}},
                     {"data", std::vector<float>(p, p + slot.rows * slot.cols)}};
  }
  j["tensors"] = std::move(tensors);
  csv::write_atomically(path, [&](std::ostream& out) { out << j.dump() << '\n'; });
}

LstmNetwork<float> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open weights file " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error("weights file " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.value("format", std::string()) != kFormat)
      throw Error("weights file " + path.string() + " is not in " + kFormat + " format");
    NetworkShape s;
    const Json& h = j.at("shape");
    s.input = h.at("input").get<int>();
    s.hidden = h.at("hidden").get<int>();
    s.dense1 = h.at("dense1").get<int>();
    s.dense2 = h.at("dense2").get<int>();
    s.output = h.at("output").get<int>();
    s.window = h.at("window").get<int>();
    LstmNetwork<float> net(s);

    const auto scale = j.at("input_scale").get<std::vector<float>>();
    if (scale.size() != static_cast<std::size_t>(s.input))
      throw DimensionError("input_scale has " + std::to_string(scale.size()) + " entries, expected " +
                           std::to_string(s.input));
    for (int c = 0; c < s.input; ++c) net.input_scale()(c) = scale[static_cast<std::size_t>(c)];

    const Json& tensors = j.at("tensors");
    for (int k = 0; k < kSlotCount; ++k) {
      const auto [name, slot] = named_slots(net.layout(), k);
      if (!tensors.contains(name)) throw DimensionError(std::string("weights file lacks tensor ") + name);
      const Json& t = tensors.at(name);
      const auto dims = t.at("shape").get<std::vector<long long>>();
      const auto data = t.at("data").get<std::vector<float>>();
      if (dims.size() != 2 || dims[0] != slot.rows || dims[1] != slot.cols)
        throw DimensionError(std::string("tensor ") + name + " has shape " +
                             (dims.size() == 2 ? shape_text(dims[0], dims[1]) : std::string("?")) +
                             ", expected " + shape_text(slot.rows, slot.cols));
      if (static_cast<long long>(data.size()) != slot.rows * slot.cols)
        throw DimensionError(std::string("tensor ") + name + " holds " + std::to_string(data.size()) +
                             " values, shape " + shape_text(slot.rows, slot.cols) + " needs " +
                             std::to_string(slot.rows * slot.cols));
      std::copy(data.begin(), data.end(), net.parameters().data() + slot.offset);
    }
    if (!net.parameters().allFinite()) throw Error("weights file contains non-finite values");
    return net;
  } catch (const Json::exception& e) {
    throw Error("malformed weights file " + path.string() + ": " + e.what());
  }
}

}  // namespace handover::detector
