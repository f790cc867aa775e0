#include "handover/config.hpp"

#include <algorithm>
#include <fstream>

#include "handover/csv.hpp"
#include "handover/error.hpp"

namespace handover::config {

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    Json j;
    in >> j;
    return j;
  } catch (const Json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  csv::write_atomically(path, [&](std::ostream& out) { out << value.dump(2) << '\n'; });
}

void apply_override(Json& root, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override key '" + key + "' descends into a non-object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void check_keys(const Json& object, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& [key, _] : object.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(section));
}

Eigen::VectorXd vector_from_json(const Json& value, std::string_view name, Eigen::Index expected_size) {
  if (!value.is_array()) throw ConfigError(std::string(name) + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) throw ConfigError(std::string(name) + " must contain only numbers");
    v(static_cast<Eigen::Index>(i)) = value[i].get<double>();
  }
  if (expected_size >= 0 && v.size() != expected_size)
    throw ConfigError(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                      std::to_string(expected_size));
  return v;
}

Eigen::Vector3d vec3_from_json(const Json& value, std::string_view name) {
  return vector_from_json(value, name, 3);
}

Json to_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

namespace {

double number(const Json& j, std::string_view section, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string(section) + "." + key + " must be a number");
  return j.at(key).get<double>();
}

}  // namespace

ManipulatorModel model_from_json(const Json& j) {
  check_keys(j, "robot",
             {"dh", "q_dot_min", "q_dot_max", "q_ddot_min", "q_ddot_max", "link_masses", "payload_mass",
              "tool_position", "tool_rotation"});
  const ManipulatorModel base = ManipulatorModel::default_cobot();
  std::vector<DhRow> rows = base.dh_rows();
  if (j.contains("dh")) {
    rows.clear();
    for (const auto& r : j.at("dh")) {
      check_keys(r, "robot.dh", {"a", "alpha", "d", "theta"});
      rows.push_back(DhRow{number(r, "robot.dh", "a", 0.0), number(r, "robot.dh", "alpha", 0.0),
                           number(r, "robot.dh", "d", 0.0), number(r, "robot.dh", "theta", 0.0)});
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  auto vec = [&](const char* key, const Eigen::VectorXd& fallback) {
    if (j.contains(key)) return vector_from_json(j.at(key), std::string("robot.") + key, n);
    if (fallback.size() != n)
      throw ConfigError(std::string("robot.") + key + " is required when the DH table is overridden");
    return fallback;
  };
  Pose tool = base.tool_transform();
  if (j.contains("tool_position")) tool.position = vec3_from_json(j.at("tool_position"), "robot.tool_position");
  if (j.contains("tool_rotation")) {
    const Eigen::VectorXd r = vector_from_json(j.at("tool_rotation"), "robot.tool_rotation", 9);
    tool.rotation = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r.data());
  }
  try {
    return ManipulatorModel::make(rows, vec("q_dot_min", base.q_dot_min()), vec("q_dot_max", base.q_dot_max()),
                                  vec("q_ddot_min", base.q_ddot_min()), vec("q_ddot_max", base.q_ddot_max()),
                                  vec("link_masses", base.link_masses()),
                                  number(j, "robot", "payload_mass", base.payload_mass()), tool);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("robot: ") + e.what());
  }
}

Json to_json(const ManipulatorModel& model) {
  Json dh = Json::array();
  for (const auto& r : model.dh_rows())
    dh.push_back({{"a", r.link_length}, {"alpha", r.link_twist}, {"d", r.link_offset}, {"theta", r.joint_offset}});
  const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> R = model.tool_transform().rotation;
  return {{"dh", dh},
          {"q_dot_min", to_json(model.q_dot_min())},
          {"q_dot_max", to_json(model.q_dot_max())},
          {"q_ddot_min", to_json(model.q_ddot_min())},
          {"q_ddot_max", to_json(model.q_ddot_max())},
          {"link_masses", to_json(model.link_masses())},
          {"payload_mass", model.payload_mass()},
          {"tool_position", to_json(model.tool_transform().position)},
          {"tool_rotation", std::vector<double>(R.data(), R.data() + 9)}};
}

SsmFormula parse_ssm_formula(std::string_view name) {
  if (name == "corrected") return SsmFormula::corrected;
  if (name == "verbatim") return SsmFormula::verbatim;
  throw ConfigError("ssm_formula must be 'corrected' or 'verbatim', got '" + std::string(name) + "'");
}

SafetyParams safety_from_json(const Json& j) {
  check_keys(j, "safety",
             {"a_max", "T_r", "C", "Z_d", "Z_r", "F_max", "p_max", "A", "k_spring", "m_h", "human_radius",
              "ssm_formula"});
  SafetyParams p;
  p.a_max = number(j, "safety", "a_max", p.a_max);
  p.T_r = number(j, "safety", "T_r", p.T_r);
  p.C = number(j, "safety", "C", p.C);
  p.Z_d = number(j, "safety", "Z_d", p.Z_d);
  p.Z_r = number(j, "safety", "Z_r", p.Z_r);
  p.F_max = number(j, "safety", "F_max", p.F_max);
  p.p_max = number(j, "safety", "p_max", p.p_max);
  p.A = number(j, "safety", "A", p.A);
  p.k_spring = number(j, "safety", "k_spring", p.k_spring);
  p.m_h = number(j, "safety", "m_h", p.m_h);
  p.human_radius = number(j, "safety", "human_radius", p.human_radius);
  if (j.contains("ssm_formula")) p.ssm_formula = parse_ssm_formula(j.at("ssm_formula").get<std::string>());
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("safety: ") + e.what());
  }
  return p;
}

Json to_json(const SafetyParams& p) {
  return {{"a_max", p.a_max}, {"T_r", p.T_r},         {"C", p.C},
          {"Z_d", p.Z_d},     {"Z_r", p.Z_r},         {"F_max", p.F_max},
          {"p_max", p.p_max}, {"A", p.A},             {"k_spring", p.k_spring},
          {"m_h", p.m_h},     {"human_radius", p.human_radius},
          {"ssm_formula", p.ssm_formula == SsmFormula::corrected ? "corrected" : "verbatim"}};
}

AdmittanceParams admittance_from_json(const Json& j) {
  check_keys(j, "admittance", {"mass", "stiffness", "damping", "force_weight"});
  const AdmittanceParams base = AdmittanceParams::defaults();
  const Vector6d mass = j.contains("mass") ? Vector6d(vector_from_json(j.at("mass"), "admittance.mass", 6))
                                           : Vector6d(base.M().diagonal());
  const Vector6d stiffness = j.contains("stiffness")
                                 ? Vector6d(vector_from_json(j.at("stiffness"), "admittance.stiffness", 6))
                                 : Vector6d(base.K().diagonal());
  const double w = number(j, "admittance", "force_weight", base.force_weight());
  try {
    if (!j.contains("damping")) return AdmittanceParams::critically_damped(mass, stiffness, w);
    const Vector6d damping = vector_from_json(j.at("damping"), "admittance.damping", 6);
    return AdmittanceParams::make(mass.asDiagonal().toDenseMatrix(), damping.asDiagonal().toDenseMatrix(),
                                  stiffness.asDiagonal().toDenseMatrix(), w);
  } catch (const Error& e) {
    throw ConfigError(std::string("admittance: ") + e.what());
  }
}

Json to_json(const AdmittanceParams& p) {
  return {{"mass", to_json(Eigen::VectorXd(p.M().diagonal()))},
          {"stiffness", to_json(Eigen::VectorXd(p.K().diagonal()))},
          {"damping", to_json(Eigen::VectorXd(p.D().diagonal()))},
          {"force_weight", p.force_weight()}};
}

}  // namespace handover::config
