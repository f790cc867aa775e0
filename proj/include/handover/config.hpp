#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <initializer_list>
#include <json.hpp>
#include <string>
#include <string_view>

#include "handover/admittance.hpp"
#include "handover/kinematics.hpp"
#include "handover/safety.hpp"

namespace handover::config {

using Json = nlohmann::json;

Json load_json_file(const std::filesystem::path& path);
/// Pretty-printed, written atomically, trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& value);

/// Sets the value at a dotted path ("safety.a_max=1.0"). The right-hand side
/// is parsed as JSON when possible and kept as a string otherwise.
/// Intermediate objects are created as needed.
void apply_override(Json& root, std::string_view assignment);

/// Rejects keys outside `allowed` so that typos in files and overrides fail loudly.
void check_keys(const Json& object, std::string_view section, std::initializer_list<std::string_view> allowed);

Eigen::VectorXd vector_from_json(const Json& value, std::string_view name, Eigen::Index expected_size = -1);
Eigen::Vector3d vec3_from_json(const Json& value, std::string_view name);
Json to_json(const Eigen::VectorXd& v);

/// Missing fields fall back to the default cobot.
ManipulatorModel model_from_json(const Json& j);
Json to_json(const ManipulatorModel& model);

SafetyParams safety_from_json(const Json& j);
Json to_json(const SafetyParams& p);
SsmFormula parse_ssm_formula(std::string_view name);

/// {"mass": [6], "stiffness": [6], "damping": [6] (optional, else critical), "force_weight"}.
AdmittanceParams admittance_from_json(const Json& j);
Json to_json(const AdmittanceParams& p);

}  // namespace handover::config
