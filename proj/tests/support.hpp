#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "handover/kinematics.hpp"

namespace testing {

/// splitmix64 stream; small, seedable and independent of <random>.
class Gen {
public:
  explicit Gen(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  Eigen::VectorXd vector(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }
  Eigen::Vector3d vec3(double lo, double hi) { return vector(3, lo, hi); }

private:
  std::uint64_t state_;
};

inline handover::ManipulatorModel planar_model(const std::vector<double>& lengths) {
  std::vector<handover::DhRow> rows;
  for (double a : lengths) rows.push_back({a, 0.0, 0.0, 0.0});
  const auto n = static_cast<Eigen::Index>(lengths.size());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  return handover::ManipulatorModel::make(rows, -ones, ones, -ones, ones, ones, 0.0);
}

/// Homogeneous DH chain written out element by element.
inline Eigen::Matrix4d oracle_chain(const std::vector<handover::DhRow>& rows, const Eigen::VectorXd& q,
                                    std::size_t upto) {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < upto; ++i) {
    const double th = q(static_cast<Eigen::Index>(i)) + rows[i].joint_offset;
    const double al = rows[i].link_twist, a = rows[i].link_length, d = rows[i].link_offset;
    const double ct = std::cos(th), st = std::sin(th), ca = std::cos(al), sa = std::sin(al);
    Eigen::Matrix4d A;
    A << ct, -st * ca, st * sa, a * ct,
         st, ct * ca, -ct * sa, a * st,
         0, sa, ca, d,
         0, 0, 0, 1;
    T = T * A;
  }
  return T;
}

inline Eigen::Matrix4d oracle_pose(const handover::ManipulatorModel& m, const Eigen::VectorXd& q) {
  Eigen::Matrix4d tool = Eigen::Matrix4d::Identity();
  tool.topLeftCorner<3, 3>() = m.tool_transform().rotation;
  tool.topRightCorner<3, 1>() = m.tool_transform().position;
  return oracle_chain(m.dh_rows(), q, m.dh_rows().size()) * tool;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("handover_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace testing
