#pragma once
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "supportseg/kinematic_model.hpp"

namespace testing {

using namespace supportseg;

inline PoseVector RandomPose(const KinematicModel& model, std::mt19937_64& rng, double root_spread_mm = 500.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PoseVector p = model.NeutralPose();
  p.root_position = {root_spread_mm * u(rng), root_spread_mm * u(rng), root_spread_mm * u(rng)};
  p.root_rotation = {1.2 * u(rng), 1.2 * u(rng), 1.2 * u(rng)};
  for (std::size_t k = 0; k < model.joint_count(); ++k) {
    const Joint& j = model.revolute_joint(k);
    std::uniform_real_distribution<double> in(j.lower, j.upper);
    p.joint_angles[static_cast<Eigen::Index>(k)] = in(rng);
  }
  return p;
}

// Base -> Link1 (z, at origin) -> Link2 (z, 100 mm along x) -> End (fixed, 100 mm along x).
inline KinematicModel PlanarChain(bool end_mesh = true) {
  std::vector<Segment> segments = {{"Base", "", {}, false},
                                   {"Link1", "", {}, false},
                                   {"Link2", "", {}, false},
                                   {"LeftHand", "", end_mesh ? TriangleMesh::Box({-5, -5, -5}, {5, 5, 5}) : TriangleMesh{},
                                    end_mesh}};
  std::vector<Joint> joints = {
      {"J1", "Base", "Link1", JointType::kRevolute, Vec3::UnitZ(), Vec3::Zero(), -3.2, 3.2},
      {"J2", "Link1", "Link2", JointType::kRevolute, Vec3::UnitZ(), Vec3(100, 0, 0), -3.2, 3.2},
      {"Tip", "Link2", "LeftHand", JointType::kFixed, Vec3::UnitZ(), Vec3(100, 0, 0), 0, 0},
  };
  std::vector<MarkerAttachment> markers = {{"ROOT", "Base", Vec3::Zero()}, {"TIP", "LeftHand", Vec3(10, 0, 0)}};
  return KinematicModel("planar", segments, joints, markers);
}

inline std::filesystem::path ScratchDir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("supportseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path SourcePath(const std::string& relative) { return std::filesystem::path(SOURCE_DIR) / relative; }

}  // namespace testing
