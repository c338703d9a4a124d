#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace supportseg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Transform = Eigen::Isometry3d;

// All recordings are sampled at 100 FPS; durations are expressed in frames.
inline constexpr double kFramesPerSecond = 100.0;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model, configuration or argument values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed input document. The message names file, line and field when known.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::string field, const std::string& what)
      : Error(Format(file, line, field, what)),
        file_(std::move(file)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string Format(const std::string& file, std::size_t line, const std::string& field,
                            const std::string& what) {
    std::string out = file.empty() ? std::string("<input>") : file;
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += ": field '" + field + "'";
    return out + ": " + what;
  }

  std::string file_;
  std::size_t line_;
  std::string field_;
};

// Rotation from intrinsic Euler angles about x, then y, then z: R = Rx(a) * Ry(b) * Rz(c).
inline Mat3 RotationFromEulerXYZ(double a, double b, double c) {
  return (Eigen::AngleAxisd(a, Vec3::UnitX()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
          Eigen::AngleAxisd(c, Vec3::UnitZ()))
      .toRotationMatrix();
}

// Inverse of RotationFromEulerXYZ; b is returned in [-pi/2, pi/2].
inline Vec3 EulerXYZFromRotation(const Mat3& r) {
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  const double b = std::asin(sb);
  if (std::abs(sb) < 1.0 - 1e-12) {
    return {std::atan2(-r(1, 2), r(2, 2)), b, std::atan2(-r(0, 1), r(0, 0))};
  }
  // Gimbal lock: only a +/- c is determined, put everything into a.
  return {std::atan2(r(2, 1), r(1, 1)), b, 0.0};
}

}  // namespace supportseg
