#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace railgauge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

inline constexpr double kGravity = 9.81;

// Error taxonomy. InputError and its subclasses map to CLI exit code 1,
// NumericalError and its subclasses to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RangeError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BehindCameraError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

enum class Side { Left, Right };

inline const char* to_string(Side side) { return side == Side::Left ? "left" : "right"; }

Side side_from_string(const std::string& text);

}  // namespace railgauge
