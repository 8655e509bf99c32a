#pragma once

#include "railgauge/track_model.hpp"

#include <optional>
#include <vector>

namespace railgauge {

class AnchorConflictError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Ideal horizontal curvature of one group of consecutive non-straight
/// sections, sampled on a uniform grid over [s_start, s_exit].
struct CurvatureFunction {
  double s_start = 0.0;
  double s_exit = 0.0;
  double spacing = 0.5;
  std::vector<double> rho;
  double i2 = 0.0;

  double width() const { return s_exit - s_start; }
  double node(std::size_t j) const;
};

/// One function per run of curved sections; an S-curve is a single function.
std::vector<CurvatureFunction> curvature_functions(const Track& track, double spacing = 0.5);

/// omega_z / V, or nothing when V does not exceed v_min.
std::optional<double> estimate_curvature(double omega_z, double v, double v_min = 0.5);

/// Measured curvature on a uniform s_app grid, filled by linear interpolation
/// of the incoming samples.
class CurvatureBuffer {
 public:
  explicit CurvatureBuffer(double spacing = 0.5) : spacing_(spacing) {}

  void push(double s_app, double rho);
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  double s0() const { return s0_; }
  double s_end() const { return s0_ + spacing_ * static_cast<double>(values_.size() - 1); }
  double spacing() const { return spacing_; }
  double node(std::size_t i) const { return s0_ + spacing_ * static_cast<double>(i); }
  std::optional<double> at(double s_app) const;

 private:
  double spacing_;
  double s0_ = 0.0;
  std::vector<double> values_;
  bool have_last_ = false;
  double last_s_ = 0.0;
  double last_rho_ = 0.0;
};

/// Normalized squared error between the measured curvature and `fn` for a
/// window ending at s_hat (s_app units). `scale` is the provisional s_app/s
/// ratio; measured curvature is multiplied by it and window positions are
/// stretched by it. Returns nothing when the buffer does not cover the window.
std::optional<double> normalized_squared_error(const CurvatureBuffer& buffer,
                                               const CurvatureFunction& fn, double s_hat,
                                               double scale = 1.0);

struct Anchor {
  double s_app = 0.0;
  double s_ideal = 0.0;
  double ne2_min = 0.0;
};

/// Piecewise-linear map through the anchors. Before the first anchor the
/// first offset applies; after the last one the last segment is extended.
double correct_s(const std::vector<Anchor>& anchors, double s_app);

struct OdometryOptions {
  double tau = 0.2;
  double hysteresis = 0.05;
  double grid = 0.5;
  double v_min = 0.5;
  double max_scale_error = 0.1;
};

struct Ne2Sample {
  double s_app;
  std::size_t function;
  double ne2;
};

class Odometry {
 public:
  /// (s_app0, s_ideal0) is the run start, used as an implicit anchor.
  Odometry(std::vector<CurvatureFunction> functions, OdometryOptions options, double s_app0,
           double s_ideal0);

  void push(double s_app, double rho_exp);

  /// Detected anchors in order, without the implicit start anchor.
  const std::vector<Anchor>& anchors() const { return anchors_; }
  /// Start anchor followed by the detected anchors.
  std::vector<Anchor> correction_anchors() const;
  const std::vector<Ne2Sample>& trace() const { return trace_; }
  const std::vector<CurvatureFunction>& functions() const { return functions_; }
  std::size_t next_function() const { return next_; }
  double correct(double s_app) const { return correct_s(correction_anchors(), s_app); }

 private:
  void evaluate(std::size_t node);
  void accept(double s_app, double ne2_min);
  void advance();

  std::vector<CurvatureFunction> functions_;
  OdometryOptions options_;
  Anchor start_;
  CurvatureBuffer buffer_;
  std::size_t evaluated_ = 0;
  std::size_t next_ = 0;
  std::vector<Anchor> anchors_;
  std::vector<Ne2Sample> trace_;
  std::vector<std::pair<double, double>> current_;  // (s_hat, ne2) for the active function
  double min_val_ = 0.0;
  std::size_t min_idx_ = 0;
};

}  // namespace railgauge
