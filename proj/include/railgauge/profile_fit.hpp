#pragma once

#include "railgauge/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace railgauge {

/// Two-arc rail-head template in profile coordinates (y, z) with the profile
/// origin O_rp at (0, 0). Arc 1 (radius R1) carries the gauge corner on the +y
/// side; arc 2 (radius R2) forms the crown. The arcs meet tangentially at T1.
struct RailProfileTemplate {
  double r1 = 0.013;
  double r2 = 0.080;
  Vec2 c1 = Vec2::Zero();
  Vec2 c2 = Vec2::Zero();
  double alpha_min = 0.0;
  double alpha_max = 1.9;
  /// Sampled head profile (y, z) used for plotting and wear overlays.
  std::vector<Vec2> head_table;

  /// Angle of the tangency point: direction from C2 to C1.
  double beta1() const;
  Vec2 tangency_point() const;
  /// Throws ValidationError when |C1 C2| differs from R2 - R1 or radii are invalid.
  void validate() const;
};

/// Default template: R2 = 80 mm crown centred below the origin, R1 = 13 mm
/// corner with the tangency at 71 degrees. Values are illustrative defaults,
/// not a certified rail section.
RailProfileTemplate default_template();

RailProfileTemplate load_template(const std::string& path);
void save_template(const RailProfileTemplate& t, const std::string& path);

/// Centres packed as x = (y_C1, z_C1, y_C2, z_C2).
using Vec4d = Eigen::Vector4d;

Vec2 profile_point(const RailProfileTemplate& t, double alpha);

/// Same two-arc curve with arbitrary centres (radii from the template).
Vec2 profile_point(const Vec4d& x, const RailProfileTemplate& t, double alpha);

struct AlphaAssignment {
  double alpha = 0.0;
  int arc = 1;  // 1 or 2
};

/// Angular parameter of the profile point nearest to `p` for centres x.
AlphaAssignment assign_alpha(const Vec4d& x, const RailProfileTemplate& t, const Vec2& p);

/// Objective and constraint of the constrained fit.
double fit_objective(const Vec4d& x, const RailProfileTemplate& t, const std::vector<Vec2>& cloud,
                     const std::vector<AlphaAssignment>& alphas);
Vec4d fit_gradient(const Vec4d& x, const RailProfileTemplate& t, const std::vector<Vec2>& cloud,
                   const std::vector<AlphaAssignment>& alphas);
double center_constraint(const Vec4d& x, const RailProfileTemplate& t);

struct FitOptions {
  int max_iter = 50;
  int max_halvings = 20;
  double grad_tol = 1e-9;
  double constraint_tol = 1e-10;
};

struct FitResult {
  Vec4d x = Vec4d::Zero();
  double lambda = 0.0;
  Vec2 origin = Vec2::Zero();  // u_Orp in the cloud frame
  double roll = 0.0;           // phi^{tgms,rp}
  double rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // f after every accepted step
};

/// Centroid-based initial centres.
Vec4d initial_centers(const std::vector<Vec2>& cloud, const RailProfileTemplate& t);

FitResult fit_profile(const std::vector<Vec2>& cloud, const RailProfileTemplate& t,
                      std::optional<Vec4d> x0 = std::nullopt, const FitOptions& opt = {});

/// Fit for either rail. Left-rail clouds are mirrored in y, fitted against the
/// template and mapped back, so the returned origin and roll are in the cloud frame.
FitResult fit_rail(const std::vector<Vec2>& cloud, Side side, const RailProfileTemplate& t,
                   const FitOptions& opt = {});

/// Template point placed at a given pose (right-rail orientation).
Vec2 place_template_point(const RailProfileTemplate& t, const Vec2& origin, double roll,
                          double alpha);

struct WearSample {
  Vec2 point;
  double alpha;
  double offset;  // signed normal distance, negative inside the nominal head
};

/// Per-point signed distance to the fitted profile. `fit` must come from
/// fit_rail with the same side.
std::vector<WearSample> wear_report(const std::vector<Vec2>& cloud, const FitResult& fit,
                                    const RailProfileTemplate& t, Side side = Side::Right);

}  // namespace railgauge
