#include "railgauge/profile_fit.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>

namespace railgauge {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec2 dir(double a) { return {std::cos(a), std::sin(a)}; }

Vec2 c1_of(const Vec4d& x) { return x.head<2>(); }
Vec2 c2_of(const Vec4d& x) { return x.tail<2>(); }

double beta1_of(const Vec4d& x) {
  const Vec2 d = c1_of(x) - c2_of(x);
  return std::atan2(d.y(), d.x());
}

Vec4d pack(const Vec2& c1, const Vec2& c2) {
  Vec4d x;
  x << c1, c2;
  return x;
}

Mat2 rot(double a) {
  Mat2 r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

Vec2 mirror(const Vec2& p) { return {-p.x(), p.y()}; }

std::vector<AlphaAssignment> assign_all(const Vec4d& x, const RailProfileTemplate& t,
                                        const std::vector<Vec2>& cloud) {
  std::vector<AlphaAssignment> a(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) a[i] = assign_alpha(x, t, cloud[i]);
  return a;
}

void check_cloud(const std::vector<Vec2>& cloud) {
  if (cloud.size() < 5) {
    throw DegenerateError("profile fit needs at least 5 points, got " +
                          std::to_string(cloud.size()));
  }
  Vec2 mean = Vec2::Zero();
  for (const auto& p : cloud) mean += p;
  mean /= static_cast<double>(cloud.size());
  Mat2 cov = Mat2::Zero();
  for (const auto& p : cloud) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  const double spread = std::sqrt(std::max(0.0, es.eigenvalues()(0)) / cloud.size());
  if (spread < 1e-9) throw DegenerateError("point cloud is collinear");
}

}  // namespace

double RailProfileTemplate::beta1() const {
  const Vec2 d = c1 - c2;
  return std::atan2(d.y(), d.x());
}

Vec2 RailProfileTemplate::tangency_point() const { return c1 + r1 * dir(beta1()); }

void RailProfileTemplate::validate() const {
  if (!(r1 > 0.0 && r2 > r1)) throw ValidationError("template radii must satisfy 0 < R1 < R2");
  const double d = (c1 - c2).norm();
  if (std::abs(d - (r2 - r1)) > 1e-12) {
    throw ValidationError("template centres are not R2 - R1 apart (|C1C2| = " +
                          std::to_string(d) + ")");
  }
  if (!(alpha_max > alpha_min)) throw ValidationError("template angular range is empty");
}

RailProfileTemplate default_template() {
  RailProfileTemplate t;
  t.r1 = 0.013;
  t.r2 = 0.080;
  t.c2 = {0.0, -0.080};
  const double b1 = 71.0 * kPi / 180.0;
  t.c1 = t.c2 + (t.r2 - t.r1) * dir(b1);
  t.alpha_min = 0.0;
  t.alpha_max = 1.9;
  for (int i = 0; i <= 200; ++i) {
    const double a = t.alpha_min + (t.alpha_max - t.alpha_min) * i / 200.0;
    t.head_table.push_back(profile_point(t, a));
  }
  return t;
}

RailProfileTemplate load_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open profile template '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    RailProfileTemplate t;
    t.r1 = j.at("R1").get<double>();
    t.r2 = j.at("R2").get<double>();
    const auto c1 = j.at("C1").get<std::vector<double>>();
    const auto c2 = j.at("C2").get<std::vector<double>>();
    const auto range = j.at("alpha_range").get<std::vector<double>>();
    if (c1.size() != 2 || c2.size() != 2 || range.size() != 2) {
      throw InputError("C1, C2 and alpha_range must have two entries");
    }
    t.c1 = {c1[0], c1[1]};
    t.c2 = {c2[0], c2[1]};
    t.alpha_min = range[0];
    t.alpha_max = range[1];
    if (j.contains("h_r")) {
      for (const auto& row : j.at("h_r")) t.head_table.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_template(const RailProfileTemplate& t, const std::string& path) {
  nlohmann::json j;
  j["format"] = "railgauge two-arc rail-head template";
  j["note"] = "profile coordinates (y, z) in metres, origin at the head top; gauge corner on +y";
  j["R1"] = t.r1;
  j["R2"] = t.r2;
  j["C1"] = {t.c1.x(), t.c1.y()};
  j["C2"] = {t.c2.x(), t.c2.y()};
  j["alpha_range"] = {t.alpha_min, t.alpha_max};
  nlohmann::json table = nlohmann::json::array();
  for (const auto& p : t.head_table) table.push_back({p.x(), p.y()});
  j["h_r"] = table;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

Vec2 profile_point(const Vec4d& x, const RailProfileTemplate& t, double alpha) {
  if (alpha < beta1_of(x)) return c1_of(x) + t.r1 * dir(alpha);
  return c2_of(x) + t.r2 * dir(alpha);
}

Vec2 profile_point(const RailProfileTemplate& t, double alpha) {
  if (!(alpha >= t.alpha_min && alpha <= t.alpha_max)) {
    throw RangeError("profile angle " + std::to_string(alpha) + " outside the template range");
  }
  return profile_point(pack(t.c1, t.c2), t, alpha);
}

AlphaAssignment assign_alpha(const Vec4d& x, const RailProfileTemplate& t, const Vec2& p) {
  const Vec2 d1 = p - c1_of(x), d2 = p - c2_of(x);
  const double n1 = d1.norm(), n2 = d2.norm();
  if (n1 == 0.0 || n2 == 0.0) throw GeometryError("point coincides with an arc centre");
  const double b1 = beta1_of(x);
  const double a1 = std::atan2(d1.y(), d1.x());
  const double a2 = std::atan2(d2.y(), d2.x());
  const Vec2 tp = c1_of(x) + t.r1 * dir(b1);
  const double dist1 = a1 <= b1 ? std::abs(n1 - t.r1) : (p - tp).norm();
  const double dist2 = a2 >= b1 ? std::abs(n2 - t.r2) : (p - tp).norm();
  if (dist1 <= dist2) return {a1 <= b1 ? a1 : b1, 1};
  return {a2 >= b1 ? a2 : b1, 2};
}

double center_constraint(const Vec4d& x, const RailProfileTemplate& t) {
  const Vec2 d = c1_of(x) - c2_of(x);
  return d.squaredNorm() - (t.r2 - t.r1) * (t.r2 - t.r1);
}

double fit_objective(const Vec4d& x, const RailProfileTemplate& t, const std::vector<Vec2>& cloud,
                     const std::vector<AlphaAssignment>& alphas) {
  double f = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& a = alphas[i];
    const Vec2 foot = a.arc == 1 ? Vec2(c1_of(x) + t.r1 * dir(a.alpha))
                                 : Vec2(c2_of(x) + t.r2 * dir(a.alpha));
    f += (cloud[i] - foot).squaredNorm();
  }
  return f;
}

Vec4d fit_gradient(const Vec4d& x, const RailProfileTemplate& t, const std::vector<Vec2>& cloud,
                   const std::vector<AlphaAssignment>& alphas) {
  Vec4d g = Vec4d::Zero();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& a = alphas[i];
    if (a.arc == 1) {
      g.head<2>() -= 2.0 * (cloud[i] - c1_of(x) - t.r1 * dir(a.alpha));
    } else {
      g.tail<2>() -= 2.0 * (cloud[i] - c2_of(x) - t.r2 * dir(a.alpha));
    }
  }
  return g;
}

Vec4d initial_centers(const std::vector<Vec2>& cloud, const RailProfileTemplate& t) {
  Vec2 cc = Vec2::Zero();
  for (const auto& p : cloud) cc += p;
  cc /= static_cast<double>(cloud.size());
  Vec2 tc = Vec2::Zero();
  constexpr int n = 100;
  for (int i = 0; i <= n; ++i) {
    tc += profile_point(t, t.alpha_min + (t.alpha_max - t.alpha_min) * i / n);
  }
  tc /= static_cast<double>(n + 1);
  const Vec2 shift = cc - tc;
  return pack(t.c1 + shift, t.c2 + shift);
}

FitResult fit_profile(const std::vector<Vec2>& cloud, const RailProfileTemplate& t,
                      std::optional<Vec4d> x0, const FitOptions& opt) {
  check_cloud(cloud);
  FitResult res;
  Vec4d x = x0 ? *x0 : initial_centers(cloud, t);
  double lambda = 0.0;
  auto alphas = assign_all(x, t, cloud);

  auto kkt_residual = [&](const Vec4d& xx, double lam, const std::vector<AlphaAssignment>& al,
                          Vec4d& r, double& g) {
    const Vec2 d = c1_of(xx) - c2_of(xx);
    Vec4d dg;
    dg << 2.0 * d, -2.0 * d;
    r = fit_gradient(xx, t, cloud, al) + lam * dg;
    g = center_constraint(xx, t);
  };

  Vec4d r;
  double g;
  kkt_residual(x, lambda, alphas, r, g);
  double merit = r.squaredNorm() + g * g;
  res.objective_history.push_back(fit_objective(x, t, cloud, alphas));

  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (r.norm() < opt.grad_tol && std::abs(g) < opt.constraint_tol) {
      res.converged = true;
      break;
    }
    Eigen::Matrix<double, 5, 5> k = Eigen::Matrix<double, 5, 5>::Zero();
    const double b1 = beta1_of(x);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const int off = alphas[i].arc == 1 ? 0 : 2;
      const Vec2 c = off == 0 ? c1_of(x) : c2_of(x);
      if (alphas[i].alpha == b1) {
        k.block<2, 2>(off, off) += 2.0 * Mat2::Identity();
      } else {
        const Vec2 e = (cloud[i] - c).normalized();
        k.block<2, 2>(off, off) += 2.0 * e * e.transpose();
      }
    }
    const Vec2 d = c1_of(x) - c2_of(x);
    Mat2 i2 = Mat2::Identity();
    k.block<2, 2>(0, 0) += 2.0 * lambda * i2;
    k.block<2, 2>(2, 2) += 2.0 * lambda * i2;
    k.block<2, 2>(0, 2) -= 2.0 * lambda * i2;
    k.block<2, 2>(2, 0) -= 2.0 * lambda * i2;
    Vec4d dg;
    dg << 2.0 * d, -2.0 * d;
    k.block<4, 1>(0, 4) = dg;
    k.block<1, 4>(4, 0) = dg.transpose();

    Eigen::Matrix<double, 5, 1> rhs;
    rhs << -r, -g;
    Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(k);
    if (!lu.isInvertible()) break;
    const Eigen::Matrix<double, 5, 1> step = lu.solve(rhs);

    double tstep = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h, tstep *= 0.5) {
      const Vec4d xt = x + tstep * step.head<4>();
      const double lt = lambda + tstep * step(4);
      std::vector<AlphaAssignment> at;
      try {
        at = assign_all(xt, t, cloud);
      } catch (const GeometryError&) {
        continue;
      }
      Vec4d rt;
      double gt;
      kkt_residual(xt, lt, at, rt, gt);
      const double mt = rt.squaredNorm() + gt * gt;
      if (mt < merit) {
        x = xt;
        lambda = lt;
        alphas = std::move(at);
        r = rt;
        g = gt;
        merit = mt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    res.objective_history.push_back(fit_objective(x, t, cloud, alphas));
  }
  if (!res.converged && r.norm() < opt.grad_tol && std::abs(g) < opt.constraint_tol) {
    res.converged = true;
  }

  res.x = x;
  res.lambda = lambda;
  res.iterations = it;
  res.rms_residual = std::sqrt(fit_objective(x, t, cloud, alphas) / static_cast<double>(cloud.size()));
  const Vec2 d = c2_of(x) - c1_of(x);
  const Vec2 dt = t.c2 - t.c1;
  res.roll = std::atan2(d.y(), d.x()) - std::atan2(dt.y(), dt.x());
  res.roll = std::remainder(res.roll, 2.0 * kPi);
  res.origin = c1_of(x) - rot(res.roll) * t.c1;
  return res;
}

FitResult fit_rail(const std::vector<Vec2>& cloud, Side side, const RailProfileTemplate& t,
                   const FitOptions& opt) {
  if (side == Side::Right) return fit_profile(cloud, t, std::nullopt, opt);
  std::vector<Vec2> mirrored(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) mirrored[i] = mirror(cloud[i]);
  FitResult r = fit_profile(mirrored, t, std::nullopt, opt);
  r.x = pack(mirror(c1_of(r.x)), mirror(c2_of(r.x)));
  r.origin = mirror(r.origin);
  r.roll = -r.roll;
  return r;
}

Vec2 place_template_point(const RailProfileTemplate& t, const Vec2& origin, double roll,
                          double alpha) {
  return origin + rot(roll) * profile_point(t, alpha);
}

std::vector<WearSample> wear_report(const std::vector<Vec2>& cloud, const FitResult& fit,
                                    const RailProfileTemplate& t, Side side) {
  const bool left = side == Side::Left;
  const Vec4d x = left ? pack(mirror(c1_of(fit.x)), mirror(c2_of(fit.x))) : fit.x;
  std::vector<WearSample> out;
  out.reserve(cloud.size());
  for (const auto& p0 : cloud) {
    const Vec2 p = left ? mirror(p0) : p0;
    const AlphaAssignment a = assign_alpha(x, t, p);
    const Vec2 c = a.arc == 1 ? c1_of(x) : c2_of(x);
    const double radius = a.arc == 1 ? t.r1 : t.r2;
    out.push_back({p0, a.alpha, (p - c).norm() - radius});
  }
  return out;
}

}  // namespace railgauge
