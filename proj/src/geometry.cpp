#include "tdoaloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "tdoaloc/error.hpp"

namespace tdoaloc {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

ArrayGeometry ArrayGeometry::build(std::vector<Vec3> positions, double speed_of_sound, double sample_rate) {
  const std::size_t n = positions.size();
  if (n < 4) throw InputError("array geometry needs >= 4 microphones, got " + std::to_string(n));
  if (!(speed_of_sound > 0.0) || !std::isfinite(speed_of_sound)) throw InputError("speed of sound must be positive");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InputError("sample rate must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions[i].allFinite()) throw InputError("microphone " + std::to_string(i) + " has a non-finite position");
    for (std::size_t j = 0; j < i; ++j)
      if ((positions[i] - positions[j]).norm() < 1e-9)
        throw InputError("microphones " + std::to_string(j) + " and " + std::to_string(i) +
                         " share a position (rank-deficient geometry)");
  }

  ArrayGeometry g;
  g.positions_ = std::move(positions);
  g.c_ = speed_of_sound;
  g.fs_ = sample_rate;

  g.diff_.resize(static_cast<Eigen::Index>(n - 1), 3);
  for (std::size_t i = 1; i < n; ++i) g.diff_.row(static_cast<Eigen::Index>(i - 1)) = (g.positions_[i] - g.positions_[0]).transpose();

  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(g.diff_);
  const auto sv = svd.singularValues();
  const double tol = 1e-9 * std::max(1.0, sv(0));
  const auto rank = (sv.array() > tol).count();
  if (rank < 3)
    throw InputError("microphone positions have rank " + std::to_string(rank) +
                     " (need 3): all microphones lie in one plane or on one line");

  const Eigen::Matrix3d normal = g.diff_.transpose() * g.diff_;
  g.pinv_ = normal.inverse() * g.diff_.transpose();

  g.center_ = Vec3::Zero();
  for (const auto& p : g.positions_) g.center_ += p;
  g.center_ /= static_cast<double>(n);

  // Supporting planes of the convex hull, by brute force over triples.
  const auto& p = g.positions_;
  const double scale = (g.diff_.rowwise().norm()).maxCoeff();
  const double eps = 1e-9 * scale;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) {
        Vec3 normal_vec = (p[b] - p[a]).cross(p[c] - p[a]);
        const double len = normal_vec.norm();
        if (len < 1e-12 * scale * scale) continue;
        normal_vec /= len;
        double offset = normal_vec.dot(p[a]);
        bool above = false;
        bool below = false;
        for (const auto& q : p) {
          const double s = normal_vec.dot(q) - offset;
          above |= s > eps;
          below |= s < -eps;
        }
        if (above && below) continue;
        if (above) {
          normal_vec = -normal_vec;
          offset = -offset;
        }
        g.hull_.push_back({normal_vec, offset});
      }
  return g;
}

double ArrayGeometry::baseline(std::size_t i, std::size_t j) const {
  return (positions_.at(i) - positions_.at(j)).norm();
}

int ArrayGeometry::max_lag(std::size_t i, std::size_t j) const {
  return static_cast<int>(std::ceil(baseline(i, j) * fs_ / c_ - 1e-9));
}

bool ArrayGeometry::contains(const Vec3& point, double margin) const {
  return std::all_of(hull_.begin(), hull_.end(),
                     [&](const Plane& pl) { return pl.normal.dot(point) - pl.offset <= margin; });
}

double ArrayGeometry::hull_inradius() const {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& pl : hull_) r = std::min(r, pl.offset - pl.normal.dot(center_));
  return r;
}

ArrayGeometry ArrayGeometry::with_speed_of_sound(double c) const { return build(positions_, c, fs_); }
ArrayGeometry ArrayGeometry::with_sample_rate(double fs) const { return build(positions_, c_, fs); }

std::vector<Vec3> prism_positions(double length, double width, double height) {
  std::vector<Vec3> out;
  for (double sx : {-0.5, 0.5})
    for (double sy : {-0.5, 0.5})
      for (double sz : {-0.5, 0.5}) out.emplace_back(sx * length, sy * width, sz * height);
  return out;
}

// ---------------------------------------------------------------------------

Angles direction_to_angles(const Vec3& u) {
  if (std::abs(u.norm() - 1.0) > 1e-6) throw InputError("direction_to_angles: vector is not unit length");
  Angles a;
  const double w = std::clamp(u.z(), -1.0, 1.0);
  a.elevation_deg = std::asin(w) * kRadToDeg;
  if (std::hypot(u.x(), u.y()) < 1e-12) {
    a.azimuth_deg = 0.0;  // pole
  } else {
    a.azimuth_deg = std::atan2(u.y(), u.x()) * kRadToDeg;
    if (a.azimuth_deg <= -180.0) a.azimuth_deg = 180.0;
  }
  return a;
}

Vec3 angles_to_direction(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg / kRadToDeg;
  const double el = elevation_deg / kRadToDeg;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double angular_error_deg(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate for tiny angles, unlike acos of the dot.
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kRadToDeg;
}

DirectionEstimate solve_direction(const ArrayGeometry& geom, std::span<const double> delays_samples, double score) {
  const auto rows = static_cast<std::size_t>(geom.diff_matrix().rows());
  if (delays_samples.size() != rows)
    throw InputError("solve_direction: expected " + std::to_string(rows) + " delays, got " +
                     std::to_string(delays_samples.size()));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
  const double scale = geom.speed_of_sound() / geom.sample_rate();
  for (std::size_t i = 0; i < rows; ++i) rhs(static_cast<Eigen::Index>(i)) = scale * delays_samples[i];

  const Vec3 raw = geom.pinv() * rhs;
  const double norm = raw.norm();
  if (!(norm >= kMinRawNorm)) throw DegenerateDirection("TDOA set yields no direction (|u| ~ 0)");

  DirectionEstimate est;
  est.u = raw / norm;
  est.raw_norm = norm;
  est.score = score;
  const auto angles = direction_to_angles(est.u);
  est.azimuth_deg = angles.azimuth_deg;
  est.elevation_deg = angles.elevation_deg;
  return est;
}

DirectionEstimate solve_direction(const ArrayGeometry& geom, const TdoaSet& tdoas) {
  std::vector<double> d(tdoas.delays.begin(), tdoas.delays.end());
  return solve_direction(geom, d, tdoas.score);
}

std::vector<double> farfield_delays(const ArrayGeometry& geom, const Vec3& u) {
  const auto& p = geom.positions();
  std::vector<double> d(p.size() - 1);
  const double scale = geom.sample_rate() / geom.speed_of_sound();
  for (std::size_t j = 1; j < p.size(); ++j) d[j - 1] = u.dot(p[j] - p[0]) * scale;
  return d;
}

std::vector<double> nearfield_delays(const ArrayGeometry& geom, const Vec3& source) {
  const auto& p = geom.positions();
  std::vector<double> d(p.size() - 1);
  const double scale = geom.sample_rate() / geom.speed_of_sound();
  const double t0 = (source - p[0]).norm();
  for (std::size_t j = 1; j < p.size(); ++j) d[j - 1] = (t0 - (source - p[j]).norm()) * scale;
  return d;
}

std::vector<Vec3> sphere_directions(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<Vec3> out;
  out.reserve(count);
  while (out.size() < count) {
    Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    const double n = v.norm();
    if (n < 1e-12) continue;
    out.push_back(v / n);
  }
  return out;
}

std::vector<double> nearfield_error_curve(const ArrayGeometry& geom, std::span<const double> distances,
                                          std::size_t trials, bool quantize, std::uint64_t seed) {
  if (trials == 0) throw InputError("nearfield_error_curve: trials must be positive");
  const double inner = geom.hull_inradius();
  for (double d : distances)
    if (!(d > inner) || !std::isfinite(d))
      throw InputError("nearfield_error_curve: distance " + std::to_string(d) +
                       " m is inside the array (hull inradius " + std::to_string(inner) + " m)");

  const auto dirs = sphere_directions(trials, seed);
  std::vector<double> out(distances.size());
  const auto count = static_cast<std::ptrdiff_t>(distances.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const double dist = distances[static_cast<std::size_t>(k)];
    double sum = 0.0;
    for (const auto& u : dirs) {
      auto delays = nearfield_delays(geom, geom.center() + dist * u);
      if (quantize)
        for (double& x : delays) x = std::round(x);
      sum += angular_error_deg(solve_direction(geom, delays).u, u);
    }
    out[static_cast<std::size_t>(k)] = sum / static_cast<double>(dirs.size());
  }
  return out;
}

}  // namespace tdoaloc
