#pragma once

// Far-field direction solver.
//
// For a plane wave arriving from unit direction u, microphone j hears the
// wavefront (u . (p_j - p_i)) / c seconds before microphone i, so
//   u . (p_j - p_0) = c * d_0j / fs
// for every j. Stacking j = 1..N-1 gives an (N-1) x 3 system that is solved
// with a precomputed left pseudo-inverse. Normalizing the solution removes
// the dependence on c and absorbs most of the near-field bias.
//
// Angle convention: x forward, y left, z up. Azimuth is measured from +x
// towards +y, elevation from the horizontal plane towards +z.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tdoaloc/tdoa.hpp"

namespace tdoaloc {

using Vec3 = Eigen::Vector3d;

inline constexpr double kDefaultSpeedOfSound = 343.0;

class ArrayGeometry {
 public:
  // Throws InputError for < 4 microphones, non-finite or duplicated
  // positions, or positions spanning fewer than 3 dimensions.
  static ArrayGeometry build(std::vector<Vec3> positions, double speed_of_sound = kDefaultSpeedOfSound,
                             double sample_rate = 48000.0);

  std::size_t mic_count() const { return positions_.size(); }
  const std::vector<Vec3>& positions() const { return positions_; }
  const Eigen::MatrixX3d& diff_matrix() const { return diff_; }
  const Eigen::Matrix3Xd& pinv() const { return pinv_; }
  double speed_of_sound() const { return c_; }
  double sample_rate() const { return fs_; }
  Vec3 center() const { return center_; }

  double baseline(std::size_t i, std::size_t j) const;
  // ceil(|p_i - p_j| fs / c): no physical delay for the pair exceeds this.
  int max_lag(std::size_t i, std::size_t j) const;

  // Convex-hull queries. The hull of the microphones is what "inside the
  // array" means for simulated sources.
  bool contains(const Vec3& point, double margin = 1e-9) const;
  // Distance from the center to the nearest hull face.
  double hull_inradius() const;

  ArrayGeometry with_speed_of_sound(double c) const;
  ArrayGeometry with_sample_rate(double fs) const;

 private:
  struct Plane {
    Vec3 normal;  // outward, unit length
    double offset;
  };

  ArrayGeometry() = default;

  std::vector<Vec3> positions_;
  Eigen::MatrixX3d diff_;
  Eigen::Matrix3Xd pinv_;
  Vec3 center_ = Vec3::Zero();
  std::vector<Plane> hull_;
  double c_ = kDefaultSpeedOfSound;
  double fs_ = 48000.0;
};

// The 8-microphone rectangular prism (0.50 x 0.40 x 0.36 m), centered at the
// origin, microphone 0 at (-x, -y, -z).
std::vector<Vec3> prism_positions(double length = 0.50, double width = 0.40, double height = 0.36);

struct Angles {
  double azimuth_deg = 0.0;    // (-180, 180]
  double elevation_deg = 0.0;  // [-90, 90]
};

struct DirectionEstimate {
  Vec3 u = Vec3::UnitX();
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double raw_norm = 0.0;  // |u| before normalization
  double score = 0.0;
};

// Throws InputError when |u| differs from 1 by more than 1e-6.
Angles direction_to_angles(const Vec3& u);
Vec3 angles_to_direction(double azimuth_deg, double elevation_deg);

double angular_error_deg(const Vec3& a, const Vec3& b);

// Thrown when the least-squares solution is (numerically) the zero vector.
class DegenerateDirection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinRawNorm = 1e-6;

// Delays d_01..d_0(N-1) in (possibly fractional) samples.
DirectionEstimate solve_direction(const ArrayGeometry& geom, std::span<const double> delays_samples,
                                  double score = 0.0);
DirectionEstimate solve_direction(const ArrayGeometry& geom, const TdoaSet& tdoas);

// Exact plane-wave delays for direction u (inverse of solve_direction).
std::vector<double> farfield_delays(const ArrayGeometry& geom, const Vec3& u);
// Exact spherical-wavefront delays for a point source.
std::vector<double> nearfield_delays(const ArrayGeometry& geom, const Vec3& source);

// Mean angular error (degrees) of the far-field solver against point sources
// placed `distance` meters from the array center in `trials` directions drawn
// uniformly on the sphere. Delays are exact spherical-wavefront delays,
// rounded to whole samples when `quantize` is set. The same directions are
// used for every distance. Throws InputError for a distance at or inside the
// hull inradius.
std::vector<double> nearfield_error_curve(const ArrayGeometry& geom, std::span<const double> distances,
                                          std::size_t trials = 500, bool quantize = true,
                                          std::uint64_t seed = 0x5eed);

// Uniform directions on the unit sphere.
std::vector<Vec3> sphere_directions(std::size_t count, std::uint64_t seed);

}  // namespace tdoaloc
