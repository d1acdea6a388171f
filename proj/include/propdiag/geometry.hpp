#pragma once
// geometry.hpp - rotor layout and the force -> body torque/thrust allocation.
//
// Conventions: body x forward, y right, z down. Rotor thrust acts along -z,
// so the collective-thrust row carries -1 per rotor. Rotor azimuths are
// stored per rotor starting at motor 1 (front-right) and stepping through
// the motors in numbering order; for the symmetric X layout they are
// pi/4 + (m-1)*2*pi/n. Roll/pitch moment arms for the default quad are
// l*cos(pi/4), not zero: the arms sit at 45 degrees off both axes.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace propdiag {

enum class SpinDir : int { ccw = +1, cw = -1 };

struct VehicleGeometry {
  int n_rotors = 4;
  double arm_length_m = 0.225;
  double torque_const = 0.016;  // yaw reaction torque per unit rotor force
  std::vector<double> rotor_angles_rad;
  std::vector<SpinDir> spin_dirs;

  // Symmetric X quad: motor 1 front-right, numbering advances one rotor
  // position per index, spin direction alternating.
  static VehicleGeometry x_quad(double arm_length_m = 0.225, double torque_const = 0.016) {
    VehicleGeometry g;
    g.n_rotors = 4;
    g.arm_length_m = arm_length_m;
    g.torque_const = torque_const;
    g.rotor_angles_rad.resize(4);
    g.spin_dirs.resize(4);
    for (int m = 0; m < 4; ++m) {
      g.rotor_angles_rad[m] = std::numbers::pi / 4.0 + m * (std::numbers::pi / 2.0);
      g.spin_dirs[m] = (m % 2 == 0) ? SpinDir::ccw : SpinDir::cw;
    }
    return g;
  }

  // Regular n-rotor layout, used by tests for hexa/octo configurations.
  static VehicleGeometry regular(int n, double arm_length_m = 0.225, double torque_const = 0.016) {
    if (n < 3) throw std::invalid_argument("geometry: need at least 3 rotors");
    VehicleGeometry g;
    g.n_rotors = n;
    g.arm_length_m = arm_length_m;
    g.torque_const = torque_const;
    g.rotor_angles_rad.resize(n);
    g.spin_dirs.resize(n);
    const double step = 2.0 * std::numbers::pi / n;
    for (int m = 0; m < n; ++m) {
      g.rotor_angles_rad[m] = step / 2.0 + m * step;
      g.spin_dirs[m] = (m % 2 == 0) ? SpinDir::ccw : SpinDir::cw;
    }
    return g;
  }

  void validate() const {
    if (n_rotors < 3) throw std::invalid_argument("geometry: n_rotors < 3");
    if (arm_length_m <= 0.0) throw std::invalid_argument("geometry: arm_length_m <= 0");
    if (torque_const <= 0.0) throw std::invalid_argument("geometry: torque_const <= 0");
    if (static_cast<int>(rotor_angles_rad.size()) != n_rotors)
      throw std::invalid_argument("geometry: rotor_angles_rad size mismatch");
    if (static_cast<int>(spin_dirs.size()) != n_rotors)
      throw std::invalid_argument("geometry: spin_dirs size mismatch");
    // Angles must advance strictly, wrapping at most once around the circle.
    const double two_pi = 2.0 * std::numbers::pi;
    double advance = 0.0;
    for (int m = 1; m < n_rotors; ++m) {
      double d = std::fmod(rotor_angles_rad[m] - rotor_angles_rad[m - 1], two_pi);
      if (d < 0) d += two_pi;
      if (d <= 0.0 || d >= two_pi)
        throw std::invalid_argument("geometry: rotor angles not strictly increasing mod 2*pi");
      advance += d;
    }
    if (advance >= two_pi)
      throw std::invalid_argument("geometry: rotor angles wrap the circle more than once");
  }
};

// Rows: roll torque, pitch torque, yaw torque, collective thrust.
// Columns: one per rotor force.
inline Eigen::MatrixXd allocation_matrix(const VehicleGeometry& g) {
  g.validate();
  Eigen::MatrixXd a(4, g.n_rotors);
  for (int m = 0; m < g.n_rotors; ++m) {
    const double alpha = g.rotor_angles_rad[m];
    a(0, m) = -g.arm_length_m * std::cos(alpha);
    a(1, m) = g.arm_length_m * std::sin(alpha);
    a(2, m) = static_cast<double>(static_cast<int>(g.spin_dirs[m])) * g.torque_const;
    a(3, m) = -1.0;
  }
  return a;
}

// Per-rotor forces realizing a commanded (roll, pitch, yaw, thrust) vector.
// Square layouts solve exactly; redundant layouts take the least-norm fit.
inline Eigen::VectorXd mix_forces(const VehicleGeometry& g, const Eigen::Vector4d& cmd) {
  const Eigen::MatrixXd a = allocation_matrix(g);
  if (g.n_rotors == 4) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
      throw std::invalid_argument("geometry: singular allocation (degenerate rotor layout)");
    return lu.solve(cmd);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  if (cod.rank() < 4)
    throw std::invalid_argument("geometry: singular allocation (degenerate rotor layout)");
  return cod.solve(cmd);
}

}  // namespace propdiag
