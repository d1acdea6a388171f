#pragma once
// augment.hpp - virtual yaw re-mounting of a flight log: rotating the body
// x/y components of every vector channel by k rotor positions turns a flight
// with damage on motor m into a physically consistent flight with damage on
// motor m+k. z components, thrust and time are invariant under the rotation.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "propdiag/flightlog.hpp"

namespace propdiag {

inline FlightLog rotate_log(const FlightLog& log, int k, int n_rotors = 4) {
  if (n_rotors < 3) throw std::invalid_argument("rotate_log: n_rotors < 3");
  if (log.label.motor > n_rotors)
    throw std::invalid_argument("rotate_log: label motor exceeds rotor count");
  const int kk = ((k % n_rotors) + n_rotors) % n_rotors;
  const double theta = 2.0 * std::numbers::pi * kk / n_rotors;
  const double c = std::cos(theta);
  const double s = std::sin(theta);

  FlightLog out = log;
  for (ImuRecord& r : out.records) {
    double ax = c * r.ax - s * r.ay;
    double ay = s * r.ax + c * r.ay;
    double gx = c * r.gx - s * r.gy;
    double gy = s * r.gx + c * r.gy;
    double qx = c * r.qx - s * r.qy;
    double qy = s * r.qx + c * r.qy;
    r.ax = ax;
    r.ay = ay;
    r.gx = gx;
    r.gy = gy;
    r.qx = qx;
    r.qy = qy;
  }
  if (out.label.kind != DamageKind::healthy)
    out.label.motor = ((out.label.motor - 1 + kk) % n_rotors) + 1;
  return out;
}

// Every input flight expanded to all n_rotors mountings; ids gain a .rotK
// suffix so rotated copies stay distinct.
inline std::vector<FlightLog> augment_corpus(const std::vector<FlightLog>& logs,
                                             int n_rotors = 4) {
  for (const FlightLog& log : logs)
    if (log.label.motor > n_rotors)
      throw std::invalid_argument("augment: corpus mixes rotor counts (motor " +
                                  std::to_string(log.label.motor) + " > " +
                                  std::to_string(n_rotors) + ")");
  std::vector<FlightLog> out;
  out.reserve(logs.size() * n_rotors);
  for (const FlightLog& log : logs) {
    for (int k = 0; k < n_rotors; ++k) {
      FlightLog rotated = rotate_log(log, k, n_rotors);
      rotated.flight_id = log.flight_id + ".rot" + std::to_string(k);
      out.push_back(std::move(rotated));
    }
  }
  return out;
}

}  // namespace propdiag
