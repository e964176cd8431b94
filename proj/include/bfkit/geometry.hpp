// Characteristic bearing defect frequencies from geometry and shaft speed.
#pragma once

#include <cmath>
#include <string>

#include "bfkit/common.hpp"

namespace bfkit::geometry {

struct BearingGeometry {
  int rolling_element_count = 0;      // n
  double element_diameter_mm = 0.0;   // d
  double pitch_diameter_mm = 0.0;     // D
  double contact_angle_rad = 0.0;     // phi; 0 for deep-groove ball bearings

  void validate() const {
    if (rolling_element_count <= 0)
      throw ConfigError("bearing geometry: rolling_element_count must be positive");
    if (element_diameter_mm <= 0.0 || pitch_diameter_mm <= 0.0)
      throw ConfigError("bearing geometry: diameters must be positive");
    if (element_diameter_mm >= pitch_diameter_mm)
      throw ConfigError("bearing geometry: element diameter must be less than pitch diameter");
    if (contact_angle_rad < 0.0 || contact_angle_rad >= M_PI / 2.0)
      throw ConfigError("bearing geometry: contact angle must lie in [0, pi/2)");
    const double ratio = diameter_ratio_cos();
    if (!(ratio > 0.0 && ratio < 1.0))
      throw ConfigError("bearing geometry: (d/D)*cos(phi) must lie in (0, 1)");
  }

  double diameter_ratio_cos() const {
    return element_diameter_mm / pitch_diameter_mm * std::cos(contact_angle_rad);
  }
};

struct OperatingCondition {
  double shaft_speed_rpm = 0.0;
  double load_torque_nm = 0.0;
  double radial_force_n = 0.0;
  std::string label;  // e.g. "N15_M07_F10"

  void validate() const {
    if (shaft_speed_rpm <= 0.0)
      throw ConfigError("operating condition: shaft_speed_rpm must be positive");
    if (load_torque_nm < 0.0 || radial_force_n < 0.0)
      throw ConfigError("operating condition: load and force must be nonnegative");
  }
};

// Shaft rotational frequency in Hz.
inline double shaft_frequency(const OperatingCondition& cond) {
  cond.validate();
  return cond.shaft_speed_rpm / 60.0;
}

// Ball pass frequency, outer race: (n/2) f_r (1 - (d/D) cos phi).
inline double bpfo(const BearingGeometry& geom, double shaft_hz) {
  geom.validate();
  if (shaft_hz <= 0.0) throw ConfigError("bpfo: shaft frequency must be positive");
  return 0.5 * geom.rolling_element_count * shaft_hz * (1.0 - geom.diameter_ratio_cos());
}

// Ball pass frequency, inner race: (n/2) f_r (1 + (d/D) cos phi).
inline double bpfi(const BearingGeometry& geom, double shaft_hz) {
  geom.validate();
  if (shaft_hz <= 0.0) throw ConfigError("bpfi: shaft frequency must be positive");
  return 0.5 * geom.rolling_element_count * shaft_hz * (1.0 + geom.diameter_ratio_cos());
}

}  // namespace bfkit::geometry
