#pragma once

namespace pkgwave {

// Physical constants (SI units).
inline constexpr double kSpeedOfLight = 299792458.0;          // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m
inline constexpr double kVacuumPermeability = 1.25663706212e-6; // H/m
inline constexpr double kVacuumImpedance = 376.730313668;       // Ohm
inline constexpr double kPi = 3.14159265358979323846;

} // namespace pkgwave
