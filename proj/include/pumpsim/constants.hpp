#pragma once

#include <numbers>

namespace pumpsim::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * pi;

// CODATA 2018 exact / recommended values, SI.
inline constexpr double planck = 6.62607015e-34;           // J s
inline constexpr double hbar = planck / two_pi;            // J s
inline constexpr double speed_of_light = 299792458.0;      // m/s
inline constexpr double boltzmann = 1.380649e-23;          // J/K
inline constexpr double bohr_magneton = 9.2740100783e-24;  // J/T
inline constexpr double gauss = 1.0e-4;                    // T

// 133Cs, D. A. Steck, "Cesium D Line Data" (rev. 2.2.1).
inline constexpr double cesium_mass = 2.20694650e-25;  // kg
inline constexpr double nuclear_spin = 3.5;
inline constexpr double ground_j = 0.5;
inline constexpr double excited_j = 1.5;

// D2 natural linewidth, Gamma = 2 pi x 5.22 MHz.
inline constexpr double gamma_hz = 5.22e6;
inline constexpr double gamma = two_pi * gamma_hz;  // rad/s

// Laser wavelength used throughout the rate model.
inline constexpr double wavelength = 852.0e-9;  // m
inline constexpr double wavenumber = two_pi / wavelength;

// Excited 6P3/2 hyperfine intervals (Steck), Hz.
inline constexpr double split_e2_e3 = 151.2e6;
inline constexpr double split_e3_e4 = 201.2e6;
inline constexpr double split_e4_e5 = 251.0e6;

// Ground-state first-order Lande factors for F=3 and F=4.
inline constexpr double lande_g3 = -0.25;
inline constexpr double lande_g4 = 0.25;

// Default laser linewidth Delta_L, rad/s.
inline constexpr double laser_linewidth = two_pi * 1.0e6;

/// Recoil velocity v_r = hbar k / M, m/s.
inline constexpr double recoil_velocity = hbar * wavenumber / cesium_mass;

/// Two-photon Doppler shift of a counterpropagating Raman pair per v_r, Hz.
inline constexpr double doppler_hz_per_vr = 2.0 * recoil_velocity / wavelength;

/// Saturation intensity pi h c Gamma / (3 lambda^3), W/m^2.
inline constexpr double saturation_intensity =
    pi * planck * speed_of_light * gamma / (3.0 * wavelength * wavelength * wavelength);

/// mu_B / h in Hz per gauss.
inline constexpr double bohr_hz_per_gauss = bohr_magneton * gauss / planck;

}  // namespace pumpsim::constants
