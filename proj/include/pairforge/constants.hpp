#pragma once

namespace pairforge::constants {

inline constexpr double c_m_per_s = 299792458.0;
inline constexpr double c_nm_per_s = 2.99792458e17;
inline constexpr double h_J_s = 6.62607015e-34;
inline constexpr double hbar_J_s = 1.054571817e-34;
inline constexpr double e_C = 1.602176634e-19;
inline constexpr double hc_eV_nm = 1239.841984;  // h*c in eV*nm
inline constexpr double pi = 3.14159265358979323846;

// Photon energy in joules for a vacuum wavelength in nm.
inline double photon_energy_J(double wavelength_nm) {
    return h_J_s * c_m_per_s / (wavelength_nm * 1e-9);
}

inline double photon_energy_eV(double wavelength_nm) {
    return hc_eV_nm / wavelength_nm;
}

}  // namespace pairforge::constants
