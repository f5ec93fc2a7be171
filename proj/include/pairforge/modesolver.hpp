#pragma once

// 1-D multilayer waveguide mode solver (transfer-matrix method, TE/TM).
// Finds both index-guided (TIR) modes and photonic-band-gap-confined (Bragg)
// modes as complex roots of the transfer-matrix dispersion function; the
// imaginary part of n_eff carries material absorption and substrate leakage.

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "pairforge/layerstack.hpp"
#include "pairforge/materials.hpp"
#include "pairforge/numerics.hpp"

namespace pairforge {

enum class Polarization { TE, TM };
enum class ModeFamily { TIR, Bragg };

inline const char* to_string(Polarization p) {
    return p == Polarization::TE ? "TE" : "TM";
}
inline const char* to_string(ModeFamily f) {
    return f == ModeFamily::TIR ? "TIR" : "bragg";
}

struct ModeProfile {
    // Uniform z grid (nm); z = 0 at the substrate interface.
    double z_start_nm = 0.0;
    double z_step_nm = 5.0;
    std::vector<std::complex<double>> field;  // L2-normalized principal field

    double z_at(std::size_t i) const { return z_start_nm + z_step_nm * static_cast<double>(i); }
};

struct GuidedMode {
    std::complex<double> n_eff;
    double wavelength_nm = 0.0;
    Polarization pol = Polarization::TE;
    ModeFamily family = ModeFamily::TIR;
    int order = 0;                    // sign changes of the field inside the core
    double n_g = 0.0;                 // group index n - lambda dn/dlambda
    double alpha_cm1 = 0.0;           // 4*pi*imag(n_eff)/lambda
    double confinement_core = 0.0;    // |field|^2 fraction inside the core region
    double clad_equivalent_index = 0.0;
    double residual = 0.0;            // normalized dispersion-function residual
    ModeProfile profile;
};

struct SolverOptions {
    double superstrate_index = 1.0;    // medium above the cap (air by default)
    double scan_min = 0.0;             // 0 -> auto (min layer index - 0.12)
    double scan_max = 0.0;             // 0 -> auto (max layer index - 1e-6)
    double scan_step = 2e-4;
    double imag_ceiling = 2e-3;        // discard leakier roots
    double residual_tol = 1e-10;
    double profile_step_nm = 5.0;
    double profile_extension_nm = 1000.0;
    bool with_group_index = true;
    double group_index_delta_nm = 0.25;
    double bragg_confinement_min = 0.15;
    std::size_t max_modes = 64;
};

// All guided/Bragg modes at one wavelength, sorted by descending real(n_eff).
std::vector<GuidedMode> find_modes(const LayerStack& stack,
                                   const DispersionTable& table,
                                   double wavelength_nm, Polarization pol,
                                   const SolverOptions& options = {});

struct DispersionCurve {
    Polarization pol = Polarization::TE;
    ModeFamily family = ModeFamily::TIR;
    int order = 0;
    double temperature_K = 292.15;
    std::vector<double> wavelength_nm;
    std::vector<double> n_eff_re;
    std::vector<double> n_eff_im;
    std::vector<double> n_g;
    std::vector<double> alpha_cm1;
    std::vector<double> confinement;
    std::vector<bool> interpolated;  // true where the tracker bridged a gap

    double n_at(double lambda_nm) const;    // spline-interpolated real(n_eff)
    double ng_at(double lambda_nm) const;   // spline-interpolated group index
    double alpha_at(double lambda_nm) const;
    double min_wavelength_nm() const { return wavelength_nm.front(); }
    double max_wavelength_nm() const { return wavelength_nm.back(); }

  private:
    mutable std::shared_ptr<const CubicSpline> n_spline_;
    mutable std::shared_ptr<const CubicSpline> ng_spline_;
    mutable std::shared_ptr<const CubicSpline> alpha_spline_;
};

// Track one mode (selected by polarization/family/order at the first grid
// point) across a wavelength grid. Throws SolveError if the track is lost on
// more than 10% of the grid.
DispersionCurve dispersion_curve(const LayerStack& stack,
                                 const DispersionTable& table,
                                 Polarization pol, ModeFamily family, int order,
                                 const std::vector<double>& wavelength_grid_nm,
                                 double temperature_K,
                                 const SolverOptions& options = {});

// n_g = n - lambda*dn/dlambda from sampled n(lambda), 3-point finite
// differences (one-sided at the ends).
std::vector<double> group_index_from_samples(
    const std::vector<double>& wavelength_nm, const std::vector<double>& n_eff);

// Modal nonlinear overlap Gamma = integral d(z) * conj(p) * s * i dz over the
// common z window, with each profile L2-normalized on that window first.
// d(z) is piecewise-constant per layer (pm/V), zero outside the stack.
std::complex<double> overlap_integral(const ModeProfile& pump,
                                      const ModeProfile& signal,
                                      const ModeProfile& idler,
                                      const std::vector<double>& d_pm_per_V,
                                      const LayerStack& stack);

// Plane-wave power reflectance of the stack at normal incidence, from the
// superstrate (air) side into the substrate.
double normal_incidence_reflectance(const LayerStack& stack,
                                    const DispersionTable& table,
                                    double wavelength_nm);

// Thickness-weighted mean mirror index at a wavelength (the "cladding
// equivalent" used to split TIR from Bragg families).
double cladding_equivalent_index(const LayerStack& stack,
                                 const DispersionTable& table,
                                 double wavelength_nm);

}  // namespace pairforge
