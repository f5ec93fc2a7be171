#pragma once

// Type-II modal phase matching (tuning curves, degeneracy, temperature
// slope), SHG spectra with Fabry-Perot modulation and their least-squares
// fits, Fabry-Perot fringe-contrast loss extraction, and SPDC efficiency
// conversions.
//
// Conventions: wavelengths in nm, delta-k in rad/cm, losses in cm^-1,
// lengths in cm, probabilities dimensionless.

#include <string>
#include <vector>

#include "pairforge/layerstack.hpp"
#include "pairforge/materials.hpp"
#include "pairforge/modesolver.hpp"

namespace pairforge {

// Idler wavelength from energy conservation 1/pump = 1/signal + 1/idler.
double idler_wavelength_nm(double pump_nm, double signal_nm);

struct PhaseMatchPoint {
    double pump_nm = 0.0;    // pump (Bragg mode)
    double signal_nm = 0.0;  // signal (fundamental TE)
    double idler_nm = 0.0;   // idler (fundamental TM)
    double temperature_K = 0.0;
    double delta_k_rad_cm = 0.0;
};

// The three interacting mode dispersions: one pump-band curve and the two
// fundamental-band curves the phase-matching engine interpolates on.
struct ModeCurves {
    DispersionCurve pump;    // Bragg mode over the pump wavelength range
    DispersionCurve signal;  // TE fundamental over the pair band
    DispersionCurve idler;   // TM fundamental over the pair band
};

// Solve the three dispersion curves needed to evaluate phase matching for
// pump wavelengths in [pump_lo_nm, pump_hi_nm] with a signal search window
// of +-signal_window_nm around degeneracy.
ModeCurves build_mode_curves(const LayerStack& stack,
                             const DispersionTable& table,
                             double temperature_K, double pump_lo_nm,
                             double pump_hi_nm, double pump_step_nm = 0.25,
                             double signal_window_nm = 200.0,
                             double fund_step_nm = 4.0,
                             const SolverOptions& options = {});

// delta_k = 2*pi*(n_p/lambda_p - n_s/lambda_s - n_i/lambda_i) in rad/cm,
// with the idler wavelength fixed by energy conservation. Throws RangeError
// when any wavelength falls outside its curve, or when the curves were not
// built at temperature_K.
double phase_mismatch(const ModeCurves& curves, double pump_nm,
                      double signal_nm, double temperature_K);

struct TuningCurve {
    double temperature_K = 0.0;
    std::vector<PhaseMatchPoint> points;  // ordered by (pump, signal)
    double degeneracy_pump_nm = 0.0;      // NaN when absent from the window
    std::vector<std::string> warnings;    // skipped pump points etc.

    bool has_degeneracy() const;
};

struct TuningOptions {
    double signal_window_nm = 200.0;  // search lambda_s in 2*lp +- window
    double scan_step_nm = 0.5;        // coarse bracketing step over lambda_s
    double pump_step_nm = 0.25;       // pump-curve sampling for the solver
    double fund_step_nm = 4.0;        // fundamental-curve sampling
    double dk_tol_rad_cm = 1e-6;      // refinement target, << 1e-4 contract
    SolverOptions solver;
};

// Phase-matched (delta_k = 0) signal/idler pairs for each pump wavelength,
// both branches, plus the degeneracy point emitted once. Pump points with
// no root inside the window are skipped with a warning; a fully empty curve
// throws SolveError.
TuningCurve tuning_curve_from_modes(const ModeCurves& curves,
                                    const std::vector<double>& pump_grid_nm,
                                    double temperature_K,
                                    const TuningOptions& options = {});

TuningCurve tuning_curves(const LayerStack& stack, const DispersionTable& table,
                          double temperature_K,
                          const std::vector<double>& pump_grid_nm,
                          const TuningOptions& options = {});

struct DegeneracyPoint {
    double pump_nm = 0.0;  // pump wavelength with lambda_s = lambda_i
    double pair_nm = 0.0;  // = 2 * pump_nm
    double temperature_K = 0.0;
};

// Locate the degenerate phase-matching point (signal = idler = 2*pump)
// inside [pump_lo_nm, pump_hi_nm]. Throws SolveError when the window does
// not bracket one.
DegeneracyPoint degeneracy_search(const LayerStack& stack,
                                  const DispersionTable& table,
                                  double temperature_K, double pump_lo_nm,
                                  double pump_hi_nm,
                                  const SolverOptions& options = {});

struct PmTemperatureFit {
    double slope_nm_per_K = 0.0;   // pair-wavelength shift per kelvin
    double intercept_nm = 0.0;     // regression intercept at T = 0 K
    std::vector<double> temperature_K;
    std::vector<double> center_nm;  // degenerate pair wavelength per T
    std::vector<std::string> warnings;

    double center_at(double T) const { return intercept_nm + slope_nm_per_K * T; }
};

// Degenerate pair wavelength vs temperature, linear regression. Temperatures
// whose degeneracy search fails are skipped with a warning; fewer than three
// valid points is an error.
PmTemperatureFit pm_center_vs_temperature(const LayerStack& stack,
                                          const DispersionTable& table,
                                          const std::vector<double>& temps_K,
                                          double pump_lo_nm, double pump_hi_nm,
                                          const SolverOptions& options = {});

// Parameters of the SHG spectral model: sinc^2-type phase-matching envelope
// (with pump/SH propagation loss folded in) multiplied by one Fabry-Perot
// enhancement factor per interacting mode. Roles: the two fundamental
// (near-infrared) modes and the second-harmonic mode.
struct ShgModel {
    double eta_pct_per_W_cm2 = 0.0;  // internal normalized efficiency
    double center_nm = 0.0;          // fundamental wavelength where dk = 0
    double fwhm_nm = 0.0;            // envelope FWHM, fundamental nm
    double length_cm = 0.0;
    double fundamental_power_W = 1.0;

    double R_fund_te = 0.0, R_fund_tm = 0.0, R_sh = 0.0;  // facet reflectivities
    double alpha_fund_te_cm1 = 0.0, alpha_fund_tm_cm1 = 0.0, alpha_sh_cm1 = 0.0;
    double ng_fund_te = 0.0, ng_fund_tm = 0.0, ng_sh = 0.0;  // FP fringe spacing
    double phase_fund_te = 0.0, phase_fund_tm = 0.0, phase_sh = 0.0;  // rad
};

// SH power (W) on a fundamental-wavelength grid. Throws SchemaError for
// non-physical parameters (R >= 1, non-positive length/FWHM).
std::vector<double> shg_spectrum(const ShgModel& model,
                                 const std::vector<double>& lambda_nm);

// ShgModel with physics-derived center/FWHM/alpha/n_g for a stack: center
// from the degeneracy search, FWHM from the group-index walk-off
// 0.443*lambda^2/(1e7*L*dng), facet R from the stack config.
ShgModel shg_model_from_stack(const LayerStack& stack,
                              const DispersionTable& table,
                              double temperature_K, double eta_pct_per_W_cm2,
                              double pump_lo_nm, double pump_hi_nm,
                              const SolverOptions& options = {});

struct ShgFit {
    ShgModel model;              // fitted eta/center/FWHM/phases + fixed inputs
    double residual_norm = 0.0;  // rms of (model - data)
    bool degenerate = false;     // zero-amplitude input, eta pinned to 0
    bool converged = false;
    int iterations = 0;
};

// Known (not fitted) quantities for fit_shg.
struct ShgFitConfig {
    double length_cm = 0.0;
    double fundamental_power_W = 1.0;
    double R_fund_te = 0.0, R_fund_tm = 0.0, R_sh = 0.0;
    double alpha_fund_te_cm1 = 0.0, alpha_fund_tm_cm1 = 0.0, alpha_sh_cm1 = 0.0;
    double ng_fund_te = 0.0, ng_fund_tm = 0.0, ng_sh = 0.0;
};

// Least-squares (eta, center, FWHM, Airy phases) estimate from a measured
// SH spectrum; facet reflectivities and losses are held fixed. Combines a
// fringe-averaged envelope initialization, a coarse phase grid, and
// Levenberg-Marquardt. Throws SolveError when no start converges.
ShgFit fit_shg(const std::vector<double>& lambda_nm,
               const std::vector<double>& sh_power,
               const ShgFitConfig& config);

struct LossExtraction {
    double alpha_cm1 = 0.0;
    double alpha_std_cm1 = 0.0;  // spread over individual fringes
    int fringe_count = 0;
};

// Fabry-Perot fringe-contrast loss extraction: per fringe K = (Imax - Imin)
// / (Imax + Imin), x = (1 - sqrt(1 - K^2))/K = R*exp(-alpha*L), alpha =
// -ln(x/R)/L; mean and standard deviation over fringes. Throws SolveError
// when no fringes are found, K >= 1, or x > R (negative loss).
LossExtraction extract_loss_fp(const std::vector<double>& lambda_nm,
                               const std::vector<double>& transmission,
                               double facet_R, double length_cm);

// Airy transmission spectrum for the loss-extraction round trip: T(lambda)
// = (1-R)^2 e^{-aL} / ((1-x)^2 + 4 x sin^2 phi), x = R e^{-aL}, phi =
// phase0 + 2 pi n_g L / lambda.
std::vector<double> synthesize_fp_transmission(
    const std::vector<double>& lambda_nm, double alpha_cm1, double facet_R,
    double length_cm, double group_index, double phase0 = 0.0);

// Bandwidth conversion: delta-lambda at lambda -> Hz (c * dl / l^2).
double spectral_bandwidth_hz(double delta_lambda_nm, double lambda_nm);

// Pair-generation probability per pump photon: (eta/100) * L^2 * (photon
// energy) * bandwidth. The bandwidth convention is an explicit input; use
// spectral_bandwidth_hz to convert from nm at the pair wavelength.
double spdc_pair_probability(double eta_pct_per_W_cm2, double length_cm,
                             double pump_nm, double bandwidth_hz);

}  // namespace pairforge
