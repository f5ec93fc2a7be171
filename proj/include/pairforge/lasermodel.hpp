#pragma once

// Electro-optical model of the injection laser diode: L-I-V curve,
// threshold density, temperature tuning of the emission line, the operating
// window where the laser line meets phase matching, and the photon/pair
// budget per injected electron.

#include <vector>

#include "pairforge/layerstack.hpp"

namespace pairforge {

struct DiodeParams {
    double series_resistance_ohm = 0.0;
    double turn_on_V = 0.0;
    double threshold_A = 0.0;
    double slope_mW_per_A = 0.0;  // facet-output slope efficiency
    double r_teb = 0.0;           // modal facet reflectivity of the pump mode
    double emission_wavelength_nm = 0.0;  // laser line at reference_temperature_K
    double reference_temperature_K = 0.0;
    double wavelength_slope_nm_per_K = 0.0;
    double pulse_duration_s = 0.0;
    double pulse_repetition_Hz = 0.0;

    // Parse the device JSON's `diode` section; R_teb comes from the stack's
    // facet block. Throws SchemaError on missing or non-physical fields.
    static DiodeParams from_stack(const LayerStack& stack);
    static DiodeParams from_json(const nlohmann::json& diode, double r_teb);
};

struct LivPoint {
    double current_A = 0.0;
    double voltage_V = 0.0;
    double power_out_mW = 0.0;  // facet output
    double power_int_mW = 0.0;  // internal, = P_out / (1 - R_teb)
};

// Piecewise-linear diode model: V = V_on + R_s I, P_out = slope * (I - I_th)
// above threshold and 0 below, P_int = P_out / (1 - R_teb).
LivPoint liv(const DiodeParams& p, double current_A);

// Threshold current density in kA/cm^2 for an injection stripe of
// width_um x length_mm.
double threshold_current_density(double threshold_A, double width_um,
                                 double length_mm);

// Laser emission wavelength at temperature T: linear band-gap trend, no
// mode hopping.
double laser_wavelength(const DiodeParams& p, double temperature_K);

// A line lambda(T) = intercept_nm + slope_nm_per_K * T, the common currency
// between the laser emission trend and the phase-matching center trend.
struct TuningLine {
    double slope_nm_per_K = 0.0;
    double intercept_nm = 0.0;

    double at(double T) const { return intercept_nm + slope_nm_per_K * T; }
    static TuningLine through(double slope_nm_per_K, double lambda_nm,
                              double T_K) {
        return {slope_nm_per_K, lambda_nm - slope_nm_per_K * T_K};
    }
};

// The diode's emission trend as a TuningLine (pump space).
TuningLine laser_line(const DiodeParams& p);

struct OperatingWindow {
    double crossing_T_K = 0.0;   // T* where the two lines meet
    double half_width_K = 0.0;   // (FWHM/2) / |s1 - s2|
    double T_min_K = 0.0;
    double T_max_K = 0.0;
    bool unbounded = false;      // coincident lines: always in window

    bool contains(double T) const {
        return unbounded || (T >= T_min_K && T <= T_max_K);
    }
};

// Temperature interval where |line_a(T) - line_b(T)| <= fwhm_nm / 2.
// Symmetric in the two lines. Parallel distinct lines never cross
// (SolveError); coincident lines give an unbounded window.
OperatingWindow operating_window(const TuningLine& line_a,
                                 const TuningLine& line_b, double fwhm_nm);

struct OperatingPoint {
    double temperature_K = 0.0;
    double current_A = 0.0;
    double laser_wavelength_nm = 0.0;
    double pm_center_nm = 0.0;
    double detuning_nm = 0.0;  // laser - phase-matching center
    bool in_window = false;    // |detuning| <= fwhm/2
};

// One row of the operating sweep: laser line vs phase-matching line at T.
OperatingPoint operating_point(const DiodeParams& p, const TuningLine& pm_line,
                               double fwhm_nm, double temperature_K,
                               double current_A);

struct PairBudget {
    double photons_per_electron = 0.0;  // facet photons per injected electron
    double pair_probability = 0.0;      // pairs per pump photon (input)
    double pairs_per_electron = 0.0;    // product of the two
    double electrons_per_pulse = 0.0;   // I * pulse_duration / e
    double pairs_per_pulse = 0.0;
};

// Pair budget at drive current I: facet photons per injected electron
// (slope * (I - I_th) * e / (E_photon * I)) times the SPDC pair probability.
// Throws RangeError at or below threshold.
PairBudget pairs_per_electron(const DiodeParams& p, double current_A,
                              double pair_probability, double pump_nm);

}  // namespace pairforge
