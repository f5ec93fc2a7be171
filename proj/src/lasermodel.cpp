#include "pairforge/lasermodel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pairforge/constants.hpp"
#include "pairforge/errors.hpp"

namespace pairforge {

namespace {

double require_positive(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw SchemaError(std::string("/diode/") + key + ": missing or not a number");
    const double v = j[key].get<double>();
    if (!(v > 0.0))
        throw SchemaError(std::string("/diode/") + key + ": must be > 0");
    return v;
}

}  // namespace

DiodeParams DiodeParams::from_json(const nlohmann::json& diode, double r_teb) {
    if (!diode.is_object())
        throw SchemaError("/diode: missing object section");
    DiodeParams p;
    p.series_resistance_ohm = require_positive(diode, "series_resistance_ohm");
    p.turn_on_V = require_positive(diode, "turn_on_V");
    p.threshold_A = require_positive(diode, "threshold_A");
    p.slope_mW_per_A = require_positive(diode, "slope_mW_per_A");
    p.emission_wavelength_nm = require_positive(diode, "emission_wavelength_nm");
    p.reference_temperature_K = require_positive(diode, "reference_temperature_K");
    if (!diode.contains("wavelength_slope_nm_per_K") ||
        !diode["wavelength_slope_nm_per_K"].is_number())
        throw SchemaError("/diode/wavelength_slope_nm_per_K: missing or not a number");
    p.wavelength_slope_nm_per_K =
        diode["wavelength_slope_nm_per_K"].get<double>();
    p.pulse_duration_s = require_positive(diode, "pulse_duration_s");
    p.pulse_repetition_Hz = require_positive(diode, "pulse_repetition_Hz");
    if (!(r_teb >= 0.0) || !(r_teb < 1.0))
        throw SchemaError("/facets/R_teb: must be in [0, 1)");
    p.r_teb = r_teb;
    return p;
}

DiodeParams DiodeParams::from_stack(const LayerStack& stack) {
    return from_json(stack.diode, stack.facets.r_teb);
}

LivPoint liv(const DiodeParams& p, double current_A) {
    if (current_A < 0.0) throw RangeError("liv: current must be >= 0");
    LivPoint out;
    out.current_A = current_A;
    out.voltage_V = p.turn_on_V + p.series_resistance_ohm * current_A;
    out.power_out_mW =
        std::max(0.0, p.slope_mW_per_A * (current_A - p.threshold_A));
    out.power_int_mW = out.power_out_mW / (1.0 - p.r_teb);
    return out;
}

double threshold_current_density(double threshold_A, double width_um,
                                 double length_mm) {
    if (!(threshold_A > 0.0) || !(width_um > 0.0) || !(length_mm > 0.0))
        throw RangeError("threshold_current_density: inputs must be > 0");
    const double area_cm2 = (width_um * 1e-4) * (length_mm * 1e-1);
    return threshold_A / area_cm2 * 1e-3;  // A/cm^2 -> kA/cm^2
}

double laser_wavelength(const DiodeParams& p, double temperature_K) {
    if (!(temperature_K > 0.0))
        throw RangeError("laser_wavelength: temperature must be > 0");
    return p.emission_wavelength_nm +
           p.wavelength_slope_nm_per_K *
               (temperature_K - p.reference_temperature_K);
}

TuningLine laser_line(const DiodeParams& p) {
    return TuningLine::through(p.wavelength_slope_nm_per_K,
                               p.emission_wavelength_nm,
                               p.reference_temperature_K);
}

OperatingWindow operating_window(const TuningLine& line_a,
                                 const TuningLine& line_b, double fwhm_nm) {
    if (fwhm_nm < 0.0)
        throw RangeError("operating_window: fwhm must be >= 0");
    const double ds = line_a.slope_nm_per_K - line_b.slope_nm_per_K;
    const double di = line_b.intercept_nm - line_a.intercept_nm;
    OperatingWindow w;
    if (std::abs(ds) < 1e-12) {
        if (std::abs(di) <= 0.5 * fwhm_nm) {
            // parallel lines within the acceptance band everywhere
            w.unbounded = true;
            w.crossing_T_K = std::numeric_limits<double>::quiet_NaN();
            w.half_width_K = std::numeric_limits<double>::infinity();
            w.T_min_K = -std::numeric_limits<double>::infinity();
            w.T_max_K = std::numeric_limits<double>::infinity();
            return w;
        }
        throw SolveError("operating_window: parallel tuning lines never cross");
    }
    w.crossing_T_K = di / ds;
    w.half_width_K = 0.5 * fwhm_nm / std::abs(ds);
    w.T_min_K = w.crossing_T_K - w.half_width_K;
    w.T_max_K = w.crossing_T_K + w.half_width_K;
    return w;
}

OperatingPoint operating_point(const DiodeParams& p, const TuningLine& pm_line,
                               double fwhm_nm, double temperature_K,
                               double current_A) {
    OperatingPoint pt;
    pt.temperature_K = temperature_K;
    pt.current_A = current_A;
    pt.laser_wavelength_nm = laser_wavelength(p, temperature_K);
    pt.pm_center_nm = pm_line.at(temperature_K);
    pt.detuning_nm = pt.laser_wavelength_nm - pt.pm_center_nm;
    pt.in_window = std::abs(pt.detuning_nm) <= 0.5 * fwhm_nm;
    return pt;
}

PairBudget pairs_per_electron(const DiodeParams& p, double current_A,
                              double pair_probability, double pump_nm) {
    if (!(current_A > p.threshold_A)) {
        std::ostringstream os;
        os << "pairs_per_electron: current " << current_A
           << " A is not above threshold " << p.threshold_A << " A";
        throw RangeError(os.str());
    }
    if (pair_probability < 0.0)
        throw RangeError("pairs_per_electron: pair probability must be >= 0");
    if (!(pump_nm > 0.0))
        throw RangeError("pairs_per_electron: pump wavelength must be > 0");

    const double p_out_W =
        1e-3 * p.slope_mW_per_A * (current_A - p.threshold_A);
    const double photons_per_s = p_out_W / constants::photon_energy_J(pump_nm);
    const double electrons_per_s = current_A / constants::e_C;

    PairBudget b;
    b.photons_per_electron = photons_per_s / electrons_per_s;
    b.pair_probability = pair_probability;
    b.pairs_per_electron = b.photons_per_electron * pair_probability;
    b.electrons_per_pulse = current_A * p.pulse_duration_s / constants::e_C;
    b.pairs_per_pulse = b.pairs_per_electron * b.electrons_per_pulse;
    return b;
}

}  // namespace pairforge
