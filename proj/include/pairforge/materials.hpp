#pragma once

// Composition/temperature-dependent AlGaAs optics, driven by a JSON
// coefficient table. Two model kinds are supported:
//   "mseo"   - modified single-effective-oscillator with composition
//              polynomials, linear band-edge temperature shift and a soft
//              band-edge clamp (the shipped calibrated table);
//   "cauchy" - n(x, lambda) = A + B/lambda^2 + C/lambda^4 rows keyed by
//              composition, linearly interpolated (synthetic test tables).

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pairforge {

struct MaterialPoint {
    double composition_x = 0.0;
    double wavelength_nm = 0.0;
    double temperature_K = 292.0;
};

struct ValidityRange {
    double wavelength_min_nm = 0.0, wavelength_max_nm = 0.0;
    double temperature_min_K = 0.0, temperature_max_K = 0.0;
    double composition_min = 0.0, composition_max = 1.0;
};

// Per-layer absorption model: background + doping-proportional part, the
// doping part rescaled with wavelength according to `scaling`.
struct LossModel {
    double doping_cm3 = 0.0;
    double alpha_ref_cm1 = 0.0;        // total at reference wavelength
    double alpha_background_cm1 = 0.0; // doping-independent floor
    double reference_wavelength_nm = 1570.0;
    std::string scaling = "lambda_squared";  // or "constant"
};

class DispersionTable {
  public:
    static DispersionTable load(const std::string& path);
    static DispersionTable from_json(const nlohmann::json& j,
                                     const std::string& origin = "<inline>");

    // Real refractive index. Throws RangeError outside the validity range.
    double refractive_index(const MaterialPoint& p) const;

    // Loss model for a layer with the given doping, from the table's loss
    // section. Throws SchemaError for negative doping.
    LossModel loss_model(double doping_cm3) const;

    const ValidityRange& validity() const { return validity_; }
    const std::string& id() const { return id_; }
    const std::string& model() const { return model_; }
    double reference_temperature_K() const { return t_ref_; }

  private:
    void check_range(const MaterialPoint& p) const;
    double eval_mseo(const MaterialPoint& p) const;
    double eval_cauchy(const MaterialPoint& p) const;

    std::string id_, model_, origin_;
    ValidityRange validity_;
    double t_ref_ = 292.0;

    // mseo
    std::vector<double> e0_poly_, ed_poly_, eg_poly_;
    double de0_dT_ = 0.0, deg_dT_ = 0.0, dn_dT_base_ = 0.0;
    double clamp_fraction_ = 0.96, clamp_softness_eV_ = 0.02;

    // cauchy
    struct CauchyRow {
        double x, a, b_nm2, c_nm4;
    };
    std::vector<CauchyRow> cauchy_rows_;

    // loss section; a table without one is lossless
    double loss_alpha0_cm1_ = 0.0;
    double loss_per_doping_cm2_ = 0.0;
    double loss_ref_wavelength_nm_ = 1570.0;
    std::string loss_scaling_ = "lambda_squared";
};

double refractive_index(const MaterialPoint& p, const DispersionTable& table);

// Absorption coefficient (cm^-1) of a layer at the given wavelength.
double layer_loss(const LossModel& model, double wavelength_nm);

}  // namespace pairforge
