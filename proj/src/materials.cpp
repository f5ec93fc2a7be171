#include "pairforge/materials.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pairforge/constants.hpp"
#include "pairforge/errors.hpp"

namespace pairforge {

namespace {

double polyval(const std::vector<double>& c, double x) {
    double acc = 0.0, xn = 1.0;
    for (double ci : c) {
        acc += ci * xn;
        xn *= x;
    }
    return acc;
}

// E -> min(E, e_clamp) with a softplus shoulder of width s, keeping the
// index finite and strictly normally dispersive through the band edge.
double soft_clamp(double e, double e_clamp, double s) {
    const double u = (e - e_clamp) / s;
    double lse;  // log(1 + exp(u)), overflow-safe
    if (u > 0)
        lse = u + std::log1p(std::exp(-u));
    else
        lse = std::log1p(std::exp(u));
    return e - s * lse;
}

std::vector<double> require_array(const nlohmann::json& j, const char* key,
                                  const std::string& path) {
    if (!j.contains(key) || !j[key].is_array())
        throw SchemaError(path + "/" + key + ": missing or not an array");
    std::vector<double> out;
    for (const auto& v : j[key]) out.push_back(v.get<double>());
    return out;
}

double require_number(const nlohmann::json& j, const char* key,
                      const std::string& path) {
    if (!j.contains(key) || !j[key].is_number())
        throw SchemaError(path + "/" + key + ": missing or not a number");
    return j[key].get<double>();
}

}  // namespace

DispersionTable DispersionTable::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open dispersion table: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw SchemaError("dispersion table " + path + ": " + e.what());
    }
    return from_json(j, path);
}

DispersionTable DispersionTable::from_json(const nlohmann::json& j,
                                           const std::string& origin) {
    DispersionTable t;
    t.origin_ = origin;
    if (!j.contains("model") || !j["model"].is_string())
        throw SchemaError(origin + ": /model missing");
    t.model_ = j["model"].get<std::string>();
    t.id_ = j.value("id", std::string("unnamed"));
    t.t_ref_ = j.value("reference_temperature_K", 292.0);

    if (!j.contains("validity"))
        throw SchemaError(origin + ": /validity missing");
    const auto& val = j["validity"];
    const auto wl = require_array(val, "wavelength_nm", origin + "/validity");
    const auto tk = require_array(val, "temperature_K", origin + "/validity");
    const auto cx = require_array(val, "composition_x", origin + "/validity");
    if (wl.size() != 2 || tk.size() != 2 || cx.size() != 2)
        throw SchemaError(origin + "/validity: ranges must be [min, max]");
    t.validity_ = {wl[0], wl[1], tk[0], tk[1], cx[0], cx[1]};

    if (t.model_ == "mseo") {
        if (!j.contains("oscillator"))
            throw SchemaError(origin + ": /oscillator missing for mseo model");
        const auto& osc = j["oscillator"];
        t.e0_poly_ = require_array(osc, "e0_eV_poly_x", origin + "/oscillator");
        t.ed_poly_ = require_array(osc, "ed_eV_poly_x", origin + "/oscillator");
        t.eg_poly_ = require_array(osc, "eg_eV_poly_x", origin + "/oscillator");
        if (j.contains("thermal")) {
            const auto& th = j["thermal"];
            t.de0_dT_ = th.value("de0_dT_eV_per_K", 0.0);
            t.deg_dT_ = th.value("deg_dT_eV_per_K", 0.0);
            t.dn_dT_base_ = th.value("dn_dT_base_per_K", 0.0);
        }
        if (j.contains("band_edge_clamp")) {
            const auto& cl = j["band_edge_clamp"];
            t.clamp_fraction_ = require_number(cl, "fraction", origin + "/band_edge_clamp");
            t.clamp_softness_eV_ =
                require_number(cl, "softness_eV", origin + "/band_edge_clamp");
            if (t.clamp_fraction_ <= 0.0 || t.clamp_fraction_ >= 1.0)
                throw SchemaError(origin +
                                  "/band_edge_clamp/fraction: must lie in (0, 1)");
        }
    } else if (t.model_ == "cauchy") {
        if (!j.contains("rows") || !j["rows"].is_array() || j["rows"].empty())
            throw SchemaError(origin + ": /rows missing for cauchy model");
        for (std::size_t i = 0; i < j["rows"].size(); ++i) {
            const auto& r = j["rows"][i];
            const std::string path = origin + "/rows/" + std::to_string(i);
            CauchyRow row;
            row.x = require_number(r, "x", path);
            row.a = require_number(r, "A", path);
            row.b_nm2 = r.value("B_nm2", 0.0);
            row.c_nm4 = r.value("C_nm4", 0.0);
            t.cauchy_rows_.push_back(row);
        }
        for (std::size_t i = 1; i < t.cauchy_rows_.size(); ++i)
            if (!(t.cauchy_rows_[i].x > t.cauchy_rows_[i - 1].x))
                throw SchemaError(origin + "/rows: x must be strictly increasing");
        if (j.contains("thermal"))
            t.dn_dT_base_ = j["thermal"].value("dn_dT_base_per_K", 0.0);
    } else {
        throw SchemaError(origin + ": unknown model '" + t.model_ + "'");
    }

    if (j.contains("loss")) {
        const auto& lo = j["loss"];
        t.loss_alpha0_cm1_ = lo.value("alpha_undoped_cm1", 0.1);
        t.loss_per_doping_cm2_ = lo.value("alpha_per_doping_cm2", 0.0);
        t.loss_ref_wavelength_nm_ = lo.value("reference_wavelength_nm", 1570.0);
        t.loss_scaling_ = lo.value("scaling", std::string("lambda_squared"));
        if (t.loss_scaling_ != "constant" && t.loss_scaling_ != "lambda_squared")
            throw SchemaError(origin + "/loss/scaling: unknown rule '" +
                              t.loss_scaling_ + "'");
    }
    return t;
}

void DispersionTable::check_range(const MaterialPoint& p) const {
    std::ostringstream err;
    if (p.wavelength_nm < validity_.wavelength_min_nm) {
        err << "wavelength " << p.wavelength_nm
            << " nm below table validity minimum " << validity_.wavelength_min_nm
            << " nm";
    } else if (p.wavelength_nm > validity_.wavelength_max_nm) {
        err << "wavelength " << p.wavelength_nm
            << " nm above table validity maximum " << validity_.wavelength_max_nm
            << " nm";
    } else if (p.temperature_K < validity_.temperature_min_K) {
        err << "temperature " << p.temperature_K
            << " K below table validity minimum " << validity_.temperature_min_K
            << " K";
    } else if (p.temperature_K > validity_.temperature_max_K) {
        err << "temperature " << p.temperature_K
            << " K above table validity maximum " << validity_.temperature_max_K
            << " K";
    } else if (p.composition_x < validity_.composition_min) {
        err << "composition x=" << p.composition_x
            << " below table validity minimum " << validity_.composition_min;
    } else if (p.composition_x > validity_.composition_max) {
        err << "composition x=" << p.composition_x
            << " above table validity maximum " << validity_.composition_max;
    } else {
        return;
    }
    throw RangeError("dispersion table '" + id_ + "': " + err.str());
}

double DispersionTable::eval_mseo(const MaterialPoint& p) const {
    const double dt = p.temperature_K - t_ref_;
    const double e0 = polyval(e0_poly_, p.composition_x) + de0_dT_ * dt;
    const double ed = polyval(ed_poly_, p.composition_x);
    const double eg = polyval(eg_poly_, p.composition_x) + deg_dT_ * dt;
    double e = constants::hc_eV_nm / p.wavelength_nm;
    e = soft_clamp(e, clamp_fraction_ * eg, clamp_softness_eV_);
    const double e2 = e * e;
    const double e0sq = e0 * e0;
    const double egsq = eg * eg;
    const double eta_over_pi = ed / (2.0 * e0 * e0sq * (e0sq - egsq));
    const double n2 = 1.0 + ed / e0 + ed * e2 / (e0 * e0sq) +
                      eta_over_pi * e2 * e2 *
                          std::log((2.0 * e0sq - egsq - e2) / (egsq - e2));
    return std::sqrt(n2) + dn_dT_base_ * dt;
}

double DispersionTable::eval_cauchy(const MaterialPoint& p) const {
    const double il2 = 1.0 / (p.wavelength_nm * p.wavelength_nm);
    auto eval_row = [il2](const CauchyRow& r) {
        return r.a + r.b_nm2 * il2 + r.c_nm4 * il2 * il2;
    };
    const double x = p.composition_x;
    if (x <= cauchy_rows_.front().x) return eval_row(cauchy_rows_.front());
    if (x >= cauchy_rows_.back().x) return eval_row(cauchy_rows_.back());
    for (std::size_t i = 1; i < cauchy_rows_.size(); ++i) {
        if (x <= cauchy_rows_[i].x) {
            const auto& lo = cauchy_rows_[i - 1];
            const auto& hi = cauchy_rows_[i];
            const double t = (x - lo.x) / (hi.x - lo.x);
            return (1.0 - t) * eval_row(lo) + t * eval_row(hi);
        }
    }
    return eval_row(cauchy_rows_.back());
}

double DispersionTable::refractive_index(const MaterialPoint& p) const {
    check_range(p);
    double n = (model_ == "mseo")
                   ? eval_mseo(p)
                   : eval_cauchy(p) +
                         dn_dT_base_ * (p.temperature_K - t_ref_);
    if (!(n > 1.0) || !std::isfinite(n))
        throw SolveError("dispersion table '" + id_ +
                         "' produced a non-physical index");
    return n;
}

LossModel DispersionTable::loss_model(double doping_cm3) const {
    if (doping_cm3 < 0.0)
        throw SchemaError("doping_cm3 must be >= 0, got " +
                          std::to_string(doping_cm3));
    LossModel m;
    m.doping_cm3 = doping_cm3;
    m.alpha_background_cm1 = loss_alpha0_cm1_;
    m.alpha_ref_cm1 = loss_alpha0_cm1_ + loss_per_doping_cm2_ * doping_cm3;
    m.reference_wavelength_nm = loss_ref_wavelength_nm_;
    m.scaling = loss_scaling_;
    return m;
}

double refractive_index(const MaterialPoint& p, const DispersionTable& table) {
    return table.refractive_index(p);
}

double layer_loss(const LossModel& model, double wavelength_nm) {
    if (wavelength_nm <= 0.0)
        throw SchemaError("wavelength must be positive for layer_loss");
    if (model.scaling == "constant") return model.alpha_ref_cm1;
    const double ratio = wavelength_nm / model.reference_wavelength_nm;
    const double doped = model.alpha_ref_cm1 - model.alpha_background_cm1;
    return model.alpha_background_cm1 + doped * ratio * ratio;
}

}  // namespace pairforge
