#include "pairforge/layerstack.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "pairforge/errors.hpp"

namespace pairforge {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool label_contains(const std::string& label,
                    std::initializer_list<const char*> needles) {
    const std::string l = lower(label);
    for (const char* n : needles)
        if (l.find(n) != std::string::npos) return true;
    return false;
}

double field_number(const nlohmann::json& j, const char* key,
                    const std::string& path, bool required,
                    double fallback = 0.0) {
    if (!j.contains(key)) {
        if (required) throw SchemaError(path + "/" + key + ": missing");
        return fallback;
    }
    if (!j[key].is_number())
        throw SchemaError(path + "/" + key + ": must be a number");
    return j[key].get<double>();
}

void check_fraction(double v, const std::string& path) {
    if (v < 0.0 || v > 1.0)
        throw SchemaError(path + ": must lie in [0, 1], got " +
                          std::to_string(v));
}

}  // namespace

double LayerStack::total_thickness_nm() const {
    double t = 0.0;
    for (const auto& l : layers) t += l.thickness_nm;
    return t;
}

std::vector<double> LayerStack::boundaries_nm() const {
    std::vector<double> b;
    b.reserve(layers.size() + 1);
    double z = 0.0;
    b.push_back(z);
    for (const auto& l : layers) {
        z += l.thickness_nm;
        b.push_back(z);
    }
    return b;
}

std::vector<std::size_t> LayerStack::core_layer_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (label_contains(layers[i].label, {"core", "well", "qw"}))
            out.push_back(i);
    return out;
}

std::vector<std::size_t> LayerStack::mirror_layer_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (label_contains(layers[i].label, {"bragg", "mirror"}))
            out.push_back(i);
    if (!out.empty()) return out;
    const auto core = core_layer_indices();
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (std::find(core.begin(), core.end(), i) == core.end())
            out.push_back(i);
    return out;
}

LayerStack parse_stack(const nlohmann::json& j) {
    LayerStack s;
    if (!j.is_object()) throw SchemaError("/: device config must be an object");

    if (j.contains("substrate")) {
        const auto& sub = j["substrate"];
        s.substrate.x = field_number(sub, "x", "/substrate", true);
        check_fraction(s.substrate.x, "/substrate/x");
        s.substrate.doping_cm3 =
            field_number(sub, "doping_cm3", "/substrate", false, 0.0);
        if (s.substrate.doping_cm3 < 0.0)
            throw SchemaError("/substrate/doping_cm3: must be >= 0");
        s.substrate.label = sub.value("label", std::string("substrate"));
    } else {
        throw SchemaError("/substrate: missing");
    }

    if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
        throw SchemaError("/layers: must be a non-empty array");
    for (std::size_t i = 0; i < j["layers"].size(); ++i) {
        const auto& lj = j["layers"][i];
        const std::string path = "/layers/" + std::to_string(i);
        Layer l;
        l.x = field_number(lj, "x", path, true);
        check_fraction(l.x, path + "/x");
        l.thickness_nm = field_number(lj, "thickness_nm", path, true);
        if (!(l.thickness_nm > 0.0))
            throw SchemaError(path + "/thickness_nm: must be > 0, got " +
                              std::to_string(l.thickness_nm));
        l.doping_cm3 = field_number(lj, "doping_cm3", path, false, 0.0);
        if (l.doping_cm3 < 0.0)
            throw SchemaError(path + "/doping_cm3: must be >= 0");
        l.label = lj.value("label", std::string());
        s.layers.push_back(std::move(l));
    }

    if (j.contains("ridge")) {
        const auto& r = j["ridge"];
        s.ridge.width_um = field_number(r, "width_um", "/ridge", true);
        s.ridge.etch_depth_um =
            field_number(r, "etch_depth_um", "/ridge", false, 2.0);
        s.ridge.length_mm = field_number(r, "length_mm", "/ridge", true);
        if (!(s.ridge.width_um > 0.0))
            throw SchemaError("/ridge/width_um: must be > 0");
        if (!(s.ridge.length_mm > 0.0))
            throw SchemaError("/ridge/length_mm: must be > 0");
        if (!(s.ridge.etch_depth_um > 0.0))
            throw SchemaError("/ridge/etch_depth_um: must be > 0");
    }

    if (j.contains("facets")) {
        const auto& f = j["facets"];
        s.facets.r_teb = field_number(f, "R_teb", "/facets", false, 0.0);
        s.facets.r_te00 = field_number(f, "R_te00", "/facets", false, 0.0);
        s.facets.r_tm00 = field_number(f, "R_tm00", "/facets", false, 0.0);
        for (auto [v, name] : {std::pair{s.facets.r_teb, "/facets/R_teb"},
                               {s.facets.r_te00, "/facets/R_te00"},
                               {s.facets.r_tm00, "/facets/R_tm00"}}) {
            if (v < 0.0 || v >= 1.0)
                throw SchemaError(std::string(name) +
                                  ": must lie in [0, 1), got " + std::to_string(v));
        }
    }

    s.temperature_K = field_number(j, "temperature_K", "", false, 292.15);
    if (!(s.temperature_K > 0.0))
        throw SchemaError("/temperature_K: must be > 0");
    s.design_notes = j.value("design_notes", std::string());
    if (j.contains("diode")) s.diode = j["diode"];
    return s;
}

LayerStack load_stack(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open device config: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw SchemaError("device config " + path + ": " + e.what());
    }
    return parse_stack(j);
}

nlohmann::ordered_json serialize_stack(const LayerStack& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    if (!s.design_notes.empty()) j["design_notes"] = s.design_notes;
    j["substrate"] = {{"x", s.substrate.x},
                      {"doping_cm3", s.substrate.doping_cm3},
                      {"label", s.substrate.label}};
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : s.layers) {
        j["layers"].push_back({{"x", l.x},
                               {"thickness_nm", l.thickness_nm},
                               {"doping_cm3", l.doping_cm3},
                               {"label", l.label}});
    }
    j["ridge"] = {{"width_um", s.ridge.width_um},
                  {"etch_depth_um", s.ridge.etch_depth_um},
                  {"length_mm", s.ridge.length_mm}};
    j["facets"] = {{"R_teb", s.facets.r_teb},
                   {"R_te00", s.facets.r_te00},
                   {"R_tm00", s.facets.r_tm00}};
    j["temperature_K"] = s.temperature_K;
    if (!s.diode.is_null()) j["diode"] = s.diode;
    return j;
}

std::vector<Layer> build_bragg(double design_wavelength_nm, int periods,
                               double x_first, double x_second,
                               double temperature_K,
                               const DispersionTable& table) {
    if (periods < 1) throw SchemaError("build_bragg: periods must be >= 1");
    if (!(design_wavelength_nm > 0.0))
        throw SchemaError("build_bragg: design wavelength must be > 0");
    std::vector<Layer> out;
    out.reserve(static_cast<std::size_t>(periods) * 2);
    for (int p = 0; p < periods; ++p) {
        for (double x : {x_first, x_second}) {
            const double n = table.refractive_index(
                {x, design_wavelength_nm, temperature_K});
            Layer l;
            l.x = x;
            l.thickness_nm = design_wavelength_nm / (4.0 * n);
            std::ostringstream label;
            label << "bragg p" << (p + 1) << " x=" << x;
            l.label = label.str();
            out.push_back(std::move(l));
        }
    }
    return out;
}

}  // namespace pairforge
