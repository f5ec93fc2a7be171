#pragma once

// Epitaxial stack description: parsing/serialization of the device JSON,
// quarter-wave Bragg construction, and geometry helpers used by the solver.
//
// Geometry convention: z = 0 at the substrate/first-layer interface, growing
// upward; layers are listed bottom (substrate side) to top (superstrate).

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairforge/materials.hpp"

namespace pairforge {

struct Layer {
    double x = 0.0;            // Al fraction
    double thickness_nm = 0.0;
    double doping_cm3 = 0.0;
    std::string label;
};

struct Ridge {
    double width_um = 5.75;
    double etch_depth_um = 2.0;
    double length_mm = 2.0;
};

struct Facets {
    double r_teb = 0.0;
    double r_te00 = 0.0;
    double r_tm00 = 0.0;
};

struct Substrate {
    double x = 0.0;
    double doping_cm3 = 0.0;
    std::string label = "substrate";
};

struct LayerStack {
    Substrate substrate;
    std::vector<Layer> layers;
    Ridge ridge;
    Facets facets;
    double temperature_K = 292.15;
    std::string design_notes;           // free-form, round-tripped
    nlohmann::json diode;               // optional diode section, passed through

    double total_thickness_nm() const;
    // z of each interface, size layers.size()+1, starting at 0.
    std::vector<double> boundaries_nm() const;
    // Indices of layers that count as the guiding core (label contains
    // "core", "well" or "qw", case-insensitive). Empty if none are labeled.
    std::vector<std::size_t> core_layer_indices() const;
    // Indices of mirror layers (label contains "bragg" or "mirror"). Falls
    // back to all non-core layers when nothing is labeled as a mirror.
    std::vector<std::size_t> mirror_layer_indices() const;
};

LayerStack parse_stack(const nlohmann::json& j);
LayerStack load_stack(const std::string& path);
nlohmann::ordered_json serialize_stack(const LayerStack& s);

// One quarter-wave mirror period list: `periods` repetitions of
// (x_first, x_second), each layer thickness = design_wavelength / (4 n)
// with n evaluated at the design wavelength and given temperature.
std::vector<Layer> build_bragg(double design_wavelength_nm, int periods,
                               double x_first, double x_second,
                               double temperature_K,
                               const DispersionTable& table);

}  // namespace pairforge
