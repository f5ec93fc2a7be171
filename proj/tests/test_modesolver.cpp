#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pairforge/layerstack.hpp"
#include "pairforge/modesolver.hpp"
#include "pairforge/rng.hpp"

using namespace pairforge;

namespace {

const std::string kData = PAIRFORGE_DATA_DIR;

const DispersionTable& table() {
    static DispersionTable t = DispersionTable::load(kData + "/algaas_mseo.json");
    return t;
}

const LayerStack& device() {
    static LayerStack s = load_stack(kData + "/paper_device.json");
    return s;
}

// Two-composition flat-index table: x = 0 -> n_a, x = 1 -> n_b.
DispersionTable two_level_table(double n_a, double n_b) {
    nlohmann::json j = {
        {"model", "cauchy"},
        {"validity",
         {{"wavelength_nm", {500.0, 4000.0}},
          {"temperature_K", {200.0, 400.0}},
          {"composition_x", {0.0, 1.0}}}},
        {"rows", {{{"x", 0.0}, {"A", n_a}}, {{"x", 1.0}, {"A", n_b}}}}};
    return DispersionTable::from_json(j);
}

LayerStack slab_stack(double d_nm) {
    LayerStack s;
    s.substrate = {1.0, 0.0, "substrate"};
    s.layers = {{0.0, d_nm, 0.0, "core"}};
    s.temperature_K = 300.0;
    return s;
}

std::vector<GuidedMode> tir_modes(std::vector<GuidedMode> modes, double n_min) {
    std::vector<GuidedMode> out;
    for (auto& m : modes)
        if (m.family == ModeFamily::TIR && m.n_eff.real() > n_min)
            out.push_back(std::move(m));
    return out;
}

double trapezoid_overlap(const ModeProfile& a, const ModeProfile& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < a.field.size(); ++i)
        acc += 0.5 *
               ((a.field[i] * std::conj(b.field[i])).real() +
                (a.field[i + 1] * std::conj(b.field[i + 1])).real()) *
               a.z_step_nm;
    return acc;
}

}  // namespace

TEST_SUITE("modesolver") {
    TEST_CASE("symmetric slab matches the textbook root") {
        const auto t = two_level_table(3.5, 3.2);
        auto s = slab_stack(300.0);
        SolverOptions opt;
        opt.superstrate_index = 3.2;
        const auto modes =
            tir_modes(find_modes(s, t, 1570.0, Polarization::TE, opt), 3.2);
        const auto roots = oracle::slab_n_eff(3.2, 3.5, 3.2, 300, 1570, true);
        REQUIRE(roots.size() == 1);
        REQUIRE(modes.size() == 1);
        CHECK(std::abs(modes[0].n_eff.real() - roots[0]) < 1e-6);
        CHECK(std::abs(modes[0].n_eff.imag()) < 1e-12);
        CHECK(modes[0].order == 0);
        CHECK(modes[0].residual < 1e-10);
    }

    TEST_CASE("randomized slabs match the bisection oracle") {
        Rng rng(42);
        for (int trial = 0; trial < 10; ++trial) {
            const double n_core = 3.3 + 0.2 * rng.uniform();
            const double n_sub = n_core - (0.08 + 0.25 * rng.uniform());
            const double n_sup = 1.0 + rng.uniform() * (n_sub - 1.05);
            const double d = 250.0 + 1250.0 * rng.uniform();
            const double wl = 800.0 + 800.0 * rng.uniform();
            const auto t = two_level_table(n_core, n_sub);
            auto s = slab_stack(d);
            SolverOptions opt;
            opt.superstrate_index = n_sup;
            for (bool te : {true, false}) {
                CAPTURE(trial);
                CAPTURE(te);
                const auto pol = te ? Polarization::TE : Polarization::TM;
                const auto modes =
                    tir_modes(find_modes(s, t, wl, pol, opt),
                              std::max(n_sub, n_sup));
                const auto roots =
                    oracle::slab_n_eff(n_sub, n_core, n_sup, d, wl, te);
                REQUIRE(modes.size() == roots.size());
                for (std::size_t m = 0; m < roots.size(); ++m) {
                    CHECK(std::abs(modes[m].n_eff.real() - roots[m]) < 1e-6);
                    CHECK(modes[m].order == static_cast<int>(m));
                }
            }
        }
    }

    TEST_CASE("thin asymmetric core is below cutoff") {
        const auto t = two_level_table(3.3, 3.28);
        auto s = slab_stack(20.0);
        SolverOptions opt;
        opt.superstrate_index = 1.0;
        CHECK(oracle::slab_n_eff(3.28, 3.3, 1.0, 20, 1570, true).empty());
        CHECK(tir_modes(find_modes(s, t, 1570.0, Polarization::TE, opt), 3.28)
                  .empty());
    }

    TEST_CASE("background loss is small; doping moves roots off axis") {
        auto s = slab_stack(400.0);
        s.substrate = {0.45, 0.0, "substrate"};
        s.layers = {{0.11, 400.0, 0.0, "core"}};
        const auto clean =
            tir_modes(find_modes(s, table(), 1570.0, Polarization::TE), 3.14);
        REQUIRE(!clean.empty());
        for (const auto& m : clean) {
            // undoped layers still see the table's 0.1/cm background
            CHECK(m.alpha_cm1 > 0.0);
            CHECK(m.alpha_cm1 < 0.15);
        }
        s.layers[0].doping_cm3 = 2e18;
        const auto doped =
            tir_modes(find_modes(s, table(), 1570.0, Polarization::TE), 3.14);
        REQUIRE(!doped.empty());
        CHECK(doped[0].n_eff.imag() > clean[0].n_eff.imag());
        CHECK(doped[0].alpha_cm1 > 0.5);
        const double alpha =
            4.0 * M_PI * doped[0].n_eff.imag() / (1570.0 * 1e-7);
        CHECK(doped[0].alpha_cm1 == doctest::Approx(alpha).epsilon(1e-9));
        CHECK(doped[0].alpha_cm1 < 2.0);  // confinement < 1 dilutes layer loss
        CHECK(doped[0].n_eff.real() ==
              doctest::Approx(clean[0].n_eff.real()).epsilon(1e-6));
    }

    TEST_CASE("distinct modes are orthogonal") {
        const auto t = two_level_table(3.45, 3.2);
        auto s = slab_stack(1200.0);
        SolverOptions opt;
        opt.superstrate_index = 3.2;
        opt.profile_step_nm = 1.0;
        const auto modes =
            tir_modes(find_modes(s, t, 1570.0, Polarization::TE, opt), 3.2);
        REQUIRE(modes.size() >= 2);
        CHECK(std::abs(trapezoid_overlap(modes[0].profile, modes[0].profile) -
                       1.0) < 1e-6);
        CHECK(std::abs(trapezoid_overlap(modes[0].profile, modes[1].profile)) <
              1e-6);
    }

    TEST_CASE("confinement is grid independent") {
        SolverOptions coarse, fine;
        coarse.profile_step_nm = 5.0;
        fine.profile_step_nm = 2.5;
        const auto a = find_modes(device(), table(), 1570.0, Polarization::TE,
                                  coarse);
        const auto b =
            find_modes(device(), table(), 1570.0, Polarization::TE, fine);
        REQUIRE(!a.empty());
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i].confinement_core - b[i].confinement_core) <
                  1e-4);
    }

    TEST_CASE("reference device pump mode is Bragg guided") {
        const auto modes = find_modes(device(), table(), 785.0,
                                      Polarization::TE);
        const GuidedMode* teb = nullptr;
        for (const auto& m : modes)
            if (m.family == ModeFamily::Bragg &&
                (!teb || m.confinement_core > teb->confinement_core))
                teb = &m;
        REQUIRE(teb != nullptr);
        CHECK(teb->n_eff.real() == doctest::Approx(3.13383).epsilon(1e-5));
        CHECK(teb->n_eff.real() < teb->clad_equivalent_index);
        CHECK(teb->confinement_core == doctest::Approx(0.437).epsilon(5e-3));
        CHECK(teb->confinement_core > 0.15);
        CHECK(teb->n_g == doctest::Approx(4.369).epsilon(2e-3));

        // field maximum inside the core region
        const auto core = device().core_layer_indices();
        const auto bounds = device().boundaries_nm();
        const double z_lo = bounds[core.front()];
        const double z_hi = bounds[core.back() + 1];
        std::size_t imax = 0;
        for (std::size_t i = 0; i < teb->profile.field.size(); ++i)
            if (std::abs(teb->profile.field[i]) >
                std::abs(teb->profile.field[imax]))
                imax = i;
        const double z_max = teb->profile.z_at(imax);
        CHECK(z_max >= z_lo);
        CHECK(z_max <= z_hi);
    }

    TEST_CASE("reference device fundamental pair modes") {
        const auto te = find_modes(device(), table(), 1570.0, Polarization::TE);
        const auto tm = find_modes(device(), table(), 1570.0, Polarization::TM);
        REQUIRE(!te.empty());
        REQUIRE(!tm.empty());
        CHECK(te[0].n_eff.real() == doctest::Approx(3.137602).epsilon(1e-5));
        CHECK(tm[0].n_eff.real() == doctest::Approx(3.129882).epsilon(1e-5));
        CHECK(te[0].n_g == doctest::Approx(3.287).epsilon(2e-3));
        CHECK(tm[0].n_g == doctest::Approx(3.282).epsilon(2e-3));
        CHECK(te[0].alpha_cm1 == doctest::Approx(2.67).epsilon(0.05));
        CHECK(tm[0].alpha_cm1 == doctest::Approx(2.25).epsilon(0.05));
        for (std::size_t i = 1; i < te.size(); ++i)
            CHECK(te[i].n_eff.real() < te[i - 1].n_eff.real());
    }

    TEST_CASE("pump mode is far more dispersive than the pair modes") {
        const auto pump =
            find_modes(device(), table(), 785.0, Polarization::TE);
        const auto pair =
            find_modes(device(), table(), 1570.0, Polarization::TE);
        const GuidedMode* teb = nullptr;
        for (const auto& m : pump)
            if (m.family == ModeFamily::Bragg &&
                (!teb || m.confinement_core > teb->confinement_core))
                teb = &m;
        REQUIRE(teb != nullptr);
        const double slope_pump =
            (teb->n_g - teb->n_eff.real()) / teb->wavelength_nm;
        const double slope_pair =
            (pair[0].n_g - pair[0].n_eff.real()) / pair[0].wavelength_nm;
        CHECK(slope_pump > 5.0 * slope_pair);
    }

    TEST_CASE("group index from samples matches closed forms") {
        std::vector<double> wl, flat, disp;
        const double a = 3.0, b = 1e5;
        for (double l = 1500; l <= 1600.0001; l += 5.0) {
            wl.push_back(l);
            flat.push_back(3.25);
            disp.push_back(a + b / (l * l));
        }
        const auto ng_flat = group_index_from_samples(wl, flat);
        const auto ng_disp = group_index_from_samples(wl, disp);
        for (std::size_t i = 0; i < wl.size(); ++i) {
            CHECK(ng_flat[i] == doctest::Approx(3.25).epsilon(1e-12));
            // finite differences on the 5 nm grid truncate at ~2e-6 inside,
            // ~1e-5 at the one-sided ends
            const double expect = a + 3.0 * b / (wl[i] * wl[i]);
            CHECK(std::abs(ng_disp[i] - expect) < 2e-5);
        }
    }

    TEST_CASE("dispersion curve tracks the fundamental smoothly") {
        std::vector<double> grid;
        for (double l = 1500; l <= 1620.0001; l += 10.0) grid.push_back(l);
        const auto curve =
            dispersion_curve(device(), table(), Polarization::TE,
                             ModeFamily::TIR, 0, grid, 292.15);
        REQUIRE(curve.wavelength_nm.size() == grid.size());
        for (std::size_t i = 1; i < grid.size(); ++i) {
            CHECK(curve.n_eff_re[i] < curve.n_eff_re[i - 1]);
            CHECK(std::abs(curve.n_eff_re[i] - curve.n_eff_re[i - 1]) < 0.01);
        }
        const auto direct =
            find_modes(device(), table(), 1570.0, Polarization::TE);
        CHECK(curve.n_at(1570.0) ==
              doctest::Approx(direct[0].n_eff.real()).epsilon(1e-9));
        // the curve differentiates across its 10 nm grid, the direct solve
        // across +-0.25 nm, so the group indices agree only to the coarser
        // truncation error
        CHECK(curve.ng_at(1570.0) ==
              doctest::Approx(direct[0].n_g).epsilon(1e-5));
        CHECK(curve.alpha_at(1570.0) ==
              doctest::Approx(direct[0].alpha_cm1).epsilon(1e-6));
    }

    TEST_CASE("overlap integral matches dense quadrature") {
        LayerStack s;
        s.substrate = {0.45, 0.0, "substrate"};
        s.layers = {{0.45, 300.0, 0.0, "lower"},
                    {0.11, 400.0, 0.0, "middle"},
                    {0.45, 300.0, 0.0, "upper"}};
        const std::vector<double> d = {0.0, 12.5, 0.0};

        auto gauss = [](double z, double center, double width) {
            const double u = (z - center) / width;
            return std::exp(-u * u);
        };
        auto make_profile = [&](double center, double width, double step) {
            ModeProfile p;
            p.z_start_nm = -200.0;
            p.z_step_nm = step;
            const auto n = static_cast<std::size_t>(1400.0 / step) + 1;
            for (std::size_t i = 0; i < n; ++i)
                p.field.emplace_back(gauss(p.z_at(i), center, width), 0.0);
            return p;
        };

        const auto pump = make_profile(480.0, 150.0, 0.25);
        const auto sig = make_profile(510.0, 190.0, 0.25);
        const auto idl = make_profile(530.0, 210.0, 0.25);
        const auto got = overlap_integral(pump, sig, idl, d, s);

        // dense independent quadrature with the same normalization rule
        const double h = 0.02;
        double norm_p = 0, norm_s = 0, norm_i = 0, acc = 0;
        for (double z = -200.0; z <= 1200.0; z += h) {
            const double p = gauss(z, 480, 150), sg = gauss(z, 510, 190),
                         id = gauss(z, 530, 210);
            norm_p += p * p * h;
            norm_s += sg * sg * h;
            norm_i += id * id * h;
            const double dz = (z >= 300.0 && z <= 700.0) ? 12.5 : 0.0;
            acc += dz * p * sg * id * h;
        }
        const double expect =
            acc / std::sqrt(norm_p * norm_s * norm_i);
        CHECK(std::abs(got.real() - expect) / expect < 1e-5);
        CHECK(std::abs(got.imag()) < 1e-12);
    }

    TEST_CASE("overlap is scale invariant and vanishes with d") {
        LayerStack s;
        s.substrate = {0.45, 0.0, "substrate"};
        s.layers = {{0.11, 400.0, 0.0, "core"}};
        auto make = [](double amp) {
            ModeProfile p;
            p.z_start_nm = -100.0;
            p.z_step_nm = 1.0;
            for (int i = 0; i <= 600; ++i) {
                const double u = (p.z_at(i) - 200.0) / 120.0;
                p.field.emplace_back(amp * std::exp(-u * u), 0.0);
            }
            return p;
        };
        const auto base =
            overlap_integral(make(1), make(1), make(1), {5.0}, s);
        const auto scaled =
            overlap_integral(make(7), make(1), make(1), {5.0}, s);
        CHECK(std::abs(base - scaled) < 1e-12);
        const auto zero =
            overlap_integral(make(1), make(1), make(1), {0.0}, s);
        CHECK(std::abs(zero) == 0.0);
    }
}
