#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pairforge/errors.hpp"
#include "pairforge/layerstack.hpp"
#include "pairforge/nonlinear.hpp"

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

const ModeCurves& device_curves() {
    static ModeCurves c =
        build_mode_curves(device(), table(), 292.15, 784.0, 786.0);
    return c;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i)
        v.push_back(lo + (hi - lo) * i / double(n - 1));
    return v;
}

DispersionCurve flat_curve(double n0, double lo, double hi, double T) {
    DispersionCurve c;
    c.temperature_K = T;
    for (double wl : linspace(lo, hi, 9)) {
        c.wavelength_nm.push_back(wl);
        c.n_eff_re.push_back(n0);
        c.n_eff_im.push_back(0.0);
        c.n_g.push_back(n0);
        c.alpha_cm1.push_back(0.0);
        c.confinement.push_back(1.0);
        c.interpolated.push_back(false);
    }
    return c;
}

ShgModel reference_model() {
    ShgModel m;
    m.eta_pct_per_W_cm2 = 35.0;
    m.center_nm = 1570.0;
    m.fwhm_nm = 0.6;
    m.length_cm = 0.2;
    m.fundamental_power_W = 1.0;
    m.R_fund_te = m.R_fund_tm = m.R_sh = 0.27;
    m.alpha_fund_te_cm1 = 2.67;
    m.alpha_fund_tm_cm1 = 2.25;
    m.alpha_sh_cm1 = 0.18;
    m.ng_fund_te = 3.287;
    m.ng_fund_tm = 3.282;
    m.ng_sh = 4.369;
    return m;
}

}  // namespace

TEST_SUITE("nonlinear") {
    TEST_CASE("idler wavelength follows energy conservation") {
        const double i = idler_wavelength_nm(785.0, 1500.0);
        CHECK(std::abs(1.0 / 785.0 - 1.0 / 1500.0 - 1.0 / i) < 1e-15);
        CHECK(idler_wavelength_nm(785.0, 1570.0) ==
              doctest::Approx(1570.0).epsilon(1e-12));
        CHECK_THROWS_AS(idler_wavelength_nm(785.0, 700.0), RangeError);
        CHECK_THROWS_AS(idler_wavelength_nm(-1.0, 1500.0), RangeError);
    }

    TEST_CASE("dispersionless curves phase match identically") {
        ModeCurves c;
        c.pump = flat_curve(3.2, 700, 900, 300.0);
        c.signal = flat_curve(3.2, 1300, 1900, 300.0);
        c.idler = flat_curve(3.2, 1300, 1900, 300.0);
        for (double lp : {750.0, 785.0, 820.0}) {
            CHECK(std::abs(phase_mismatch(c, lp, 2.0 * lp, 300.0)) < 1e-9);
            CHECK(std::abs(phase_mismatch(c, lp, 2.0 * lp + 40.0, 300.0)) <
                  1e-9);
        }
        CHECK_THROWS_AS(phase_mismatch(c, 785.0, 1570.0, 310.0), RangeError);
        CHECK_THROWS_AS(phase_mismatch(c, 650.0, 1300.0, 300.0), RangeError);
    }

    TEST_CASE("tuning points satisfy both conservation laws") {
        const auto tc = tuning_curve_from_modes(
            device_curves(), {784.6, 784.9, 785.2, 785.5}, 292.15);
        REQUIRE(tc.has_degeneracy());
        REQUIRE(!tc.points.empty());
        for (const auto& p : tc.points) {
            const double energy =
                std::abs(1.0 / p.pump_nm - 1.0 / p.signal_nm - 1.0 / p.idler_nm) *
                p.pump_nm;
            CHECK(energy < 1e-9);
            CHECK(std::abs(p.delta_k_rad_cm) < 1e-4);
            CHECK(std::abs(phase_mismatch(device_curves(), p.pump_nm,
                                          p.signal_nm, 292.15)) < 1e-4);
        }
        CHECK(tc.degeneracy_pump_nm == doctest::Approx(785.057).epsilon(1e-5));
    }

    TEST_CASE("degenerate point sits at twice the pump wavelength") {
        const auto tc = tuning_curve_from_modes(
            device_curves(), {785.0, 785.057, 785.1}, 292.15);
        REQUIRE(tc.has_degeneracy());
        const double lp = tc.degeneracy_pump_nm;
        bool found = false;
        for (const auto& p : tc.points)
            if (std::abs(p.pump_nm - lp) < 1e-9 &&
                std::abs(p.signal_nm - p.idler_nm) < 1e-6) {
                CHECK(p.signal_nm == doctest::Approx(2.0 * lp).epsilon(1e-9));
                found = true;
            }
        CHECK(found);
    }

    TEST_CASE("branches diverge steeply from degeneracy") {
        const auto tc = tuning_curve_from_modes(
            device_curves(), {784.807, 784.907}, 292.15);
        const double deg_pair = 2.0 * 785.057;
        double best = 0.0;
        for (const auto& p : tc.points)
            best = std::max(best, std::abs(p.signal_nm - deg_pair) /
                                      std::abs(p.pump_nm - 785.057));
        CHECK(best > 10.0);
    }

    TEST_CASE("mismatch changes sign across a tuning root") {
        const auto tc =
            tuning_curve_from_modes(device_curves(), {784.657}, 292.15);
        REQUIRE(!tc.points.empty());
        const auto& p = tc.points.front();  // signal branch, lambda_s < 2 lp
        const double before =
            phase_mismatch(device_curves(), p.pump_nm, p.signal_nm - 1.0, 292.15);
        const double after =
            phase_mismatch(device_curves(), p.pump_nm, p.signal_nm + 1.0, 292.15);
        CHECK(before * after < 0.0);
    }

    TEST_CASE("degeneracy search hits the calibrated point") {
        const auto d = degeneracy_search(device(), table(), 292.15, 782, 786);
        CHECK(d.pump_nm == doctest::Approx(785.057).epsilon(2e-5));
        CHECK(d.pair_nm == doctest::Approx(2.0 * d.pump_nm).epsilon(1e-12));
        CHECK_THROWS_AS(degeneracy_search(device(), table(), 292.15, 782, 783),
                        SolveError);
    }

    TEST_CASE("pair center drifts linearly with temperature") {
        const auto fit = pm_center_vs_temperature(
            device(), table(), {290.15, 298.15, 306.15}, 782, 786);
        CHECK(fit.slope_nm_per_K == doctest::Approx(0.0693).epsilon(0.06));
        CHECK(fit.warnings.empty());
        REQUIRE(fit.center_nm.size() == 3);
        for (std::size_t i = 0; i < fit.center_nm.size(); ++i)
            CHECK(std::abs(fit.center_at(fit.temperature_K[i]) -
                           fit.center_nm[i]) < 5e-3);
        CHECK_THROWS_AS(pm_center_vs_temperature(device(), table(),
                                                 {292.15, 293.15}, 782, 786),
                        SolveError);
    }

    TEST_CASE("shg model from the stack matches the tuning view") {
        const auto m =
            shg_model_from_stack(device(), table(), 292.15, 35.0, 782, 786);
        CHECK(m.eta_pct_per_W_cm2 == doctest::Approx(35.0));
        CHECK(m.center_nm == doctest::Approx(1570.114).epsilon(1e-5));
        CHECK(m.fwhm_nm == doctest::Approx(0.5035).epsilon(0.01));
        CHECK(m.length_cm == doctest::Approx(0.2));
        CHECK(m.R_fund_te == doctest::Approx(0.27));
        CHECK(m.R_fund_tm == doctest::Approx(0.27));
        CHECK(m.ng_fund_te == doctest::Approx(3.287).epsilon(2e-3));
        CHECK(m.ng_fund_tm == doctest::Approx(3.282).epsilon(2e-3));
        CHECK(m.alpha_fund_te_cm1 == doctest::Approx(2.67).epsilon(0.05));

        const auto d = degeneracy_search(device(), table(), 292.15, 782, 786);
        CHECK(std::abs(m.center_nm - d.pair_nm) < 0.1);
    }

    TEST_CASE("sh power is quadratic in fundamental power") {
        auto m = reference_model();
        const auto grid = linspace(1568.0, 1572.0, 801);
        const auto s1 = shg_spectrum(m, grid);
        m.fundamental_power_W = 2.0;
        const auto s2 = shg_spectrum(m, grid);
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK(s2[i] == doctest::Approx(4.0 * s1[i]).epsilon(1e-12));
    }

    TEST_CASE("mirrorless spectrum is a clean symmetric envelope") {
        auto m = reference_model();
        m.R_fund_te = m.R_fund_tm = m.R_sh = 0.0;
        m.alpha_fund_te_cm1 = m.alpha_fund_tm_cm1 = 1.0;
        const auto grid = linspace(1568.0, 1572.0, 8001);
        const auto s = shg_spectrum(m, grid);
        const auto imax =
            std::max_element(s.begin(), s.end()) - s.begin();
        CHECK(grid[imax] == doctest::Approx(1570.0).epsilon(1e-6));
        for (int d = 1; d <= 3000; d += 250)
            CHECK(s[imax + d] == doctest::Approx(s[imax - d]).epsilon(1e-6));
        // measured half-maximum width equals the model bandwidth
        const double half = s[imax] / 2.0;
        std::size_t l = imax, r = imax;
        while (l > 0 && s[l] > half) --l;
        while (r + 1 < s.size() && s[r] > half) ++r;
        const double width = grid[r] - grid[l];
        CHECK(width == doctest::Approx(0.6).epsilon(0.01));
    }

    TEST_CASE("facet reflections modulate at the free spectral range") {
        auto m = reference_model();
        m.R_fund_tm = m.R_sh = 0.0;
        m.alpha_fund_te_cm1 = m.alpha_fund_tm_cm1 = m.alpha_sh_cm1 = 0.0;
        m.ng_fund_te = 3.3;
        const auto grid = linspace(1569.4, 1570.6, 2401);
        const auto s = shg_spectrum(m, grid);
        std::vector<double> peaks;
        for (std::size_t i = 1; i + 1 < s.size(); ++i)
            if (s[i] > s[i - 1] && s[i] > s[i + 1]) peaks.push_back(grid[i]);
        REQUIRE(peaks.size() >= 4);
        const double fsr =
            1570.0 * 1570.0 / (2.0 * 3.3 * 0.2 * 1e7);
        for (std::size_t i = 1; i < peaks.size(); ++i)
            CHECK(std::abs(peaks[i] - peaks[i - 1] - fsr) < 0.05 * fsr);
    }

    TEST_CASE("fit recovers synthetic spectra") {
        for (const auto& [eta, center, fwhm] :
             {std::tuple{35.0, 1570.0, 0.60}, {20.0, 1568.6, 0.45},
              {60.0, 1571.2, 0.80}}) {
            auto m = reference_model();
            m.eta_pct_per_W_cm2 = eta;
            m.center_nm = center;
            m.fwhm_nm = fwhm;
            const auto grid = linspace(center - 2.5, center + 2.5, 1001);
            const auto s = shg_spectrum(m, grid);
            ShgFitConfig cfg;
            cfg.length_cm = m.length_cm;
            cfg.fundamental_power_W = m.fundamental_power_W;
            cfg.R_fund_te = m.R_fund_te;
            cfg.R_fund_tm = m.R_fund_tm;
            cfg.R_sh = m.R_sh;
            cfg.alpha_fund_te_cm1 = m.alpha_fund_te_cm1;
            cfg.alpha_fund_tm_cm1 = m.alpha_fund_tm_cm1;
            cfg.alpha_sh_cm1 = m.alpha_sh_cm1;
            cfg.ng_fund_te = m.ng_fund_te;
            cfg.ng_fund_tm = m.ng_fund_tm;
            cfg.ng_sh = m.ng_sh;
            const auto fit = fit_shg(grid, s, cfg);
            CAPTURE(eta);
            CHECK(fit.converged);
            CHECK(!fit.degenerate);
            CHECK(std::abs(fit.model.eta_pct_per_W_cm2 - eta) / eta < 0.02);
            CHECK(std::abs(fit.model.center_nm - center) < 0.02 * fwhm);
            CHECK(std::abs(fit.model.fwhm_nm - fwhm) / fwhm < 0.02);
        }
    }

    TEST_CASE("zero spectrum is flagged degenerate") {
        const auto grid = linspace(1568.0, 1572.0, 401);
        ShgFitConfig cfg;
        cfg.length_cm = 0.2;
        const auto fit = fit_shg(grid, std::vector<double>(grid.size(), 0.0),
                                 cfg);
        CHECK(fit.degenerate);
        CHECK(fit.model.eta_pct_per_W_cm2 == 0.0);
    }

    TEST_CASE("fringe contrast matches the closed forms") {
        const auto grid = linspace(1569.0, 1571.0, 4001);
        auto contrast = [&](double alpha) {
            const auto t =
                synthesize_fp_transmission(grid, alpha, 0.27, 0.2, 3.287);
            const double mx = *std::max_element(t.begin(), t.end());
            const double mn = *std::min_element(t.begin(), t.end());
            return (mx - mn) / (mx + mn);
        };
        // K = 2x/(1+x^2) with x = R e^{-alpha L}
        CHECK(contrast(0.0) == doctest::Approx(0.503309).epsilon(5e-4));
        CHECK(contrast(2.0) == doctest::Approx(0.350491).epsilon(5e-4));
    }

    TEST_CASE("loss extraction round trips") {
        std::vector<double> grid;
        for (double l = 1565.0; l <= 1575.0001; l += 0.001) grid.push_back(l);
        for (double alpha : {0.0, 0.1, 2.0}) {
            const auto t =
                synthesize_fp_transmission(grid, alpha, 0.27, 0.2, 3.287);
            const auto got = extract_loss_fp(grid, t, 0.27, 0.2);
            CAPTURE(alpha);
            CHECK(std::abs(got.alpha_cm1 - alpha) <=
                  std::max(0.01 * alpha, 1e-3));
            CHECK(got.fringe_count > 10);
            CHECK(got.alpha_std_cm1 < 0.05);
        }
        CHECK_THROWS_AS(
            extract_loss_fp(grid, std::vector<double>(grid.size(), 1.0), 0.27,
                            0.2),
            SolveError);
    }

    TEST_CASE("pair probability follows the documented formula") {
        const double bw = spectral_bandwidth_hz(1.2, 1570.0);
        CHECK(bw ==
              doctest::Approx(2.99792458e17 * 1.2 / (1570.0 * 1570.0))
                  .epsilon(1e-12));
        const double h = 6.62607015e-34, c = 2.99792458e8;
        const double e_photon = h * c / 785e-9;
        const double bw10 = spectral_bandwidth_hz(10.0, 1570.0);
        const double p = spdc_pair_probability(35.0, 0.2, 785.0, bw10);
        CHECK(p == doctest::Approx(0.35 * 0.2 * 0.2 * e_photon * bw10)
                       .epsilon(1e-9));
        CHECK(spdc_pair_probability(35.0, 0.2, 785.0, 0.0) == 0.0);
        CHECK(spdc_pair_probability(35.0, 0.2, 785.0, 2.0 * bw10) ==
              doctest::Approx(2.0 * p).epsilon(1e-12));
        CHECK(spdc_pair_probability(35.0, 0.4, 785.0, bw10) ==
              doctest::Approx(4.0 * p).epsilon(1e-12));
    }
}
