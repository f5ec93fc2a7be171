#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "pairforge/counting.hpp"
#include "pairforge/errors.hpp"

using namespace pairforge;

namespace {

const std::string kData = PAIRFORGE_DATA_DIR;

// pulse fully covered by the gate, ideal optics unless overridden
ExperimentConfig base_cfg() {
    ExperimentConfig c;
    c.pulse_duration_s = 50e-9;
    c.gate_duration_s = 50e-9;
    c.repetition_hz = 10e3;
    c.acquisition_s = 100.0;
    c.bin_width_s = 162e-12;
    c.detector_efficiency = 1.0;
    return c;
}

std::size_t center_bin(const CoincidenceHistogram& h) {
    return (h.size() - 1) / 2;
}

double central_sum(const CoincidenceHistogram& h, int half_span) {
    const auto k = static_cast<long>(center_bin(h));
    double s = 0.0;
    for (long i = k - half_span; i <= k + half_span; ++i)
        s += double(h.counts[std::size_t(i)]);
    return s;
}

// first-click delay density of two independent Poisson-noise arms with
// detected mean m per window tau: g(d) = m/(2 tau p^2) (e^{-m|d|/tau} -
// e^{m|d|/tau} e^{-2m}) on |d| <= tau, with p = 1 - e^{-m}
double first_click_density(double delta_s, double m, double tau_s) {
    const double p = 1.0 - std::exp(-m);
    const double u = std::abs(delta_s) / tau_s;
    return m / (2.0 * tau_s * p * p) *
           (std::exp(-m * u) - std::exp(m * u) * std::exp(-2.0 * m));
}

}  // namespace

TEST_SUITE("counting") {
    TEST_CASE("config validation rejects bad fields") {
        auto c = base_cfg();
        c.pair_rate_per_pulse = -0.1;
        CHECK_THROWS_AS(c.validate(), SchemaError);
        c = base_cfg();
        c.detector_efficiency = 1.5;
        CHECK_THROWS_AS(c.validate(), SchemaError);
        c = base_cfg();
        c.bin_width_s = 0.0;
        CHECK_THROWS_AS(c.validate(), SchemaError);
        c = base_cfg();
        c.pulse_duration_s = -1e-9;
        CHECK_THROWS_AS(c.validate(), SchemaError);
        c = base_cfg();
        c.acquisition_s = 0.0;
        CHECK_THROWS_AS(c.validate(), SchemaError);
        base_cfg().validate();
    }

    TEST_CASE("config json round trip and defaults") {
        nlohmann::json j = {
            {"pulse_duration_s", 60e-9}, {"repetition_hz", 10e3},
            {"acquisition_s", 10.0},     {"pair_rate_per_pulse", 0.1},
            {"noise_rate_per_pulse", 0.3}, {"detector_efficiency", 0.2},
            {"gate_duration_s", 50e-9},  {"bin_width_s", 162e-12}};
        const auto c = ExperimentConfig::from_json(j);
        CHECK(c.noise_rate_arm1 == doctest::Approx(0.3));
        CHECK(c.noise_rate_arm2 == doctest::Approx(0.3));
        CHECK(c.transmission_arm1 == doctest::Approx(1.0));
        CHECK(c.dark_prob_per_gate == 0.0);
        CHECK(c.gate_count() == 100000);
        auto j2 = j;
        j2["noise_rate_arm2"] = 0.6;
        CHECK(ExperimentConfig::from_json(j2).noise_rate_arm2 ==
              doctest::Approx(0.6));
        j2 = j;
        j2.erase("bin_width_s");
        CHECK_THROWS_AS(ExperimentConfig::from_json(j2), SchemaError);
        j2 = j;
        j2["seed"] = -4;
        CHECK_THROWS_AS(ExperimentConfig::from_json(j2), SchemaError);
        const auto round = ExperimentConfig::from_json(c.to_json());
        CHECK(round.to_json().dump() == c.to_json().dump());
    }

    TEST_CASE("lossless pairs land in the zero-delay bin") {
        auto c = base_cfg();
        c.pair_rate_per_pulse = 1.0;
        c.acquisition_s = 10.0;
        c.seed = 3;
        const auto h = simulate_coincidences(c, 2);
        const auto k = center_bin(h);
        CHECK(double(h.counts[k]) == double(h.total_counts()));
        const double expect = 100000.0 * (1.0 - std::exp(-1.0));
        CHECK(std::abs(double(h.total_counts()) - expect) < 600.0);
        for (std::size_t i = 0; i < h.size(); ++i)
            if (i != k) CHECK(h.counts[i] == 0);
    }

    TEST_CASE("noise-only background matches the analytic law") {
        auto c = base_cfg();
        c.noise_rate_arm1 = c.noise_rate_arm2 = 1.0;
        c.detector_efficiency = 0.2;
        const double m = 0.2, tau = 50e-9;
        const double p = 1.0 - std::exp(-m);
        const double n_gates = 1e6;
        for (std::uint64_t seed : {1, 2, 3}) {
            c.seed = seed;
            const auto h = simulate_coincidences(c, 4);
            const auto k = static_cast<long>(center_bin(h));

            // whole-histogram total: every dual-click gate lands in range
            const double tot_exp = n_gates * p * p;
            CHECK(std::abs(double(h.total_counts()) - tot_exp) <
                  3.0 * std::sqrt(tot_exp));

            // central 51 bins against the exact first-click density
            double obs = 0.0, expd = 0.0, worst = 0.0;
            for (long d = -25; d <= 25; ++d) {
                const double e = n_gates * p * p *
                                 first_click_density(
                                     h.bin_center_s(std::size_t(k + d)), m,
                                     tau) *
                                 h.bin_width_s;
                const double o = double(h.counts[std::size_t(k + d)]);
                obs += o;
                expd += e;
                worst = std::max(worst, std::abs(o - e) / std::sqrt(e));
            }
            CHECK(std::abs(obs - expd) < 3.0 * std::sqrt(expd));
            CHECK(worst < 5.0);

            // spec-level flat approximation near zero delay
            const double flat =
                n_gates * p * p * h.bin_width_s / c.gate_duration_s;
            const double got7 = central_sum(h, 3);
            CHECK(std::abs(got7 - 7.0 * flat) < 3.0 * std::sqrt(7.0 * flat));
        }
    }

    TEST_CASE("background scales with one arm's singles") {
        auto c = base_cfg();
        c.pair_rate_per_pulse = 5e-5;
        c.noise_rate_arm1 = c.noise_rate_arm2 = 0.005;
        c.acquisition_s = 1200.0;
        c.seed = 11;
        const auto h1 = simulate_coincidences(c, 0);
        c.noise_rate_arm1 = 0.010;
        const auto h2 = simulate_coincidences(c, 0);

        const double peak1 = central_sum(h1, 1), peak2 = central_sum(h2, 1);
        const double bg1 = double(h1.total_counts()) - peak1;
        const double bg2 = double(h2.total_counts()) - peak2;
        REQUIRE(bg1 > 100.0);
        const double ratio = bg2 / bg1;
        const double sigma = ratio * std::sqrt(1.0 / bg1 + 1.0 / bg2);
        CHECK(std::abs(ratio - 2.0) < 3.0 * sigma);
        CHECK(std::abs(peak1 - peak2) < 3.0 * std::sqrt(peak1 + peak2));
    }

    TEST_CASE("analyzer recovers a known injected ratio") {
        // generator parameters tuned so the analyzer's expectation is 5.0
        auto c = base_cfg();
        c.pair_rate_per_pulse = 1e-4;
        c.noise_rate_arm1 = c.noise_rate_arm2 = 0.1263;
        c.acquisition_s = 600.0;
        double mean = 0.0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            c.seed = seed;
            const auto a = analyze_histogram(simulate_coincidences(c, 0));
            CHECK(a.snr > 3.8);
            CHECK(a.snr < 6.2);
            CHECK(a.snr_err > 0.0);
            mean += a.snr;
        }
        mean /= 20.0;
        CHECK(std::abs(mean - 5.0) < 0.5);
    }

    TEST_CASE("constructed histogram gives the textbook ratio") {
        CoincidenceHistogram h;
        h.bin_width_s = 162e-12;
        h.counts.assign(101, 10);
        h.t_min_s = -50.5 * h.bin_width_s;
        h.total_gates = 1000000;
        h.config = base_cfg();
        h.counts[50] += 135;
        h.counts[51] += 135;
        const auto a = analyze_histogram(h);
        CHECK(a.window_bins == 2);
        CHECK(a.peak_fwhm_s == doctest::Approx(2.0 * h.bin_width_s).epsilon(1e-9));
        CHECK(a.background_per_window == doctest::Approx(20.0).epsilon(1e-12));
        CHECK(a.true_coincidences == doctest::Approx(270.0).epsilon(1e-12));
        CHECK(a.snr == doctest::Approx(13.5).epsilon(1e-12));
        CHECK(!a.saturated);
        const auto w = werner_fidelity(a.snr);
        CHECK(w.P == doctest::Approx(0.870968).epsilon(1e-6));
        CHECK(w.fidelity == doctest::Approx(0.903226).epsilon(1e-6));
    }

    TEST_CASE("flat histogram reports zero ratio") {
        CoincidenceHistogram h;
        h.bin_width_s = 162e-12;
        h.counts.assign(101, 10);
        h.t_min_s = -50.5 * h.bin_width_s;
        h.total_gates = 1000;
        h.config = base_cfg();
        const auto a = analyze_histogram(h);
        CHECK(a.snr == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(!a.saturated);
    }

    TEST_CASE("empty background saturates instead of crashing") {
        CoincidenceHistogram h;
        h.bin_width_s = 162e-12;
        h.counts.assign(101, 0);
        h.t_min_s = -50.5 * h.bin_width_s;
        h.total_gates = 1000;
        h.config = base_cfg();
        h.counts[50] = 100;
        const auto a = analyze_histogram(h);
        CHECK(a.saturated);
        CHECK(a.snr == doctest::Approx(99.0).epsilon(1e-12));
    }

    TEST_CASE("timing jitter widens the peak") {
        auto c = base_cfg();
        c.pair_rate_per_pulse = 0.5;
        c.acquisition_s = 50.0;
        c.jitter_sd_s = 0.5e-9;
        c.seed = 5;
        const auto a = analyze_histogram(simulate_coincidences(c, 0));
        // two-detector gaussian smear: FWHM = 2.3548 * sqrt(2) * sd
        CHECK(a.peak_fwhm_s > 1.2e-9);
        CHECK(a.peak_fwhm_s < 2.2e-9);
        CHECK(std::abs(a.peak_position_s) < 0.3e-9);
    }

    TEST_CASE("identical seeds are bit-identical for any worker count") {
        auto c = load_experiment_config(kData + "/fig4_coincidence.json");
        c.acquisition_s = 20.0;
        c.seed = 9;
        const auto h1 = simulate_coincidences(c, 1);
        const auto h4 = simulate_coincidences(c, 4);
        const auto hd = simulate_coincidences(c, 0);
        CHECK(h1.counts == h4.counts);
        CHECK(h1.counts == hd.counts);
        CHECK(h1.t_min_s == h4.t_min_s);
        CHECK(h1.total_gates == h4.total_gates);
    }

    TEST_CASE("csv round trip preserves the histogram") {
        auto c = base_cfg();
        c.pair_rate_per_pulse = 0.2;
        c.noise_rate_arm1 = c.noise_rate_arm2 = 0.1;
        c.detector_efficiency = 0.5;
        c.acquisition_s = 5.0;
        c.seed = 21;
        const auto h = simulate_coincidences(c, 2);
        const auto dir = std::filesystem::temp_directory_path();
        const auto path = (dir / "pairforge_hist_test.csv").string();
        save_histogram_csv(h, path);
        REQUIRE(std::filesystem::exists(path));
        REQUIRE(std::filesystem::exists(path + ".meta.json"));
        const auto back = load_histogram_csv(path);
        CHECK(back.counts == h.counts);
        CHECK(back.bin_width_s == doctest::Approx(h.bin_width_s).epsilon(1e-12));
        CHECK(back.t_min_s == doctest::Approx(h.t_min_s).epsilon(1e-9));
        CHECK(back.total_gates == h.total_gates);
        CHECK(back.config.seed == c.seed);

        std::filesystem::remove(path + ".meta.json");
        const auto bare = load_histogram_csv(path);
        CHECK(bare.counts == h.counts);
        CHECK(bare.bin_width_s == doctest::Approx(h.bin_width_s).epsilon(1e-9));
        std::filesystem::remove(path);
    }

    TEST_CASE("werner mapping is exact, monotone and bounded") {
        const auto w = werner_fidelity(13.5);
        CHECK(w.P == doctest::Approx(13.5 / 15.5).epsilon(1e-12));
        CHECK(w.fidelity == doctest::Approx(0.9032258065).epsilon(1e-9));
        CHECK(werner_fidelity(0.0).P == 0.0);
        CHECK(werner_fidelity(0.0).fidelity == doctest::Approx(0.25));
        CHECK(werner_fidelity(1e6).fidelity > 0.99999);
        double prev = -1.0;
        for (double snr = 0.0; snr <= 100.0; snr += 2.5) {
            const double f = werner_fidelity(snr).fidelity;
            CHECK(f > prev);
            CHECK(f < 1.0);
            CHECK(f >= 0.25);
            prev = f;
        }
        CHECK_THROWS_AS(werner_fidelity(-0.5), RangeError);
    }
}
