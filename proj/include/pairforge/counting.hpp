#pragma once

// Pulsed coincidence-counting simulation and analysis: gated two-detector
// Monte Carlo, delay histogram, SNR extraction, and the Werner-state
// fidelity bound implied by a measured SNR.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pairforge {

// One gated two-arm counting experiment. Photon pairs are emitted uniformly
// over the electrical pulse; the detection gate is centred on the pulse, so
// only the pulse/gate overlap window is observable. "Noise" photons are
// unpolarised luminescence quoted per detector at the detector input (path
// transmission already folded in); detector efficiency applies to every
// photon, pair or noise. Dark counts fire uniformly anywhere in the gate.
struct ExperimentConfig {
    double pulse_duration_s = 60e-9;
    double repetition_hz = 10e3;
    double acquisition_s = 1200.0;
    double pair_rate_per_pulse = 0.0;  // pairs reaching the splitter, per pulse
    double noise_rate_arm1 = 0.0;      // noise photons per detector per pulse
    double noise_rate_arm2 = 0.0;
    double transmission_arm1 = 1.0;  // pair-photon path transmission
    double transmission_arm2 = 1.0;
    double detector_efficiency = 1.0;
    double gate_duration_s = 50e-9;
    double dark_prob_per_gate = 0.0;
    double bin_width_s = 162e-12;
    double jitter_sd_s = 0.0;  // detector timing jitter (recording error)
    std::uint64_t seed = 1;

    std::uint64_t gate_count() const;
    void validate() const;  // throws SchemaError

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

// Delay histogram of (arm1 first click - arm2 first click). Bins are uniform,
// centred on integer multiples of the bin width with bin 0 at the midpoint,
// and span at least the full gate. Each gate with clicks on both arms
// contributes exactly one count.
struct CoincidenceHistogram {
    double bin_width_s = 0.0;
    double t_min_s = 0.0;  // left edge of the first bin
    std::vector<std::uint64_t> counts;
    std::uint64_t total_gates = 0;
    ExperimentConfig config;  // metadata copy

    std::size_t size() const { return counts.size(); }
    double bin_start_s(std::size_t i) const {
        return t_min_s + static_cast<double>(i) * bin_width_s;
    }
    double bin_center_s(std::size_t i) const {
        return bin_start_s(i) + 0.5 * bin_width_s;
    }
    std::uint64_t total_counts() const;
};

// Gate-chunked Monte Carlo; identical seed and config give a bit-identical
// histogram for any worker count (threads = 0 picks the hardware default).
CoincidenceHistogram simulate_coincidences(const ExperimentConfig& cfg,
                                           int threads = 0);

// Peak location/width by half-maximum interpolation over a median baseline;
// background averaged over bins farther than 3x FWHM from the peak;
// SNR = (window counts - expected background in window) / expected background.
// Uncertainties assume Poisson counts. A window with zero expected background
// sets `saturated` and reports the SNR lower bound obtained with one
// background count.
struct HistogramAnalysis {
    double peak_position_s = 0.0;
    double peak_fwhm_s = 0.0;
    double true_coincidences = 0.0;
    double true_coincidences_err = 0.0;
    double background_per_window = 0.0;
    double background_per_window_err = 0.0;
    double snr = 0.0;
    double snr_err = 0.0;
    std::size_t window_bins = 0;
    bool saturated = false;
};

HistogramAnalysis analyze_histogram(const CoincidenceHistogram& h);

// Werner-state parameters implied by a coincidence SNR:
// P = SNR/(2+SNR), fidelity to the Bell state F = (1+3P)/4.
struct WernerEstimate {
    double snr = 0.0;
    double P = 0.0;
    double fidelity = 0.25;
};

WernerEstimate werner_fidelity(double snr);

// CSV export/import: columns (bin_start_s, count) plus a JSON metadata
// sidecar at <path>.meta.json. Import tolerates a missing sidecar by
// reconstructing bin geometry from the bin starts.
void save_histogram_csv(const CoincidenceHistogram& h, const std::string& path);
CoincidenceHistogram load_histogram_csv(const std::string& path);

}  // namespace pairforge
