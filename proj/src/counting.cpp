#include "pairforge/counting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "pairforge/csv.hpp"
#include "pairforge/errors.hpp"
#include "pairforge/rng.hpp"

namespace pairforge {
namespace {

constexpr std::uint64_t kChunkGates = 8192;

double require_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw SchemaError(std::string("experiment config: /") + key +
                          " missing or not a number");
    return j.at(key).get<double>();
}

double number_or(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw SchemaError(std::string("experiment config: /") + key +
                          " must be a number");
    return j.at(key).get<double>();
}

void check_fraction(double v, const char* key) {
    if (!(v >= 0.0 && v <= 1.0))
        throw SchemaError(std::string("experiment config: /") + key +
                          " must lie in [0, 1]");
}

void check_positive(double v, const char* key) {
    if (!(v > 0.0))
        throw SchemaError(std::string("experiment config: /") + key +
                          " must be > 0");
}

void check_rate(double v, const char* key) {
    if (!(v >= 0.0))
        throw SchemaError(std::string("experiment config: /") + key +
                          " must be >= 0");
    // Knuth sampling degrades for huge means; nothing physical lives up there.
    if (v > 100.0)
        throw SchemaError(std::string("experiment config: /") + key +
                          " above 100 per pulse is outside the sampling regime");
}

struct GateModel {
    double window_s = 0.0;      // pulse/gate overlap, photon emission window
    double gate_start_s = 0.0;  // gate left edge relative to the window start
    double mu_pair = 0.0;       // in-window means per gate
    double mu_noise1 = 0.0;
    double mu_noise2 = 0.0;
    double survive1 = 0.0;  // pair-photon transmission x detector efficiency
    double survive2 = 0.0;
    double eta = 0.0;
    double dark = 0.0;
    double gate_s = 0.0;
    double jitter_s = 0.0;
    double bin_s = 0.0;
    std::int64_t center_bin = 0;
    std::int64_t last_bin = 0;
};

GateModel build_gate_model(const ExperimentConfig& c) {
    GateModel m;
    m.window_s = std::min(c.pulse_duration_s, c.gate_duration_s);
    m.gate_start_s = -0.5 * (c.gate_duration_s - m.window_s);
    const double in_window = m.window_s / c.pulse_duration_s;
    m.mu_pair = c.pair_rate_per_pulse * in_window;
    m.mu_noise1 = c.noise_rate_arm1 * in_window;
    m.mu_noise2 = c.noise_rate_arm2 * in_window;
    m.survive1 = c.transmission_arm1 * c.detector_efficiency;
    m.survive2 = c.transmission_arm2 * c.detector_efficiency;
    m.eta = c.detector_efficiency;
    m.dark = c.dark_prob_per_gate;
    m.gate_s = c.gate_duration_s;
    m.jitter_s = c.jitter_sd_s;
    m.bin_s = c.bin_width_s;
    m.center_bin = static_cast<std::int64_t>(
        std::ceil((c.gate_duration_s + 8.0 * c.jitter_sd_s) / c.bin_width_s));
    m.last_bin = 2 * m.center_bin;
    return m;
}

// One gate: fixed draw order (pairs, arm-1 noise, arm-2 noise, darks, jitter)
// so a chunk's stream depends only on seed and chunk index.
void run_gate(const GateModel& m, Rng& rng, std::vector<std::uint64_t>& bins) {
    double t1 = 0.0, t2 = 0.0;
    bool hit1 = false, hit2 = false;
    const auto click = [](double& t, bool& hit, double when) {
        if (!hit || when < t) {
            t = when;
            hit = true;
        }
    };

    const std::uint64_t pairs = rng.poisson(m.mu_pair);
    for (std::uint64_t i = 0; i < pairs; ++i) {
        const double when = m.window_s * rng.uniform();
        const bool keep1 = rng.uniform() < m.survive1;
        const bool keep2 = rng.uniform() < m.survive2;
        if (keep1) click(t1, hit1, when);
        if (keep2) click(t2, hit2, when);
    }
    const std::uint64_t noise1 = rng.poisson(m.mu_noise1);
    for (std::uint64_t i = 0; i < noise1; ++i) {
        const double when = m.window_s * rng.uniform();
        if (rng.uniform() < m.eta) click(t1, hit1, when);
    }
    const std::uint64_t noise2 = rng.poisson(m.mu_noise2);
    for (std::uint64_t i = 0; i < noise2; ++i) {
        const double when = m.window_s * rng.uniform();
        if (rng.uniform() < m.eta) click(t2, hit2, when);
    }
    if (m.dark > 0.0) {
        if (rng.uniform() < m.dark)
            click(t1, hit1, m.gate_start_s + m.gate_s * rng.uniform());
        if (rng.uniform() < m.dark)
            click(t2, hit2, m.gate_start_s + m.gate_s * rng.uniform());
    }
    if (m.jitter_s > 0.0) {
        if (hit1) t1 += m.jitter_s * rng.normal();
        if (hit2) t2 += m.jitter_s * rng.normal();
    }
    if (!(hit1 && hit2)) return;

    std::int64_t bin = std::llround((t1 - t2) / m.bin_s) + m.center_bin;
    bin = std::clamp<std::int64_t>(bin, 0, m.last_bin);
    ++bins[static_cast<std::size_t>(bin)];
}

double median_count(const std::vector<std::uint64_t>& counts) {
    std::vector<std::uint64_t> tmp(counts);
    const std::size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid),
                     tmp.end());
    double med = static_cast<double>(tmp[mid]);
    if (tmp.size() % 2 == 0) {
        const auto lower = *std::max_element(
            tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + static_cast<double>(lower));
    }
    return med;
}

}  // namespace

std::uint64_t ExperimentConfig::gate_count() const {
    return static_cast<std::uint64_t>(
        std::llround(acquisition_s * repetition_hz));
}

void ExperimentConfig::validate() const {
    check_positive(pulse_duration_s, "pulse_duration_s");
    check_positive(repetition_hz, "repetition_hz");
    check_positive(acquisition_s, "acquisition_s");
    check_positive(gate_duration_s, "gate_duration_s");
    check_positive(bin_width_s, "bin_width_s");
    check_rate(pair_rate_per_pulse, "pair_rate_per_pulse");
    check_rate(noise_rate_arm1, "noise_rate_arm1");
    check_rate(noise_rate_arm2, "noise_rate_arm2");
    check_fraction(transmission_arm1, "transmission_arm1");
    check_fraction(transmission_arm2, "transmission_arm2");
    check_fraction(detector_efficiency, "detector_efficiency");
    check_fraction(dark_prob_per_gate, "dark_prob_per_gate");
    if (!(jitter_sd_s >= 0.0))
        throw SchemaError("experiment config: /jitter_sd_s must be >= 0");
    if (gate_count() == 0)
        throw SchemaError(
            "experiment config: acquisition covers no gates "
            "(acquisition_s x repetition_hz rounds to zero)");
    if ((gate_duration_s + 8.0 * jitter_sd_s) / bin_width_s > 2e6)
        throw SchemaError(
            "experiment config: /bin_width_s too small for the gate duration");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw SchemaError("experiment config: root must be a JSON object");
    ExperimentConfig c;
    c.pulse_duration_s = require_number(j, "pulse_duration_s");
    c.repetition_hz = require_number(j, "repetition_hz");
    c.acquisition_s = require_number(j, "acquisition_s");
    c.pair_rate_per_pulse = require_number(j, "pair_rate_per_pulse");
    c.detector_efficiency = require_number(j, "detector_efficiency");
    c.gate_duration_s = require_number(j, "gate_duration_s");
    c.bin_width_s = require_number(j, "bin_width_s");
    const double noise_both = number_or(j, "noise_rate_per_pulse", 0.0);
    c.noise_rate_arm1 = number_or(j, "noise_rate_arm1", noise_both);
    c.noise_rate_arm2 = number_or(j, "noise_rate_arm2", noise_both);
    c.transmission_arm1 = number_or(j, "transmission_arm1", 1.0);
    c.transmission_arm2 = number_or(j, "transmission_arm2", 1.0);
    c.dark_prob_per_gate = number_or(j, "dark_prob_per_gate", 0.0);
    c.jitter_sd_s = number_or(j, "jitter_sd_s", 0.0);
    if (j.contains("seed")) {
        const auto& s = j.at("seed");
        if (!s.is_number_integer() || s.get<double>() < 0.0)
            throw SchemaError(
                "experiment config: /seed must be a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    c.validate();
    return c;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["pulse_duration_s"] = pulse_duration_s;
    j["repetition_hz"] = repetition_hz;
    j["acquisition_s"] = acquisition_s;
    j["pair_rate_per_pulse"] = pair_rate_per_pulse;
    j["noise_rate_arm1"] = noise_rate_arm1;
    j["noise_rate_arm2"] = noise_rate_arm2;
    j["transmission_arm1"] = transmission_arm1;
    j["transmission_arm2"] = transmission_arm2;
    j["detector_efficiency"] = detector_efficiency;
    j["gate_duration_s"] = gate_duration_s;
    j["dark_prob_per_gate"] = dark_prob_per_gate;
    j["bin_width_s"] = bin_width_s;
    j["jitter_sd_s"] = jitter_sd_s;
    j["seed"] = seed;
    return j;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open experiment config: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("experiment config parse failure in " + path + ": " +
                          e.what());
    }
    return ExperimentConfig::from_json(j);
}

std::uint64_t CoincidenceHistogram::total_counts() const {
    std::uint64_t total = 0;
    for (const auto c : counts) total += c;
    return total;
}

CoincidenceHistogram simulate_coincidences(const ExperimentConfig& cfg,
                                           int threads) {
    cfg.validate();
    const GateModel model = build_gate_model(cfg);
    const std::uint64_t gates = cfg.gate_count();
    const std::uint64_t chunks = (gates + kChunkGates - 1) / kChunkGates;
    const auto n_bins = static_cast<std::size_t>(model.last_bin + 1);

    unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = static_cast<unsigned>(
        std::min<std::uint64_t>(workers, std::max<std::uint64_t>(chunks, 1)));

    std::vector<std::vector<std::uint64_t>> partial(
        workers, std::vector<std::uint64_t>(n_bins, 0));
    std::atomic<std::uint64_t> next_chunk{0};
    const auto worker = [&](unsigned id) {
        auto& local = partial[id];
        for (;;) {
            const std::uint64_t chunk = next_chunk.fetch_add(1);
            if (chunk >= chunks) return;
            Rng rng = Rng::for_stream(cfg.seed, chunk);
            const std::uint64_t begin = chunk * kChunkGates;
            const std::uint64_t end = std::min(begin + kChunkGates, gates);
            for (std::uint64_t g = begin; g < end; ++g)
                run_gate(model, rng, local);
        }
    };

    if (workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned id = 0; id < workers; ++id)
            pool.emplace_back(worker, id);
        for (auto& t : pool) t.join();
    }

    CoincidenceHistogram h;
    h.bin_width_s = cfg.bin_width_s;
    h.t_min_s = -(static_cast<double>(model.center_bin) + 0.5) * cfg.bin_width_s;
    h.counts.assign(n_bins, 0);
    for (const auto& local : partial)
        for (std::size_t i = 0; i < n_bins; ++i) h.counts[i] += local[i];
    h.total_gates = gates;
    h.config = cfg;
    return h;
}

HistogramAnalysis analyze_histogram(const CoincidenceHistogram& h) {
    if (h.counts.empty())
        throw RangeError("analyze_histogram: histogram has no bins");
    const std::size_t n = h.counts.size();
    const double bin = h.bin_width_s;

    const auto peak_it = std::max_element(h.counts.begin(), h.counts.end());
    const auto peak_idx =
        static_cast<std::size_t>(peak_it - h.counts.begin());
    const double peak_count = static_cast<double>(*peak_it);
    const double baseline = median_count(h.counts);
    const double half = baseline + 0.5 * (peak_count - baseline);

    HistogramAnalysis a;
    double left = h.t_min_s;
    double right = h.t_min_s + static_cast<double>(n) * bin;
    if (peak_count <= half) {
        // flat histogram: degenerate single-bin peak at the max
        left = h.bin_center_s(peak_idx) - 0.5 * bin;
        right = left + bin;
    } else {
        bool found = false;
        for (std::size_t i = peak_idx; i-- > 0;) {
            const auto y = static_cast<double>(h.counts[i]);
            if (y <= half) {
                const auto y_in = static_cast<double>(h.counts[i + 1]);
                left = h.bin_center_s(i) + (half - y) / (y_in - y) * bin;
                found = true;
                break;
            }
        }
        if (!found) left = h.t_min_s;
        found = false;
        for (std::size_t i = peak_idx + 1; i < n; ++i) {
            const auto y = static_cast<double>(h.counts[i]);
            if (y <= half) {
                const auto y_in = static_cast<double>(h.counts[i - 1]);
                right = h.bin_center_s(i) - (half - y) / (y_in - y) * bin;
                found = true;
                break;
            }
        }
        if (!found) right = h.t_min_s + static_cast<double>(n) * bin;
    }
    a.peak_position_s = 0.5 * (left + right);
    a.peak_fwhm_s = std::max(right - left, bin);

    const double window_half = 0.5 * a.peak_fwhm_s + 1e-9 * bin;
    const double exclusion = 3.0 * a.peak_fwhm_s;
    double window_sum = 0.0, bg_sum = 0.0;
    std::size_t window_bins = 0, bg_bins = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double offset = std::abs(h.bin_center_s(i) - a.peak_position_s);
        if (offset <= window_half) {
            window_sum += static_cast<double>(h.counts[i]);
            ++window_bins;
        } else if (offset > exclusion) {
            bg_sum += static_cast<double>(h.counts[i]);
            ++bg_bins;
        }
    }
    if (bg_bins == 0) {
        // exclusion swallowed everything; fall back to everything off-window
        for (std::size_t i = 0; i < n; ++i) {
            const double offset =
                std::abs(h.bin_center_s(i) - a.peak_position_s);
            if (offset > window_half) {
                bg_sum += static_cast<double>(h.counts[i]);
                ++bg_bins;
            }
        }
    }
    a.window_bins = window_bins;

    const double nw = static_cast<double>(window_bins);
    if (bg_bins > 0 && bg_sum > 0.0) {
        const double nb = static_cast<double>(bg_bins);
        const double bg_mean = bg_sum / nb;
        const double bg_mean_var = bg_sum / (nb * nb);
        a.background_per_window = bg_mean * nw;
        a.background_per_window_err = nw * std::sqrt(bg_mean_var);
        a.true_coincidences = window_sum - a.background_per_window;
        a.true_coincidences_err =
            std::sqrt(window_sum + nw * nw * bg_mean_var);
        a.snr = a.true_coincidences / a.background_per_window;
        // SNR = S/Bw - 1: var = S/Bw^2 + S^2 var(Bw)/Bw^4, var(Bw) = nw^2 var(Bmean)
        const double bw = a.background_per_window;
        const double var_bw = nw * nw * bg_mean_var;
        a.snr_err = std::sqrt(window_sum / (bw * bw) +
                              window_sum * window_sum * var_bw /
                                  (bw * bw * bw * bw));
    } else {
        // no background counts anywhere: report the lower bound that one
        // background count in the window would give
        a.saturated = true;
        a.background_per_window = 0.0;
        a.background_per_window_err = 1.0;
        a.true_coincidences = window_sum;
        a.true_coincidences_err = std::sqrt(std::max(window_sum, 1.0));
        a.snr = std::max(window_sum - 1.0, 0.0);
        a.snr_err = std::sqrt(std::max(window_sum, 1.0));
    }
    return a;
}

WernerEstimate werner_fidelity(double snr) {
    if (!(snr >= 0.0))
        throw RangeError("werner_fidelity: SNR must be >= 0");
    WernerEstimate w;
    w.snr = snr;
    w.P = snr / (2.0 + snr);
    w.fidelity = 0.25 * (1.0 + 3.0 * w.P);
    return w;
}

void save_histogram_csv(const CoincidenceHistogram& h, const std::string& path) {
    CsvWriter csv({"bin_start_s", "count"});
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        csv.add_row({h.bin_start_s(i), static_cast<double>(h.counts[i])});
    csv.write(path);

    nlohmann::ordered_json meta;
    meta["bin_width_s"] = h.bin_width_s;
    meta["t_min_s"] = h.t_min_s;
    meta["total_gates"] = h.total_gates;
    meta["config"] = h.config.to_json();
    std::ofstream f(path + ".meta.json", std::ios::binary);
    if (!f) throw SchemaError("cannot open output file: " + path + ".meta.json");
    f << meta.dump(2) << '\n';
}

CoincidenceHistogram load_histogram_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto start_col = static_cast<std::size_t>(t.column("bin_start_s"));
    const auto count_col = static_cast<std::size_t>(t.column("count"));
    if (t.rows.empty()) throw SchemaError("histogram csv has no rows: " + path);

    CoincidenceHistogram h;
    h.counts.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        const double c = row[count_col];
        if (c < 0.0 || c != std::floor(c))
            throw SchemaError("histogram csv count must be a non-negative "
                              "integer: " + path);
        h.counts.push_back(static_cast<std::uint64_t>(c));
    }
    h.t_min_s = t.rows.front()[start_col];
    if (t.rows.size() > 1)
        h.bin_width_s = (t.rows.back()[start_col] - h.t_min_s) /
                        static_cast<double>(t.rows.size() - 1);

    std::ifstream f(path + ".meta.json");
    if (f) {
        nlohmann::json meta;
        try {
            f >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("histogram sidecar parse failure in " + path +
                              ".meta.json: " + e.what());
        }
        if (meta.contains("bin_width_s"))
            h.bin_width_s = meta.at("bin_width_s").get<double>();
        if (meta.contains("t_min_s"))
            h.t_min_s = meta.at("t_min_s").get<double>();
        if (meta.contains("total_gates"))
            h.total_gates = meta.at("total_gates").get<std::uint64_t>();
        if (meta.contains("config"))
            h.config = ExperimentConfig::from_json(meta.at("config"));
    }
    if (!(h.bin_width_s > 0.0))
        throw SchemaError(
            "histogram csv: cannot determine bin width (single row and no "
            "sidecar): " + path);
    return h;
}

}  // namespace pairforge
