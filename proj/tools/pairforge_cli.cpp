// pairforge: command-line front end tying the waveguide, phase-matching,
// diode, and coincidence modules into reproducible CSV/JSON workflows.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pairforge/counting.hpp"
#include "pairforge/csv.hpp"
#include "pairforge/errors.hpp"
#include "pairforge/lasermodel.hpp"
#include "pairforge/layerstack.hpp"
#include "pairforge/manifest.hpp"
#include "pairforge/materials.hpp"
#include "pairforge/modesolver.hpp"
#include "pairforge/nonlinear.hpp"

namespace {

using namespace pairforge;
using nlohmann::ordered_json;

constexpr double kZeroC_K = 273.15;

// Data-file search order: explicit path as given, then $PAIRFORGE_DATA,
// then ./data, then the source-tree data directory compiled in at build time.
std::string find_data_file(const std::string& name) {
    namespace fs = std::filesystem;
    if (fs::exists(name)) return name;
    if (!fs::path(name).is_absolute()) {
        if (const char* env = std::getenv("PAIRFORGE_DATA")) {
            const auto p = fs::path(env) / name;
            if (fs::exists(p)) return p.string();
        }
        const auto local = fs::path("data") / name;
        if (fs::exists(local)) return local.string();
        const auto bundled = fs::path(PAIRFORGE_SOURCE_DATA_DIR) / name;
        if (fs::exists(bundled)) return bundled.string();
    }
    throw SchemaError("cannot find data file: " + name);
}

std::string resolve_table_path(const std::string& flag) {
    return find_data_file(flag.empty() ? "algaas_mseo.json" : flag);
}

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Tabular output: CSV (default) or a JSON array of row objects. Cells are
// pre-built JSON values so string columns work in both formats.
void write_table(const std::string& path, const std::string& format,
                 const std::vector<std::string>& columns,
                 const std::vector<std::vector<ordered_json>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot open output file: " + path);
    if (format == "json") {
        ordered_json arr = ordered_json::array();
        for (const auto& row : rows) {
            ordered_json obj;
            for (std::size_t i = 0; i < columns.size(); ++i)
                obj[columns[i]] = row[i];
            arr.push_back(std::move(obj));
        }
        f << arr.dump(2) << '\n';
        return;
    }
    for (std::size_t i = 0; i < columns.size(); ++i)
        f << (i ? "," : "") << columns[i];
    f << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ',';
            if (row[i].is_string())
                f << row[i].get<std::string>();
            else if (row[i].is_number_float())
                f << fmt_num(row[i].get<double>());
            else
                f << row[i].dump();
        }
        f << '\n';
    }
}

// Key/value output: JSON object (default) or two-column CSV.
void write_kv(const std::string& path, const std::string& format,
              const ordered_json& obj) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot open output file: " + path);
    if (format == "csv") {
        f << "key,value\n";
        for (const auto& [key, value] : obj.items()) {
            f << key << ',';
            if (value.is_string())
                f << value.get<std::string>();
            else if (value.is_number_float())
                f << fmt_num(value.get<double>());
            else
                f << value.dump();
            f << '\n';
        }
        return;
    }
    f << obj.dump(2) << '\n';
}

struct RunRecorder {
    RunManifest manifest;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    explicit RunRecorder(int argc, char** argv) {
        for (int i = 0; i < argc; ++i) {
            if (i) manifest.command += ' ';
            manifest.command += argv[i];
        }
    }

    // Writes <primary output>.manifest.json when the command produced files.
    void finish() {
        if (manifest.outputs.empty()) return;
        manifest.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        manifest.write(manifest.outputs.front() + ".manifest.json");
    }
};

std::uint64_t pick_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

LayerStack load_device(const std::string& flag, double temp_C,
                       bool temp_given) {
    LayerStack stack = load_stack(find_data_file(flag));
    if (temp_given) stack.temperature_K = temp_C + kZeroC_K;
    return stack;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) /
                        static_cast<double>(n - 1);
    return v;
}

// ---- subcommand bodies ----------------------------------------------------

struct ModesArgs {
    std::string device, table, out, format = "csv";
    double wavelength_nm = 1570.0;
    double temp_C = 0.0;
    bool temp_given = false;
};

void run_modes(const ModesArgs& a, RunRecorder& rec) {
    const std::string device_path = find_data_file(a.device);
    const std::string table_path = resolve_table_path(a.table);
    LayerStack stack = load_device(a.device, a.temp_C, a.temp_given);
    const auto table = DispersionTable::load(table_path);

    std::vector<std::vector<ordered_json>> rows;
    for (const auto pol : {Polarization::TE, Polarization::TM}) {
        for (const auto& m : find_modes(stack, table, a.wavelength_nm, pol)) {
            rows.push_back({to_string(m.pol), to_string(m.family), m.order,
                            m.wavelength_nm, m.n_eff.real(), m.n_eff.imag(),
                            m.n_g, m.alpha_cm1, m.confinement_core});
            std::printf(
                "%s %s order=%d n_eff=%.6f%+.3ei n_g=%.4f alpha_cm1=%.4f "
                "confinement=%.4f\n",
                to_string(m.pol), to_string(m.family), m.order, m.n_eff.real(),
                m.n_eff.imag(), m.n_g, m.alpha_cm1, m.confinement_core);
        }
    }
    std::printf("modes = %zu\n", rows.size());
    if (!a.out.empty()) {
        write_table(a.out, a.format,
                    {"polarization", "family", "order", "wavelength_nm",
                     "n_eff_re", "n_eff_im", "n_g", "alpha_cm1",
                     "confinement_core"},
                    rows);
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(device_path);
        rec.manifest.add_input(table_path);
        rec.manifest.config_snapshot = {
            {"device", device_path},
            {"table", table_path},
            {"wavelength_nm", a.wavelength_nm},
            {"temperature_K", stack.temperature_K}};
    }
}

struct TuneArgs {
    std::string device, table, out, format = "csv";
    double temp_C = 0.0;
    bool temp_given = false;
    double pump_lo_nm = 782.0, pump_hi_nm = 786.0, pump_step_nm = 0.25;
};

void run_tune(const TuneArgs& a, RunRecorder& rec) {
    const std::string device_path = find_data_file(a.device);
    const std::string table_path = resolve_table_path(a.table);
    const LayerStack stack = load_stack(device_path);
    const auto table = DispersionTable::load(table_path);
    const double T =
        a.temp_given ? a.temp_C + kZeroC_K : stack.temperature_K;

    std::vector<double> pumps;
    for (double p = a.pump_lo_nm; p <= a.pump_hi_nm + 1e-9;
         p += a.pump_step_nm)
        pumps.push_back(p);
    const TuningCurve curve = tuning_curves(stack, table, T, pumps);

    std::vector<std::vector<ordered_json>> rows;
    for (const auto& pt : curve.points)
        rows.push_back({pt.temperature_K, pt.pump_nm, pt.signal_nm,
                        pt.idler_nm, pt.delta_k_rad_cm});
    if (curve.has_degeneracy()) {
        std::printf("degeneracy_pump_nm = %.6f\n", curve.degeneracy_pump_nm);
        std::printf("degeneracy_pair_nm = %.6f\n",
                    2.0 * curve.degeneracy_pump_nm);
    }
    std::printf("points = %zu\n", curve.points.size());
    std::printf("warnings = %zu\n", curve.warnings.size());

    if (!a.out.empty()) {
        write_table(a.out, a.format,
                    {"temperature_K", "lambda_p_nm", "lambda_s_nm",
                     "lambda_i_nm", "delta_k_rad_cm"},
                    rows);
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(device_path);
        rec.manifest.add_input(table_path);
        rec.manifest.config_snapshot = {{"device", device_path},
                                        {"table", table_path},
                                        {"temperature_K", T},
                                        {"pump_lo_nm", a.pump_lo_nm},
                                        {"pump_hi_nm", a.pump_hi_nm},
                                        {"pump_step_nm", a.pump_step_nm}};
    }
}

struct ShgArgs {
    std::string device, table, out, format = "csv";
    double temp_C = 0.0;
    bool temp_given = false;
    double eta_pct = 35.0;
    double span_nm = 3.0, step_nm = 0.005;
    double pump_lo_nm = 782.0, pump_hi_nm = 789.0;
};

void run_shg(const ShgArgs& a, RunRecorder& rec) {
    const std::string device_path = find_data_file(a.device);
    const std::string table_path = resolve_table_path(a.table);
    const LayerStack stack = load_stack(device_path);
    const auto table = DispersionTable::load(table_path);
    const double T =
        a.temp_given ? a.temp_C + kZeroC_K : stack.temperature_K;

    const ShgModel model = shg_model_from_stack(
        stack, table, T, a.eta_pct, a.pump_lo_nm, a.pump_hi_nm);
    std::vector<double> grid;
    for (double l = model.center_nm - 0.5 * a.span_nm;
         l <= model.center_nm + 0.5 * a.span_nm + 1e-9; l += a.step_nm)
        grid.push_back(l);
    const auto power = shg_spectrum(model, grid);

    std::printf("center_nm = %.6f\n", model.center_nm);
    std::printf("fwhm_nm = %.6f\n", model.fwhm_nm);
    std::printf("eta_pct_per_W_cm2 = %.6g\n", model.eta_pct_per_W_cm2);
    std::printf("length_cm = %.6g\n", model.length_cm);

    if (!a.out.empty()) {
        std::vector<std::vector<ordered_json>> rows;
        for (std::size_t i = 0; i < grid.size(); ++i)
            rows.push_back({grid[i], power[i]});
        write_table(a.out, a.format, {"lambda_nm", "p_sh_W"}, rows);
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(device_path);
        rec.manifest.add_input(table_path);
        rec.manifest.config_snapshot = {{"device", device_path},
                                        {"table", table_path},
                                        {"temperature_K", T},
                                        {"eta_pct_per_W_cm2", a.eta_pct},
                                        {"center_nm", model.center_nm},
                                        {"fwhm_nm", model.fwhm_nm}};
    }
}

struct FitShgArgs {
    std::string in, out, format = "json";
    double length_cm = 0.0, power_W = 1.0;
    double r_te = 0.0, r_tm = 0.0, r_sh = 0.0;
    double alpha_te = 0.0, alpha_tm = 0.0, alpha_sh = 0.0;
    double ng_te = 3.3, ng_tm = 3.3, ng_sh = 3.3;
};

void run_fitshg(const FitShgArgs& a, RunRecorder& rec) {
    const CsvTable t = read_csv(a.in);
    const auto lc = static_cast<std::size_t>(t.column("lambda_nm"));
    const auto pc = static_cast<std::size_t>(t.column("p_sh_W"));
    std::vector<double> lambda, power;
    for (const auto& row : t.rows) {
        lambda.push_back(row[lc]);
        power.push_back(row[pc]);
    }

    ShgFitConfig cfg;
    cfg.length_cm = a.length_cm;
    cfg.fundamental_power_W = a.power_W;
    cfg.R_fund_te = a.r_te;
    cfg.R_fund_tm = a.r_tm;
    cfg.R_sh = a.r_sh;
    cfg.alpha_fund_te_cm1 = a.alpha_te;
    cfg.alpha_fund_tm_cm1 = a.alpha_tm;
    cfg.alpha_sh_cm1 = a.alpha_sh;
    cfg.ng_fund_te = a.ng_te;
    cfg.ng_fund_tm = a.ng_tm;
    cfg.ng_sh = a.ng_sh;
    const ShgFit fit = fit_shg(lambda, power, cfg);

    ordered_json result = {{"eta_pct_per_W_cm2", fit.model.eta_pct_per_W_cm2},
                           {"center_nm", fit.model.center_nm},
                           {"fwhm_nm", fit.model.fwhm_nm},
                           {"residual_norm", fit.residual_norm},
                           {"converged", fit.converged},
                           {"degenerate", fit.degenerate},
                           {"iterations", fit.iterations}};
    std::printf("eta_pct_per_W_cm2 = %.6g\n", fit.model.eta_pct_per_W_cm2);
    std::printf("center_nm = %.6f\n", fit.model.center_nm);
    std::printf("fwhm_nm = %.6f\n", fit.model.fwhm_nm);
    std::printf("residual_norm = %.6g\n", fit.residual_norm);
    std::printf("converged = %d\n", fit.converged ? 1 : 0);

    if (!a.out.empty()) {
        write_kv(a.out, a.format, result);
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(a.in);
        rec.manifest.config_snapshot = {{"in", a.in},
                                        {"length_cm", a.length_cm},
                                        {"fundamental_power_W", a.power_W}};
    }
}

struct LossArgs {
    std::string in, out, format = "json";
    double facet_r = 0.0, length_mm = 0.0;
};

void run_loss(const LossArgs& a, RunRecorder& rec) {
    const CsvTable t = read_csv(a.in);
    const auto lc = static_cast<std::size_t>(t.column("wavelength_nm"));
    const auto tc = static_cast<std::size_t>(t.column("transmission"));
    std::vector<double> lambda, trans;
    for (const auto& row : t.rows) {
        lambda.push_back(row[lc]);
        trans.push_back(row[tc]);
    }
    const LossExtraction e =
        extract_loss_fp(lambda, trans, a.facet_r, a.length_mm / 10.0);

    std::printf("alpha_cm1 = %.6f\n", e.alpha_cm1);
    std::printf("alpha_std_cm1 = %.6f\n", e.alpha_std_cm1);
    std::printf("fringe_count = %d\n", e.fringe_count);
    if (!a.out.empty()) {
        write_kv(a.out, a.format,
                 {{"alpha_cm1", e.alpha_cm1},
                  {"alpha_std_cm1", e.alpha_std_cm1},
                  {"fringe_count", e.fringe_count}});
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(a.in);
        rec.manifest.config_snapshot = {{"in", a.in},
                                        {"facet_R", a.facet_r},
                                        {"length_mm", a.length_mm}};
    }
}

struct OperateArgs {
    std::string device, table, out, format = "csv";
    double current_A = 0.7;
    double temp_lo_C = 15.0, temp_hi_C = 40.0, step_C = 1.0;
    double eta_pct = 35.0;
    double spdc_bandwidth_nm = 10.0;
    double pump_lo_nm = 782.0, pump_hi_nm = 789.0;
};

void run_operate(const OperateArgs& a, RunRecorder& rec) {
    const std::string device_path = find_data_file(a.device);
    const std::string table_path = resolve_table_path(a.table);
    const LayerStack stack = load_stack(device_path);
    const auto table = DispersionTable::load(table_path);
    const DiodeParams diode = DiodeParams::from_stack(stack);

    // phase-matching pair line over the sweep range
    const auto fit = pm_center_vs_temperature(
        stack, table, linspace(a.temp_lo_C + kZeroC_K, a.temp_hi_C + kZeroC_K, 6),
        a.pump_lo_nm, a.pump_hi_nm);
    const TuningLine pm_line{fit.slope_nm_per_K, fit.intercept_nm};

    // SHG acceptance width at the middle of the range sets the window
    const double T_mid = 0.5 * (a.temp_lo_C + a.temp_hi_C) + kZeroC_K;
    const ShgModel shg = shg_model_from_stack(stack, table, T_mid, a.eta_pct,
                                              a.pump_lo_nm, a.pump_hi_nm);

    // laser line mapped into pair space (twice the pump wavelength)
    const TuningLine laser = laser_line(diode);
    const TuningLine laser_pair{2.0 * laser.slope_nm_per_K,
                                2.0 * laser.intercept_nm};
    const OperatingWindow window =
        operating_window(laser_pair, pm_line, shg.fwhm_nm);

    const LivPoint pt = liv(diode, a.current_A);
    const double j_th = threshold_current_density(
        diode.threshold_A, stack.ridge.width_um, stack.ridge.length_mm);

    std::printf("pm_slope_nm_per_K = %.6f\n", fit.slope_nm_per_K);
    std::printf("shg_fwhm_nm = %.6f\n", shg.fwhm_nm);
    std::printf("crossing_T_K = %.4f\n", window.crossing_T_K);
    std::printf("window_half_width_K = %.4f\n", window.half_width_K);
    std::printf("window_T_min_K = %.4f\n", window.T_min_K);
    std::printf("window_T_max_K = %.4f\n", window.T_max_K);
    std::printf("voltage_V = %.4f\n", pt.voltage_V);
    std::printf("power_out_mW = %.4f\n", pt.power_out_mW);
    std::printf("power_int_mW = %.4f\n", pt.power_int_mW);
    std::printf("threshold_kA_cm2 = %.4f\n", j_th);

    ordered_json snapshot = {{"device", device_path},
                             {"table", table_path},
                             {"current_A", a.current_A},
                             {"temp_lo_C", a.temp_lo_C},
                             {"temp_hi_C", a.temp_hi_C},
                             {"eta_pct_per_W_cm2", a.eta_pct},
                             {"spdc_bandwidth_nm", a.spdc_bandwidth_nm}};

    if (a.current_A > diode.threshold_A) {
        const double pump_nm = laser.at(window.crossing_T_K);
        const double pair_nm = 2.0 * pump_nm;
        const double prob = spdc_pair_probability(
            a.eta_pct, stack.ridge.length_mm / 10.0, pump_nm,
            spectral_bandwidth_hz(a.spdc_bandwidth_nm, pair_nm));
        const PairBudget budget =
            pairs_per_electron(diode, a.current_A, prob, pump_nm);
        std::printf("photons_per_electron = %.6g\n",
                    budget.photons_per_electron);
        std::printf("pair_probability = %.6g\n", budget.pair_probability);
        std::printf("pairs_per_electron = %.6g\n", budget.pairs_per_electron);
        std::printf("pairs_per_pulse = %.6g\n", budget.pairs_per_pulse);
    } else {
        std::printf("pairs_per_electron = 0 (current below threshold)\n");
    }

    if (!a.out.empty()) {
        std::vector<std::vector<ordered_json>> rows;
        for (double c = a.temp_lo_C; c <= a.temp_hi_C + 1e-9; c += a.step_C) {
            const double T = c + kZeroC_K;
            const double l_laser = laser_pair.at(T);
            const double l_pm = pm_line.at(T);
            rows.push_back({T, l_laser, l_pm, l_laser - l_pm,
                            std::abs(l_laser - l_pm) <= 0.5 * shg.fwhm_nm ? 1
                                                                          : 0});
        }
        write_table(a.out, a.format,
                    {"temperature_K", "lambda_laser_pair_nm",
                     "lambda_pm_center_nm", "detuning_nm", "in_window"},
                    rows);
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(device_path);
        rec.manifest.add_input(table_path);
        rec.manifest.config_snapshot = std::move(snapshot);
    }
}

struct CoincideArgs {
    std::string config, out;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
};

void run_coincide(const CoincideArgs& a, RunRecorder& rec) {
    const std::string config_path = find_data_file(a.config);
    ExperimentConfig cfg = load_experiment_config(config_path);
    bool config_has_seed = false;
    {
        std::ifstream f(config_path);
        nlohmann::json j;
        f >> j;
        config_has_seed = j.contains("seed");
    }
    if (a.seed_given)
        cfg.seed = a.seed;
    else if (!config_has_seed)
        cfg.seed = pick_seed();
    std::printf("seed = %llu\n", static_cast<unsigned long long>(cfg.seed));

    const CoincidenceHistogram h = simulate_coincidences(cfg, a.threads);
    std::printf("gates = %llu\n",
                static_cast<unsigned long long>(h.total_gates));
    std::printf("coincidences = %llu\n",
                static_cast<unsigned long long>(h.total_counts()));
    save_histogram_csv(h, a.out);
    std::printf("out = %s\n", a.out.c_str());

    rec.manifest.outputs.push_back(a.out);
    rec.manifest.outputs.push_back(a.out + ".meta.json");
    rec.manifest.add_input(config_path);
    rec.manifest.has_seed = true;
    rec.manifest.seed = cfg.seed;
    rec.manifest.config_snapshot = cfg.to_json();
}

struct AnalyzeArgs {
    std::string in, out, format = "json";
};

void run_analyze(const AnalyzeArgs& a, RunRecorder& rec) {
    const CoincidenceHistogram h = load_histogram_csv(a.in);
    const HistogramAnalysis r = analyze_histogram(h);
    const WernerEstimate w = werner_fidelity(std::max(r.snr, 0.0));

    std::printf("peak_position_ns = %.4f\n", r.peak_position_s * 1e9);
    std::printf("peak_fwhm_ns = %.4f\n", r.peak_fwhm_s * 1e9);
    std::printf("true_coincidences = %.2f\n", r.true_coincidences);
    std::printf("background_per_window = %.2f\n", r.background_per_window);
    std::printf("window_bins = %zu\n", r.window_bins);
    std::printf("snr = %.4f\n", r.snr);
    std::printf("snr_err = %.4f\n", r.snr_err);
    std::printf("saturated = %d\n", r.saturated ? 1 : 0);
    std::printf("P = %.5f\n", w.P);
    std::printf("F = %.5f\n", w.fidelity);

    if (!a.out.empty()) {
        write_kv(a.out, a.format,
                 {{"peak_position_s", r.peak_position_s},
                  {"peak_fwhm_s", r.peak_fwhm_s},
                  {"true_coincidences", r.true_coincidences},
                  {"true_coincidences_err", r.true_coincidences_err},
                  {"background_per_window", r.background_per_window},
                  {"background_per_window_err", r.background_per_window_err},
                  {"window_bins", r.window_bins},
                  {"snr", r.snr},
                  {"snr_err", r.snr_err},
                  {"saturated", r.saturated},
                  {"werner_P", w.P},
                  {"werner_fidelity", w.fidelity}});
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.add_input(a.in);
        rec.manifest.config_snapshot = {{"in", a.in}};
    }
}

struct FidelityArgs {
    std::string out, format = "json";
    double snr = 0.0;
};

void run_fidelity(const FidelityArgs& a, RunRecorder& rec) {
    const WernerEstimate w = werner_fidelity(a.snr);
    std::printf("SNR = %.6g\n", w.snr);
    std::printf("P = %.5f\n", w.P);
    std::printf("F = %.5f\n", w.fidelity);
    if (!a.out.empty()) {
        write_kv(a.out, a.format,
                 {{"snr", w.snr}, {"P", w.P}, {"fidelity", w.fidelity}});
        rec.manifest.outputs.push_back(a.out);
        rec.manifest.config_snapshot = {{"snr", a.snr}};
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairforge: electrically injected photon-pair source toolkit"};
    app.require_subcommand(1);

    ModesArgs modes_a;
    auto* modes_c = app.add_subcommand(
        "modes", "Guided/Bragg modes of a device at one wavelength");
    modes_c->add_option("--device", modes_a.device, "device layer-stack JSON")
        ->required();
    modes_c->add_option("--table", modes_a.table, "dispersion table JSON");
    modes_c->add_option("--wavelength-nm", modes_a.wavelength_nm,
                        "vacuum wavelength [nm]");
    auto* modes_t =
        modes_c->add_option("--temp-C", modes_a.temp_C, "temperature [C]");
    modes_c->add_option("--out", modes_a.out, "output table path");
    modes_c->add_option("--format", modes_a.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));

    TuneArgs tune_a;
    auto* tune_c = app.add_subcommand(
        "tune", "Type-II phase-matching tuning curve at one temperature");
    tune_c->add_option("--device", tune_a.device)->required();
    tune_c->add_option("--table", tune_a.table);
    auto* tune_t = tune_c->add_option("--temp-C", tune_a.temp_C);
    tune_c->add_option("--pump-lo-nm", tune_a.pump_lo_nm);
    tune_c->add_option("--pump-hi-nm", tune_a.pump_hi_nm);
    tune_c->add_option("--pump-step-nm", tune_a.pump_step_nm);
    tune_c->add_option("--out", tune_a.out);
    tune_c->add_option("--format", tune_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    ShgArgs shg_a;
    auto* shg_c =
        app.add_subcommand("shg", "SHG spectrum of a device (sinc^2 x Airy)");
    shg_c->add_option("--device", shg_a.device)->required();
    shg_c->add_option("--table", shg_a.table);
    auto* shg_t = shg_c->add_option("--temp-C", shg_a.temp_C);
    shg_c->add_option("--eta-pct", shg_a.eta_pct,
                      "normalized efficiency [%/(W cm^2)]");
    shg_c->add_option("--span-nm", shg_a.span_nm);
    shg_c->add_option("--step-nm", shg_a.step_nm);
    shg_c->add_option("--out", shg_a.out);
    shg_c->add_option("--format", shg_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    FitShgArgs fit_a;
    auto* fit_c = app.add_subcommand(
        "fitshg", "Fit (eta, center, FWHM) to a measured SHG spectrum");
    fit_c->add_option("--in", fit_a.in, "CSV with lambda_nm,p_sh_W")
        ->required();
    fit_c->add_option("--length-cm", fit_a.length_cm)->required();
    fit_c->add_option("--power-w", fit_a.power_W);
    fit_c->add_option("--r-te", fit_a.r_te);
    fit_c->add_option("--r-tm", fit_a.r_tm);
    fit_c->add_option("--r-sh", fit_a.r_sh);
    fit_c->add_option("--alpha-te", fit_a.alpha_te);
    fit_c->add_option("--alpha-tm", fit_a.alpha_tm);
    fit_c->add_option("--alpha-sh", fit_a.alpha_sh);
    fit_c->add_option("--ng-te", fit_a.ng_te);
    fit_c->add_option("--ng-tm", fit_a.ng_tm);
    fit_c->add_option("--ng-sh", fit_a.ng_sh);
    fit_c->add_option("--out", fit_a.out);
    fit_c->add_option("--format", fit_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    LossArgs loss_a;
    auto* loss_c = app.add_subcommand(
        "loss", "Fabry-Perot fringe-contrast loss extraction");
    loss_c->add_option("--in", loss_a.in, "CSV with wavelength_nm,transmission")
        ->required();
    loss_c->add_option("--facet-r", loss_a.facet_r)->required();
    loss_c->add_option("--length-mm", loss_a.length_mm)->required();
    loss_c->add_option("--out", loss_a.out);
    loss_c->add_option("--format", loss_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    OperateArgs op_a;
    auto* op_c = app.add_subcommand(
        "operate", "Laser/phase-matching operating point and pair budget");
    op_c->add_option("--device", op_a.device)->required();
    op_c->add_option("--table", op_a.table);
    op_c->add_option("--current-a", op_a.current_A);
    op_c->add_option("--temp-lo-c", op_a.temp_lo_C);
    op_c->add_option("--temp-hi-c", op_a.temp_hi_C);
    op_c->add_option("--step-c", op_a.step_C);
    op_c->add_option("--eta-pct", op_a.eta_pct);
    op_c->add_option("--spdc-bandwidth-nm", op_a.spdc_bandwidth_nm);
    op_c->add_option("--out", op_a.out);
    op_c->add_option("--format", op_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    CoincideArgs co_a;
    auto* co_c = app.add_subcommand(
        "coincide", "Monte-Carlo gated coincidence histogram");
    co_c->add_option("--config", co_a.config, "experiment config JSON")
        ->required();
    auto* co_seed = co_c->add_option("--seed", co_a.seed);
    co_c->add_option("--threads", co_a.threads, "worker cap (0 = hardware)");
    co_c->add_option("--out", co_a.out, "histogram CSV path")->required();

    AnalyzeArgs an_a;
    auto* an_c = app.add_subcommand(
        "analyze", "Histogram peak/SNR analysis and Werner fidelity");
    an_c->add_option("--in", an_a.in, "histogram CSV (meta sidecar optional)")
        ->required();
    an_c->add_option("--out", an_a.out);
    an_c->add_option("--format", an_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    FidelityArgs fi_a;
    auto* fi_c = app.add_subcommand(
        "fidelity", "Werner-state parameters from a coincidence SNR");
    fi_c->add_option("--snr", fi_a.snr)->required();
    fi_c->add_option("--out", fi_a.out);
    fi_c->add_option("--format", fi_a.format)
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 2;
    }

    RunRecorder rec(argc, argv);
    try {
        modes_a.temp_given = modes_t->count() > 0;
        tune_a.temp_given = tune_t->count() > 0;
        shg_a.temp_given = shg_t->count() > 0;
        co_a.seed_given = co_seed->count() > 0;
        if (modes_c->parsed()) run_modes(modes_a, rec);
        if (tune_c->parsed()) run_tune(tune_a, rec);
        if (shg_c->parsed()) run_shg(shg_a, rec);
        if (fit_c->parsed()) run_fitshg(fit_a, rec);
        if (loss_c->parsed()) run_loss(loss_a, rec);
        if (op_c->parsed()) run_operate(op_a, rec);
        if (co_c->parsed()) run_coincide(co_a, rec);
        if (an_c->parsed()) run_analyze(an_a, rec);
        if (fi_c->parsed()) run_fidelity(fi_a, rec);
        rec.finish();
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "error: schema: %s\n", e.what());
        return 3;
    } catch (const RangeError& e) {
        std::fprintf(stderr, "error: range: %s\n", e.what());
        return 3;
    } catch (const SolveError& e) {
        std::fprintf(stderr, "error: solver: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
