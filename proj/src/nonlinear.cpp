#include "pairforge/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "pairforge/constants.hpp"
#include "pairforge/errors.hpp"
#include "pairforge/numerics.hpp"

namespace pairforge {

namespace {

// Half-width of sinc^2(x) at half maximum: sinc^2(1.39156) = 1/2, so the
// full width in dk*L/2 is 2*1.39156 and dk_fwhm * L = 5.56623.
constexpr double kSincFwhmDkL = 5.566238;

std::string fmt_nm(double v) {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << v;
    return os.str();
}

void check_curve_range(const DispersionCurve& c, double lambda_nm,
                       const char* role) {
    if (c.wavelength_nm.empty())
        throw RangeError(std::string(role) + " dispersion curve is empty");
    if (lambda_nm < c.min_wavelength_nm() || lambda_nm > c.max_wavelength_nm()) {
        throw RangeError(std::string(role) + " wavelength " + fmt_nm(lambda_nm) +
                         " nm outside curve range [" +
                         fmt_nm(c.min_wavelength_nm()) + ", " +
                         fmt_nm(c.max_wavelength_nm()) + "] nm");
    }
}

double mean_step(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    return (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> xs(n);
    if (n == 1) {
        xs[0] = lo;
        return xs;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        xs[i] = lo + step * static_cast<double>(i);
    xs.back() = hi;
    return xs;
}

std::vector<double> grid_by_step(double lo, double hi, double step) {
    const auto n = static_cast<std::size_t>(
        std::max(1.0, std::ceil((hi - lo) / step))) + 1;
    return linspace(lo, hi, n);
}

// Linear regression y = a + b x; returns {intercept, slope}.
std::pair<double, double> linear_fit(const std::vector<double>& xs,
                                     const std::vector<double>& ys) {
    const auto n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) throw SolveError("degenerate regression grid");
    const double slope = (n * sxy - sx * sy) / denom;
    return {(sy - slope * sx) / n, slope};
}

// Fabry-Perot enhancement factor, normalized to 1 when R = 0.
double airy_factor(double R, double alpha_cm1, double length_cm,
                   double group_index, double phase0, double lambda_nm) {
    if (R <= 0.0) return 1.0;
    const double x = R * std::exp(-alpha_cm1 * length_cm);
    const double phi = phase0 + 2.0 * constants::pi * group_index *
                                    (length_cm * 1e7) / lambda_nm;
    const double s = std::sin(phi);
    const double denom = (1.0 - x) * (1.0 - x) + 4.0 * x * s * s;
    return (1.0 - R) * (1.0 - R) / denom;
}

void validate_shg_model(const ShgModel& m) {
    if (m.R_fund_te >= 1.0 || m.R_fund_tm >= 1.0 || m.R_sh >= 1.0)
        throw SchemaError("shg model: facet reflectivity must be < 1");
    if (m.R_fund_te < 0.0 || m.R_fund_tm < 0.0 || m.R_sh < 0.0)
        throw SchemaError("shg model: facet reflectivity must be >= 0");
    if (!(m.length_cm > 0.0)) throw SchemaError("shg model: length_cm must be > 0");
    if (!(m.fwhm_nm > 0.0)) throw SchemaError("shg model: fwhm_nm must be > 0");
    if (!(m.center_nm > 0.0)) throw SchemaError("shg model: center_nm must be > 0");
    if (m.eta_pct_per_W_cm2 < 0.0)
        throw SchemaError("shg model: efficiency must be >= 0");
    if (m.fundamental_power_W < 0.0)
        throw SchemaError("shg model: fundamental power must be >= 0");
}

double shg_power_at(const ShgModel& m, double lambda_nm) {
    const double dk = kSincFwhmDkL * (lambda_nm - m.center_nm) /
                      (m.length_cm * m.fwhm_nm);
    const double a =
        0.5 * (m.alpha_fund_te_cm1 + m.alpha_fund_tm_cm1 - m.alpha_sh_cm1);
    const std::complex<double> s(-a, dk);
    double envelope;  // |integral_0^L exp(s z) dz|^2
    if (std::abs(s) * m.length_cm < 1e-9) {
        envelope = m.length_cm * m.length_cm;
    } else {
        envelope = std::norm(std::exp(s * m.length_cm) - 1.0) / std::norm(s);
    }
    const double sh_atten = std::exp(-m.alpha_sh_cm1 * m.length_cm);
    const double cavity =
        airy_factor(m.R_fund_te, m.alpha_fund_te_cm1, m.length_cm, m.ng_fund_te,
                    m.phase_fund_te, lambda_nm) *
        airy_factor(m.R_fund_tm, m.alpha_fund_tm_cm1, m.length_cm, m.ng_fund_tm,
                    m.phase_fund_tm, lambda_nm) *
        airy_factor(m.R_sh, m.alpha_sh_cm1, m.length_cm, m.ng_sh, m.phase_sh,
                    0.5 * lambda_nm);
    const double p2 = m.fundamental_power_W * m.fundamental_power_W;
    return (m.eta_pct_per_W_cm2 / 100.0) * p2 * sh_atten * envelope * cavity;
}

// Moving average with an odd window, reflecting at the ends.
std::vector<double> smooth(const std::vector<double>& ys, int half) {
    if (half <= 0) return ys;
    const auto n = static_cast<int>(ys.size());
    std::vector<double> out(ys.size());
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        int cnt = 0;
        for (int j = i - half; j <= i + half; ++j) {
            int k = j;
            if (k < 0) k = -k;
            if (k >= n) k = 2 * (n - 1) - k;
            s += ys[static_cast<std::size_t>(k)];
            ++cnt;
        }
        out[static_cast<std::size_t>(i)] = s / cnt;
    }
    return out;
}

struct Extremum {
    bool is_max = false;
    double value = 0.0;
};

// Alternating parabolic-refined extrema of a sampled fringe pattern.
std::vector<Extremum> find_extrema(const std::vector<double>& ys) {
    std::vector<Extremum> out;
    const std::size_t n = ys.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double y0 = ys[i - 1], y1 = ys[i], y2 = ys[i + 1];
        const bool is_max = y1 > y0 && y1 >= y2;
        const bool is_min = y1 < y0 && y1 <= y2;
        if (!is_max && !is_min) continue;
        double value = y1;
        const double denom = y0 - 2.0 * y1 + y2;
        if (std::abs(denom) > 1e-300) {
            const double delta = 0.5 * (y0 - y2) / denom;
            if (std::abs(delta) <= 1.0)
                value = y1 - 0.25 * (y0 - y2) * delta;
        }
        if (!out.empty() && out.back().is_max == is_max) {
            // plateau double-detection: keep the more extreme one
            if (is_max)
                out.back().value = std::max(out.back().value, value);
            else
                out.back().value = std::min(out.back().value, value);
            continue;
        }
        out.push_back({is_max, value});
    }
    return out;
}

}  // namespace

double idler_wavelength_nm(double pump_nm, double signal_nm) {
    if (!(pump_nm > 0.0) || !(signal_nm > 0.0))
        throw RangeError("wavelengths must be > 0");
    const double inv = 1.0 / pump_nm - 1.0 / signal_nm;
    if (!(inv > 0.0))
        throw RangeError("signal wavelength must exceed the pump wavelength");
    return 1.0 / inv;
}

double phase_mismatch(const ModeCurves& curves, double pump_nm,
                      double signal_nm, double temperature_K) {
    if (std::abs(curves.pump.temperature_K - temperature_K) > 1e-6 ||
        std::abs(curves.signal.temperature_K - temperature_K) > 1e-6 ||
        std::abs(curves.idler.temperature_K - temperature_K) > 1e-6) {
        throw RangeError("dispersion curves were built at a different temperature");
    }
    const double idler_nm = idler_wavelength_nm(pump_nm, signal_nm);
    check_curve_range(curves.pump, pump_nm, "pump");
    check_curve_range(curves.signal, signal_nm, "signal");
    check_curve_range(curves.idler, idler_nm, "idler");
    const double np = curves.pump.n_at(pump_nm);
    const double ns = curves.signal.n_at(signal_nm);
    const double ni = curves.idler.n_at(idler_nm);
    // 1/nm -> 1/cm conversion: 1e7
    return 2.0 * constants::pi * 1e7 *
           (np / pump_nm - ns / signal_nm - ni / idler_nm);
}

ModeCurves build_mode_curves(const LayerStack& stack,
                             const DispersionTable& table,
                             double temperature_K, double pump_lo_nm,
                             double pump_hi_nm, double pump_step_nm,
                             double signal_window_nm, double fund_step_nm,
                             const SolverOptions& options) {
    if (!(pump_hi_nm >= pump_lo_nm) || !(pump_lo_nm > 0.0))
        throw RangeError("invalid pump wavelength window");
    if (pump_hi_nm - pump_lo_nm < 2.0 * pump_step_nm) {
        const double mid = 0.5 * (pump_lo_nm + pump_hi_nm);
        pump_lo_nm = mid - pump_step_nm;
        pump_hi_nm = mid + pump_step_nm;
    }
    const std::vector<double> pump_grid =
        grid_by_step(pump_lo_nm, pump_hi_nm, pump_step_nm);

    // The fundamental curves must cover every signal in 2*lp +- window plus
    // the energy-conserving idler, whose maximum sits at the window's low
    // signal edge.
    const double sig_lo = 2.0 * pump_lo_nm - signal_window_nm;
    double fund_hi = 2.0 * pump_hi_nm + signal_window_nm;
    for (double lp : {pump_lo_nm, pump_hi_nm}) {
        const double s_edge = 2.0 * lp - signal_window_nm;
        if (s_edge > lp)
            fund_hi = std::max(fund_hi, idler_wavelength_nm(lp, s_edge));
    }
    const std::vector<double> fund_grid =
        grid_by_step(sig_lo - 2.0 * fund_step_nm, fund_hi + 2.0 * fund_step_nm,
                     fund_step_nm);

    ModeCurves mc;
    mc.pump = dispersion_curve(stack, table, Polarization::TE, ModeFamily::Bragg,
                               0, pump_grid, temperature_K, options);
    mc.signal = dispersion_curve(stack, table, Polarization::TE, ModeFamily::TIR,
                                 0, fund_grid, temperature_K, options);
    mc.idler = dispersion_curve(stack, table, Polarization::TM, ModeFamily::TIR,
                                0, fund_grid, temperature_K, options);
    return mc;
}

bool TuningCurve::has_degeneracy() const {
    return std::isfinite(degeneracy_pump_nm) && degeneracy_pump_nm > 0.0;
}

TuningCurve tuning_curve_from_modes(const ModeCurves& curves,
                                    const std::vector<double>& pump_grid_nm,
                                    double temperature_K,
                                    const TuningOptions& options) {
    if (pump_grid_nm.empty()) throw RangeError("empty pump grid");
    TuningCurve tc;
    tc.temperature_K = temperature_K;
    tc.degeneracy_pump_nm = std::numeric_limits<double>::quiet_NaN();

    auto dk_at = [&](double lp, double ls) {
        return phase_mismatch(curves, lp, ls, temperature_K);
    };

    auto emit_roots_for_pump = [&](double lp) {
        std::vector<double> roots;
        // clamp the signal window to what the curves can interpolate
        double lo = std::max(2.0 * lp - options.signal_window_nm,
                             curves.signal.min_wavelength_nm());
        double hi = std::min(2.0 * lp + options.signal_window_nm,
                             curves.signal.max_wavelength_nm());
        // keep the conjugate idler inside its curve too
        const double idl_lo = curves.idler.min_wavelength_nm();
        const double idl_hi = curves.idler.max_wavelength_nm();
        if (1.0 / lp - 1.0 / idl_hi > 0.0)
            lo = std::max(lo, idler_wavelength_nm(lp, idl_hi));
        if (1.0 / lp - 1.0 / idl_lo > 0.0)
            hi = std::min(hi, idler_wavelength_nm(lp, idl_lo));
        else
            return roots;  // whole window maps outside the idler curve
        if (!(hi > lo)) return roots;

        const std::vector<double> ls_grid =
            grid_by_step(lo, hi, options.scan_step_nm);
        std::vector<double> dk(ls_grid.size());
        for (std::size_t i = 0; i < ls_grid.size(); ++i)
            dk[i] = dk_at(lp, ls_grid[i]);

        auto refine = [&](double a, double b) {
            const double root = refine_bracketed_root(
                [&](double ls) { return dk_at(lp, ls); }, a, b, 1e-6);
            for (double r : roots)
                if (std::abs(r - root) < 1e-3) return;
            if (std::abs(dk_at(lp, root)) < 1e-4) roots.push_back(root);
        };

        for (std::size_t i = 0; i + 1 < ls_grid.size(); ++i) {
            if (dk[i] == 0.0) {
                roots.push_back(ls_grid[i]);
            } else if (dk[i] * dk[i + 1] < 0.0) {
                refine(ls_grid[i], ls_grid[i + 1]);
            }
        }
        // near-tangent pairs: a local |dk| minimum can hide two roots
        // between grid points, so sub-scan around interior minima
        for (std::size_t i = 1; i + 1 < ls_grid.size(); ++i) {
            if (std::abs(dk[i]) < std::abs(dk[i - 1]) &&
                std::abs(dk[i]) < std::abs(dk[i + 1]) &&
                dk[i - 1] * dk[i] > 0.0 && dk[i] * dk[i + 1] > 0.0) {
                const std::vector<double> fine =
                    linspace(ls_grid[i - 1], ls_grid[i + 1], 101);
                double prev = dk_at(lp, fine[0]);
                for (std::size_t j = 1; j < fine.size(); ++j) {
                    const double cur = dk_at(lp, fine[j]);
                    if (prev * cur < 0.0) refine(fine[j - 1], fine[j]);
                    prev = cur;
                }
            }
        }
        std::sort(roots.begin(), roots.end());
        return roots;
    };

    for (double lp : pump_grid_nm) {
        if (lp < curves.pump.min_wavelength_nm() ||
            lp > curves.pump.max_wavelength_nm()) {
            tc.warnings.push_back("pump " + fmt_nm(lp) +
                                  " nm outside pump dispersion curve, skipped");
            continue;
        }
        const std::vector<double> roots = emit_roots_for_pump(lp);
        if (roots.empty()) {
            tc.warnings.push_back("no phase-matched pair for pump " +
                                  fmt_nm(lp) + " nm, skipped");
            continue;
        }
        for (double ls : roots) {
            PhaseMatchPoint pt;
            pt.pump_nm = lp;
            pt.signal_nm = ls;
            pt.idler_nm = idler_wavelength_nm(lp, ls);
            pt.temperature_K = temperature_K;
            pt.delta_k_rad_cm = dk_at(lp, ls);
            tc.points.push_back(pt);
        }
    }

    // Degeneracy: root of dk(lp, 2 lp) over the pump span, emitted once.
    {
        const double lo = std::max(pump_grid_nm.front(),
                                   curves.pump.min_wavelength_nm());
        const double hi = std::min(pump_grid_nm.back(),
                                   curves.pump.max_wavelength_nm());
        auto dk_deg = [&](double lp) { return dk_at(lp, 2.0 * lp); };
        if (hi > lo) {
            const std::vector<double> grid = linspace(lo, hi, 201);
            double prev = dk_deg(grid[0]);
            for (std::size_t i = 1; i < grid.size(); ++i) {
                const double cur = dk_deg(grid[i]);
                if (prev * cur < 0.0) {
                    const double lp_star = refine_bracketed_root(
                        dk_deg, grid[i - 1], grid[i], 1e-7);
                    tc.degeneracy_pump_nm = lp_star;
                    PhaseMatchPoint pt;
                    pt.pump_nm = lp_star;
                    pt.signal_nm = 2.0 * lp_star;
                    pt.idler_nm = 2.0 * lp_star;
                    pt.temperature_K = temperature_K;
                    pt.delta_k_rad_cm = dk_deg(lp_star);
                    tc.points.push_back(pt);
                    break;
                }
                prev = cur;
            }
        }
        if (!tc.has_degeneracy())
            tc.warnings.push_back("no degeneracy point inside the pump window");
    }

    if (tc.points.empty())
        throw SolveError("tuning curve empty: no phase-matched point in window");
    std::sort(tc.points.begin(), tc.points.end(),
              [](const PhaseMatchPoint& a, const PhaseMatchPoint& b) {
                  if (a.pump_nm != b.pump_nm) return a.pump_nm < b.pump_nm;
                  return a.signal_nm < b.signal_nm;
              });
    return tc;
}

TuningCurve tuning_curves(const LayerStack& stack, const DispersionTable& table,
                          double temperature_K,
                          const std::vector<double>& pump_grid_nm,
                          const TuningOptions& options) {
    if (pump_grid_nm.empty()) throw RangeError("empty pump grid");
    const auto [lo_it, hi_it] =
        std::minmax_element(pump_grid_nm.begin(), pump_grid_nm.end());
    const ModeCurves curves = build_mode_curves(
        stack, table, temperature_K, *lo_it, *hi_it, options.pump_step_nm,
        options.signal_window_nm, options.fund_step_nm, options.solver);
    return tuning_curve_from_modes(curves, pump_grid_nm, temperature_K, options);
}

DegeneracyPoint degeneracy_search(const LayerStack& stack,
                                  const DispersionTable& table,
                                  double temperature_K, double pump_lo_nm,
                                  double pump_hi_nm,
                                  const SolverOptions& options) {
    if (!(pump_hi_nm > pump_lo_nm))
        throw RangeError("invalid pump window for degeneracy search");
    // narrow curves: only lambda_s = lambda_i = 2 lambda_p is evaluated
    const double pump_step = std::min(0.5, (pump_hi_nm - pump_lo_nm) / 4.0);
    const double fund_margin = 4.0;
    const double fund_step =
        std::min(2.0, (2.0 * (pump_hi_nm - pump_lo_nm) + 2.0 * fund_margin) / 6.0);

    ModeCurves mc;
    mc.pump = dispersion_curve(stack, table, Polarization::TE, ModeFamily::Bragg,
                               0, grid_by_step(pump_lo_nm, pump_hi_nm, pump_step),
                               temperature_K, options);
    const std::vector<double> fund_grid =
        grid_by_step(2.0 * pump_lo_nm - fund_margin, 2.0 * pump_hi_nm + fund_margin,
                     fund_step);
    mc.signal = dispersion_curve(stack, table, Polarization::TE, ModeFamily::TIR,
                                 0, fund_grid, temperature_K, options);
    mc.idler = dispersion_curve(stack, table, Polarization::TM, ModeFamily::TIR,
                                0, fund_grid, temperature_K, options);

    auto dk_deg = [&](double lp) {
        return phase_mismatch(mc, lp, 2.0 * lp, temperature_K);
    };
    const std::vector<double> grid = linspace(pump_lo_nm, pump_hi_nm, 201);
    double prev = dk_deg(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = dk_deg(grid[i]);
        if (prev == 0.0) {
            return {grid[i - 1], 2.0 * grid[i - 1], temperature_K};
        }
        if (prev * cur < 0.0) {
            const double lp =
                refine_bracketed_root(dk_deg, grid[i - 1], grid[i], 1e-7);
            return {lp, 2.0 * lp, temperature_K};
        }
        prev = cur;
    }
    throw SolveError("no phase-matching degeneracy in pump window [" +
                     fmt_nm(pump_lo_nm) + ", " + fmt_nm(pump_hi_nm) + "] nm");
}

PmTemperatureFit pm_center_vs_temperature(const LayerStack& stack,
                                          const DispersionTable& table,
                                          const std::vector<double>& temps_K,
                                          double pump_lo_nm, double pump_hi_nm,
                                          const SolverOptions& options) {
    PmTemperatureFit fit;
    for (double T : temps_K) {
        try {
            const DegeneracyPoint d =
                degeneracy_search(stack, table, T, pump_lo_nm, pump_hi_nm, options);
            fit.temperature_K.push_back(T);
            fit.center_nm.push_back(d.pair_nm);
        } catch (const SolveError& e) {
            std::ostringstream os;
            os << "T = " << T << " K skipped: " << e.what();
            fit.warnings.push_back(os.str());
        }
    }
    if (fit.temperature_K.size() < 3)
        throw SolveError("pm_center_vs_temperature: fewer than 3 valid temperatures");
    const auto [intercept, slope] = linear_fit(fit.temperature_K, fit.center_nm);
    fit.intercept_nm = intercept;
    fit.slope_nm_per_K = slope;
    return fit;
}

std::vector<double> shg_spectrum(const ShgModel& model,
                                 const std::vector<double>& lambda_nm) {
    validate_shg_model(model);
    std::vector<double> out(lambda_nm.size());
    for (std::size_t i = 0; i < lambda_nm.size(); ++i) {
        if (!(lambda_nm[i] > 0.0))
            throw RangeError("shg_spectrum: wavelengths must be > 0");
        out[i] = shg_power_at(model, lambda_nm[i]);
    }
    return out;
}

ShgModel shg_model_from_stack(const LayerStack& stack,
                              const DispersionTable& table,
                              double temperature_K, double eta_pct_per_W_cm2,
                              double pump_lo_nm, double pump_hi_nm,
                              const SolverOptions& options) {
    const DegeneracyPoint deg = degeneracy_search(stack, table, temperature_K,
                                                  pump_lo_nm, pump_hi_nm, options);
    LayerStack work = stack;
    work.temperature_K = temperature_K;

    auto pick = [](const std::vector<GuidedMode>& modes, ModeFamily family,
                   const char* what) -> const GuidedMode& {
        for (const auto& m : modes)
            if (m.family == family && m.order == 0) return m;
        throw SolveError(std::string("mode not found: ") + what);
    };
    const auto te = find_modes(work, table, deg.pair_nm, Polarization::TE, options);
    const auto tm = find_modes(work, table, deg.pair_nm, Polarization::TM, options);
    const auto sh = find_modes(work, table, deg.pump_nm, Polarization::TE, options);
    const GuidedMode& m_te = pick(te, ModeFamily::TIR, "fundamental TE");
    const GuidedMode& m_tm = pick(tm, ModeFamily::TIR, "fundamental TM");
    const GuidedMode& m_sh = pick(sh, ModeFamily::Bragg, "second-harmonic");

    const double dng =
        std::abs(m_sh.n_g - 0.5 * (m_te.n_g + m_tm.n_g));
    if (dng < 1e-6)
        throw SolveError("no group-index walk-off: SHG bandwidth undefined");

    ShgModel m;
    m.eta_pct_per_W_cm2 = eta_pct_per_W_cm2;
    m.center_nm = deg.pair_nm;
    m.length_cm = stack.ridge.length_mm * 0.1;
    // FWHM of sinc^2(dk L/2) mapped to wavelength via ddk/dl =
    // 2 pi 1e7 (ng_te + ng_tm - 2 ng_sh) / lambda^2
    m.fwhm_nm = kSincFwhmDkL * deg.pair_nm * deg.pair_nm /
                (2.0 * constants::pi * 1e7 * m.length_cm * 2.0 * dng);
    m.R_fund_te = stack.facets.r_te00;
    m.R_fund_tm = stack.facets.r_tm00;
    m.R_sh = stack.facets.r_teb;
    m.alpha_fund_te_cm1 = m_te.alpha_cm1;
    m.alpha_fund_tm_cm1 = m_tm.alpha_cm1;
    m.alpha_sh_cm1 = m_sh.alpha_cm1;
    m.ng_fund_te = m_te.n_g;
    m.ng_fund_tm = m_tm.n_g;
    m.ng_sh = m_sh.n_g;
    return m;
}

ShgFit fit_shg(const std::vector<double>& lambda_nm,
               const std::vector<double>& sh_power, const ShgFitConfig& config) {
    if (lambda_nm.size() != sh_power.size())
        throw SchemaError("fit_shg: wavelength/power size mismatch");
    if (lambda_nm.size() < 32)
        throw SchemaError("fit_shg: need at least 32 samples");
    if (!(config.length_cm > 0.0))
        throw SchemaError("fit_shg: length_cm must be > 0");
    for (double r : {config.R_fund_te, config.R_fund_tm, config.R_sh})
        if (r < 0.0 || r >= 1.0)
            throw SchemaError("fit_shg: facet reflectivity must be in [0, 1)");

    ShgFit fit;
    fit.model.length_cm = config.length_cm;
    fit.model.fundamental_power_W = config.fundamental_power_W;
    fit.model.R_fund_te = config.R_fund_te;
    fit.model.R_fund_tm = config.R_fund_tm;
    fit.model.R_sh = config.R_sh;
    fit.model.alpha_fund_te_cm1 = config.alpha_fund_te_cm1;
    fit.model.alpha_fund_tm_cm1 = config.alpha_fund_tm_cm1;
    fit.model.alpha_sh_cm1 = config.alpha_sh_cm1;
    fit.model.ng_fund_te = config.ng_fund_te;
    fit.model.ng_fund_tm = config.ng_fund_tm;
    fit.model.ng_sh = config.ng_sh;

    const double peak = *std::max_element(sh_power.begin(), sh_power.end());
    if (!(peak > 0.0)) {
        fit.degenerate = true;
        fit.converged = true;
        fit.model.eta_pct_per_W_cm2 = 0.0;
        fit.model.center_nm = 0.5 * (lambda_nm.front() + lambda_nm.back());
        fit.model.fwhm_nm = lambda_nm.back() - lambda_nm.front();
        return fit;
    }

    // --- initialization: fringe-averaged envelope ---
    const double step = std::abs(mean_step(lambda_nm));
    const double ng_ref = std::max(
        1.0, 0.5 * (config.ng_fund_te + config.ng_fund_tm));
    const double lambda_mid = 0.5 * (lambda_nm.front() + lambda_nm.back());
    const double fringe_nm =
        lambda_mid * lambda_mid / (2.0 * ng_ref * config.length_cm * 1e7);
    const int half = step > 0.0
                         ? std::max(1, static_cast<int>(std::lround(
                                           0.5 * fringe_nm / step)))
                         : 1;
    const std::vector<double> env = smooth(sh_power, half);
    PeakMeasurement pm = measure_peak(lambda_nm, env);
    double center0 = pm.center_x;
    double fwhm0 = pm.fwhm > 0.0 ? pm.fwhm : 0.5;

    // eta scale from a reference synthesis smoothed the same way
    ShgModel ref = fit.model;
    ref.eta_pct_per_W_cm2 = 1.0;
    ref.center_nm = center0;
    ref.fwhm_nm = fwhm0;
    const std::vector<double> ref_env = smooth(shg_spectrum(ref, lambda_nm), half);
    const PeakMeasurement pr = measure_peak(lambda_nm, ref_env);
    double eta0 = pr.height > 0.0 ? pm.height / pr.height : 1.0;

    // --- parameter packing: always (eta, center, fwhm), plus one Airy
    // phase per facet with nonzero reflectivity ---
    const bool use_te = config.R_fund_te > 1e-12;
    const bool use_tm = config.R_fund_tm > 1e-12;
    const bool use_sh = config.R_sh > 1e-12;

    auto unpack = [&](const std::vector<double>& p) {
        ShgModel m = fit.model;
        m.eta_pct_per_W_cm2 = std::abs(p[0]);
        m.center_nm = p[1];
        m.fwhm_nm = std::abs(p[2]);
        std::size_t k = 3;
        if (use_te) m.phase_fund_te = p[k++];
        if (use_tm) m.phase_fund_tm = p[k++];
        if (use_sh) m.phase_sh = p[k++];
        return m;
    };
    auto residuals = [&](const std::vector<double>& p) {
        const ShgModel m = unpack(p);
        std::vector<double> r(lambda_nm.size());
        if (!(m.fwhm_nm > 1e-6) || !(m.center_nm > 0.0)) {
            std::fill(r.begin(), r.end(), 10.0 * peak);
            return r;
        }
        for (std::size_t i = 0; i < lambda_nm.size(); ++i)
            r[i] = shg_power_at(m, lambda_nm[i]) - sh_power[i];
        return r;
    };
    auto cost_of = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (double v : residuals(p)) s += v * v;
        return s;
    };

    // --- coarse phase grid, then LM from the best few starts ---
    std::vector<std::vector<double>> starts;
    const std::vector<double> phase_grid = {0.0, 0.5 * constants::pi,
                                            constants::pi, 1.5 * constants::pi};
    std::vector<std::pair<double, std::vector<double>>> ranked;
    const std::size_t n_te = use_te ? phase_grid.size() : 1;
    const std::size_t n_tm = use_tm ? phase_grid.size() : 1;
    const std::size_t n_sh = use_sh ? phase_grid.size() : 1;
    for (std::size_t a = 0; a < n_te; ++a) {
        for (std::size_t b = 0; b < n_tm; ++b) {
            for (std::size_t c = 0; c < n_sh; ++c) {
                std::vector<double> p = {eta0, center0, fwhm0};
                if (use_te) p.push_back(phase_grid[a]);
                if (use_tm) p.push_back(phase_grid[b]);
                if (use_sh) p.push_back(phase_grid[c]);
                ranked.emplace_back(cost_of(p), p);
            }
        }
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    const std::size_t n_starts = std::min<std::size_t>(4, ranked.size());
    for (std::size_t i = 0; i < n_starts; ++i) starts.push_back(ranked[i].second);

    double best_cost = std::numeric_limits<double>::infinity();
    LmResult best;
    for (const auto& start : starts) {
        const LmResult res = levenberg_marquardt(residuals, start, 300, 1e-14);
        const double c = res.rms;
        if (c < best_cost) {
            best_cost = c;
            best = res;
        }
    }
    if (best.params.empty())
        throw SolveError("shg fit produced no parameter estimate");

    fit.model = unpack(best.params);
    // canonical phase interval
    auto wrap = [](double& phi) {
        phi = std::fmod(phi, 2.0 * constants::pi);
        if (phi < 0.0) phi += 2.0 * constants::pi;
    };
    wrap(fit.model.phase_fund_te);
    wrap(fit.model.phase_fund_tm);
    wrap(fit.model.phase_sh);
    fit.residual_norm = best.rms;
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    if (!(fit.residual_norm < 0.25 * peak)) {
        std::ostringstream os;
        os << "shg fit did not converge: rms " << fit.residual_norm
           << " vs peak " << peak;
        throw SolveError(os.str());
    }
    return fit;
}

LossExtraction extract_loss_fp(const std::vector<double>& lambda_nm,
                               const std::vector<double>& transmission,
                               double facet_R, double length_cm) {
    if (lambda_nm.size() != transmission.size())
        throw SchemaError("extract_loss_fp: wavelength/intensity size mismatch");
    if (!(facet_R > 0.0) || !(facet_R < 1.0))
        throw SchemaError("extract_loss_fp: facet_R must be in (0, 1)");
    if (!(length_cm > 0.0))
        throw SchemaError("extract_loss_fp: length_cm must be > 0");

    const std::vector<Extremum> ext = find_extrema(transmission);
    std::vector<double> alphas;
    for (std::size_t i = 0; i + 1 < ext.size(); ++i) {
        const double hi = ext[i].is_max ? ext[i].value : ext[i + 1].value;
        const double lo = ext[i].is_max ? ext[i + 1].value : ext[i].value;
        if (!(hi > 0.0) || !(lo > 0.0) || !(hi > lo)) continue;
        const double K = (hi - lo) / (hi + lo);
        if (K >= 1.0)
            throw SolveError("extract_loss_fp: fringe contrast >= 1");
        const double x = (1.0 - std::sqrt(1.0 - K * K)) / K;
        // tolerate sampling-level jitter above R, reject gross violations
        if (x > facet_R * (1.0 + 1e-4))
            throw SolveError(
                "extract_loss_fp: contrast implies negative loss (x > R); "
                "check the facet reflectivity");
        alphas.push_back(-std::log(std::min(x, facet_R) / facet_R) / length_cm);
    }
    if (alphas.empty())
        throw SolveError("extract_loss_fp: no fringes found in spectrum");

    LossExtraction out;
    out.fringe_count = static_cast<int>(alphas.size());
    double mean = 0.0;
    for (double a : alphas) mean += a;
    mean /= static_cast<double>(alphas.size());
    double var = 0.0;
    for (double a : alphas) var += (a - mean) * (a - mean);
    if (alphas.size() > 1) var /= static_cast<double>(alphas.size() - 1);
    out.alpha_cm1 = mean;
    out.alpha_std_cm1 = std::sqrt(var);
    return out;
}

std::vector<double> synthesize_fp_transmission(
    const std::vector<double>& lambda_nm, double alpha_cm1, double facet_R,
    double length_cm, double group_index, double phase0) {
    if (!(facet_R >= 0.0) || !(facet_R < 1.0))
        throw SchemaError("synthesize_fp_transmission: facet_R must be in [0, 1)");
    if (!(length_cm > 0.0))
        throw SchemaError("synthesize_fp_transmission: length_cm must be > 0");
    if (alpha_cm1 < 0.0)
        throw SchemaError("synthesize_fp_transmission: alpha must be >= 0");
    const double atten = std::exp(-alpha_cm1 * length_cm);
    const double x = facet_R * atten;
    std::vector<double> out(lambda_nm.size());
    for (std::size_t i = 0; i < lambda_nm.size(); ++i) {
        const double phi = phase0 + 2.0 * constants::pi * group_index *
                                        (length_cm * 1e7) / lambda_nm[i];
        const double s = std::sin(phi);
        out[i] = (1.0 - facet_R) * (1.0 - facet_R) * atten /
                 ((1.0 - x) * (1.0 - x) + 4.0 * x * s * s);
    }
    return out;
}

double spectral_bandwidth_hz(double delta_lambda_nm, double lambda_nm) {
    if (!(lambda_nm > 0.0)) throw RangeError("lambda_nm must be > 0");
    if (delta_lambda_nm < 0.0) throw RangeError("delta_lambda_nm must be >= 0");
    return constants::c_nm_per_s * delta_lambda_nm / (lambda_nm * lambda_nm);
}

double spdc_pair_probability(double eta_pct_per_W_cm2, double length_cm,
                             double pump_nm, double bandwidth_hz) {
    if (eta_pct_per_W_cm2 < 0.0) throw RangeError("efficiency must be >= 0");
    if (!(length_cm > 0.0)) throw RangeError("length_cm must be > 0");
    if (!(pump_nm > 0.0)) throw RangeError("pump_nm must be > 0");
    if (bandwidth_hz < 0.0) throw RangeError("bandwidth_hz must be >= 0");
    return (eta_pct_per_W_cm2 / 100.0) * length_cm * length_cm *
           constants::photon_energy_J(pump_nm) * bandwidth_hz;
}

}  // namespace pairforge
