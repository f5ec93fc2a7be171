#include "pairforge/modesolver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "pairforge/constants.hpp"
#include "pairforge/errors.hpp"
#include "pairforge/numerics.hpp"

namespace pairforge {
namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

cd csinc(cd t) {
    if (std::abs(t) < 1e-4) {
        const cd t2 = t * t;
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    }
    return std::sin(t) / t;
}

// Planar cut through the stack at one wavelength: complex index per region.
struct Planar {
    double wavelength_nm = 0.0;
    double k0 = 0.0;  // 2*pi/lambda, nm^-1
    Polarization pol = Polarization::TE;
    cd n_sub;
    cd n_sup;
    std::vector<cd> n;   // one per layer, bottom to top
    std::vector<double> d;
    std::vector<double> z;  // boundaries, size layers+1, z[0] = 0
};

cd complex_index(const DispersionTable& table, double x, double doping,
                 double wavelength_nm, double temperature_K) {
    const double nr = table.refractive_index({x, wavelength_nm, temperature_K});
    const double alpha = layer_loss(table.loss_model(doping), wavelength_nm);
    // alpha in cm^-1, lambda in nm: Im(n) = alpha * lambda / (4*pi), consistent units
    const double ni = alpha * (wavelength_nm * 1e-7) / (4.0 * constants::pi);
    return {nr, ni};
}

Planar make_planar(const LayerStack& stack, const DispersionTable& table,
                   double wavelength_nm, Polarization pol,
                   double superstrate_index = 1.0) {
    Planar p;
    p.wavelength_nm = wavelength_nm;
    p.k0 = 2.0 * constants::pi / wavelength_nm;
    p.pol = pol;
    const double T = stack.temperature_K;
    p.n_sub = complex_index(table, stack.substrate.x,
                            stack.substrate.doping_cm3, wavelength_nm, T);
    p.n_sup = cd{superstrate_index, 0.0};
    p.z = stack.boundaries_nm();
    p.n.reserve(stack.layers.size());
    p.d.reserve(stack.layers.size());
    for (const auto& layer : stack.layers) {
        p.n.push_back(complex_index(table, layer.x, layer.doping_cm3,
                                    wavelength_nm, T));
        p.d.push_back(layer.thickness_nm);
    }
    return p;
}

// Per-boundary branch choice, frozen for the duration of one root refinement:
// a boundary below the mode index takes the decaying solution, one above it
// takes the outgoing (leaky) one. A single sqrt expression cannot cover both:
// with Im(N) > 0 against a lossless outer medium the principal branch flips
// to the exponentially growing solution.
struct BcBranch {
    bool bound_sub = true;
    bool bound_sup = true;
};

BcBranch branch_for(const Planar& p, double n_ref) {
    return {n_ref >= p.n_sub.real(), n_ref >= p.n_sup.real()};
}

// Outward wavenumber: field outside = A * exp(-i k (z - z_b)) below the stack
// and A * exp(+i k (z - z_t)) above it.
cd outward_k(const Planar& p, cd n_out, cd N, bool bound) {
    if (bound) return I * p.k0 * std::sqrt(N * N - n_out * n_out);  // decay
    return p.k0 * std::sqrt(n_out * n_out - N * N);                 // outgoing
}

cd boundary_g(const Planar& p, cd n_out, cd N, bool bound) {
    cd g = -I * outward_k(p, n_out, N, bound) / p.k0;
    if (p.pol == Polarization::TM) g /= n_out * n_out;
    return g;
}

struct FValue {
    cd f;
    double residual;  // |f| / magnitude scale
};

void layer_entries(const Planar& p, std::size_t j, cd N, cd& m11, cd& m12, cd& m21) {
    const cd n = p.n[j];
    const double d = p.d[j];
    const cd kap2 = p.k0 * p.k0 * (n * n - N * N);
    const cd th = std::sqrt(kap2) * d;
    m11 = std::cos(th);
    const cd s = csinc(th);
    if (p.pol == Polarization::TE) {
        m12 = p.k0 * d * s;
        m21 = -kap2 * d / p.k0 * s;
    } else {
        const cd n2 = n * n;
        m12 = n2 * p.k0 * d * s;
        m21 = -kap2 * d / (p.k0 * n2) * s;
    }
}

FValue dispersion_f(const Planar& p, cd N, const BcBranch& br) {
    const cd gs = boundary_g(p, p.n_sub, N, br.bound_sub);
    const cd gc = boundary_g(p, p.n_sup, N, br.bound_sup);
    cd u = 1.0, v = gs;
    double us = 1.0, vs = std::abs(gs);
    for (std::size_t j = 0; j < p.n.size(); ++j) {
        cd m11, m12, m21;
        layer_entries(p, j, N, m11, m12, m21);
        const cd u1 = m11 * u + m12 * v;
        const cd v1 = m21 * u + m11 * v;
        const double us1 = std::abs(m11) * us + std::abs(m12) * vs;
        const double vs1 = std::abs(m21) * us + std::abs(m11) * vs;
        u = u1;
        v = v1;
        us = us1;
        vs = vs1;
    }
    const cd f = v + gc * u;
    const double scale = vs + std::abs(gc) * us + 1e-300;
    return {f, std::abs(f) / scale};
}

std::optional<cd> secant_refine(const Planar& p, const BcBranch& br, cd z0, cd z1,
                                double residual_tol, double re_lo, double re_hi,
                                double im_ceiling) {
    FValue f0 = dispersion_f(p, z0, br);
    FValue f1 = dispersion_f(p, z1, br);
    cd best = z1;
    double best_res = f1.residual;
    for (int it = 0; it < 100; ++it) {
        const cd denom = f1.f - f0.f;
        if (std::abs(denom) == 0.0) break;
        const cd z2 = z1 - f1.f * (z1 - z0) / denom;
        if (!std::isfinite(z2.real()) || !std::isfinite(z2.imag())) break;
        if (z2.real() < re_lo - 0.05 || z2.real() > re_hi + 0.05) break;
        if (z2.imag() > 10.0 * im_ceiling + 0.01 || z2.imag() < -0.01) break;
        const FValue f2 = dispersion_f(p, z2, br);
        z0 = z1;
        f0 = f1;
        z1 = z2;
        f1 = f2;
        if (f2.residual < best_res) {
            best = z2;
            best_res = f2.residual;
        }
        if (std::abs(z1 - z0) < 1e-13 && best_res < residual_tol) break;
        if (best_res < 1e-14) break;
    }
    if (best_res < residual_tol) return best;
    return std::nullopt;
}

// Field bookkeeping for one converged root.
struct ModeWork {
    cd N;
    std::vector<cd> u0, v0;   // field/derivative pair at each layer bottom
    cd u_top, v_top;
    std::vector<cd> kap;      // per-layer transverse wavenumber (branch-free use)
    cd kap_sub, kap_sup;      // principal-branch outer wavenumbers
    std::vector<double> layer_power;
    double power_sub_tail = 0.0;
    double power_sup_tail = 0.0;
    double total_power = 0.0;
};

cd field_in_layer(const Planar& p, const ModeWork& w, std::size_t j, double zeta) {
    const cd th = w.kap[j] * zeta;
    const cd c = std::cos(th);
    const cd s = csinc(th);
    cd m12;
    if (p.pol == Polarization::TE) {
        m12 = p.k0 * zeta * s;
    } else {
        m12 = p.n[j] * p.n[j] * p.k0 * zeta * s;
    }
    return w.u0[j] * c + w.v0[j] * m12;
}

// integral over [-W, 0] of |A exp(-i*k z)|^2 dz
double tail_power(cd amplitude, cd k, double window) {
    const double a = 2.0 * k.imag();
    const double mag2 = std::norm(amplitude);
    if (std::abs(a) < 1e-14) return mag2 * window;
    return mag2 * (1.0 - std::exp(-a * window)) / a;
}

template <typename F>
double simpson_samples(F&& f, double h, std::size_t n_intervals) {
    // n_intervals made even by caller
    double s = f(0) + f(n_intervals);
    for (std::size_t i = 1; i < n_intervals; ++i) s += f(i) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

ModeWork analyze_root(const Planar& p, cd N, double extension_nm) {
    ModeWork w;
    w.N = N;
    const BcBranch br = branch_for(p, N.real());
    const std::size_t L = p.n.size();
    w.u0.resize(L);
    w.v0.resize(L);
    w.kap.resize(L);
    w.kap_sub = outward_k(p, p.n_sub, N, br.bound_sub);
    w.kap_sup = outward_k(p, p.n_sup, N, br.bound_sup);
    cd u = 1.0, v = boundary_g(p, p.n_sub, N, br.bound_sub);
    for (std::size_t j = 0; j < L; ++j) {
        w.u0[j] = u;
        w.v0[j] = v;
        w.kap[j] = std::sqrt(p.k0 * p.k0 * (p.n[j] * p.n[j] - N * N));
        cd m11, m12, m21;
        layer_entries(p, j, N, m11, m12, m21);
        const cd u1 = m11 * u + m12 * v;
        const cd v1 = m21 * u + m11 * v;
        u = u1;
        v = v1;
    }
    w.u_top = u;
    w.v_top = v;

    w.layer_power.resize(L, 0.0);
    for (std::size_t j = 0; j < L; ++j) {
        const std::size_t n_int = [&] {
            auto n = static_cast<std::size_t>(std::ceil(p.d[j] / 1.0));
            n = std::max<std::size_t>(n, 8);
            return n % 2 == 0 ? n : n + 1;
        }();
        const double h = p.d[j] / static_cast<double>(n_int);
        w.layer_power[j] = simpson_samples(
            [&](std::size_t i) {
                return std::norm(field_in_layer(p, w, j, h * static_cast<double>(i)));
            },
            h, n_int);
    }
    // substrate: psi(z<0) = u0[0] * exp(-i kap_sub z)
    w.power_sub_tail = tail_power(w.u0.empty() ? cd{1.0} : w.u0[0], w.kap_sub, extension_nm);
    // superstrate: psi(z>ztop) = u_top * exp(+i kap_sup (z - ztop)); same decay law
    // as the substrate side with the sign of z flipped.
    w.power_sup_tail = tail_power(w.u_top, w.kap_sup, extension_nm);
    w.total_power = w.power_sub_tail + w.power_sup_tail;
    for (double pw : w.layer_power) w.total_power += pw;
    return w;
}

cd field_at(const Planar& p, const ModeWork& w, double z) {
    if (z < 0.0) return w.u0[0] * std::exp(-I * w.kap_sub * z);
    const double z_top = p.z.back();
    if (z >= z_top) return w.u_top * std::exp(I * w.kap_sup * (z - z_top));
    auto it = std::upper_bound(p.z.begin(), p.z.end(), z);
    std::size_t j = static_cast<std::size_t>(it - p.z.begin());
    j = (j == 0) ? 0 : j - 1;
    if (j >= p.n.size()) j = p.n.size() - 1;
    return field_in_layer(p, w, j, z - p.z[j]);
}

struct CoreSpan {
    double z_lo = 0.0;
    double z_hi = 0.0;
    std::vector<std::size_t> layers;
};

CoreSpan core_span(const LayerStack& stack) {
    CoreSpan span;
    span.layers = stack.core_layer_indices();
    const auto z = stack.boundaries_nm();
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
    for (std::size_t j : span.layers) {
        lo = std::min(lo, z[j]);
        hi = std::max(hi, z[j + 1]);
    }
    span.z_lo = lo;
    span.z_hi = hi;
    return span;
}

int count_order(const Planar& p, const ModeWork& w, const CoreSpan& core) {
    // sign changes of the phase-aligned field across the core
    const int n_samples = 201;
    const double h = (core.z_hi - core.z_lo) / (n_samples - 1);
    std::vector<cd> f(n_samples);
    double peak = 0.0;
    std::size_t i_peak = 0;
    for (int i = 0; i < n_samples; ++i) {
        f[i] = field_at(p, w, core.z_lo + h * i);
        if (std::abs(f[i]) > peak) {
            peak = std::abs(f[i]);
            i_peak = static_cast<std::size_t>(i);
        }
    }
    if (peak <= 0.0) return 0;
    const cd phase = std::conj(f[i_peak]) / std::abs(f[i_peak]);
    int crossings = 0;
    int last_sign = 0;
    for (int i = 0; i < n_samples; ++i) {
        const double re = (f[i] * phase).real();
        if (std::abs(re) < 1e-6 * peak) continue;
        const int s = re > 0.0 ? 1 : -1;
        if (last_sign != 0 && s != last_sign) ++crossings;
        last_sign = s;
    }
    return crossings;
}

GuidedMode build_mode(const Planar& p, const LayerStack& stack, cd N,
                      double clad_equiv, const SolverOptions& options,
                      bool with_profile) {
    GuidedMode m;
    m.n_eff = N;
    m.wavelength_nm = p.wavelength_nm;
    m.pol = p.pol;
    m.residual = dispersion_f(p, N, branch_for(p, N.real())).residual;
    m.alpha_cm1 = 4.0 * constants::pi * N.imag() / (p.wavelength_nm * 1e-7);
    m.clad_equivalent_index = clad_equiv;
    m.family = (N.real() > clad_equiv) ? ModeFamily::TIR : ModeFamily::Bragg;

    const ModeWork w = analyze_root(p, N, options.profile_extension_nm);
    const CoreSpan core = core_span(stack);
    double core_power = 0.0;
    for (std::size_t j : core.layers) core_power += w.layer_power[j];
    m.confinement_core = (w.total_power > 0.0) ? core_power / w.total_power : 0.0;
    m.order = count_order(p, w, core);

    if (with_profile) {
        const double z_top = p.z.back();
        const double z0 = -options.profile_extension_nm;
        const double z1 = z_top + options.profile_extension_nm;
        const double h = options.profile_step_nm;
        const auto n_pts = static_cast<std::size_t>(std::floor((z1 - z0) / h)) + 1;
        m.profile.z_start_nm = z0;
        m.profile.z_step_nm = h;
        m.profile.field.resize(n_pts);
        const double norm = (w.total_power > 0.0) ? 1.0 / std::sqrt(w.total_power) : 1.0;
        for (std::size_t i = 0; i < n_pts; ++i) {
            m.profile.field[i] = field_at(p, w, z0 + h * static_cast<double>(i)) * norm;
        }
    }
    return m;
}

struct ScanRange {
    double lo;
    double hi;
};

ScanRange scan_range(const Planar& p, const SolverOptions& options) {
    double nmin = std::numeric_limits<double>::max();
    double nmax = std::numeric_limits<double>::lowest();
    for (const cd& n : p.n) {
        nmin = std::min(nmin, n.real());
        nmax = std::max(nmax, n.real());
    }
    // the scan floor must reach below the lowest layer index (mirror-guided
    // modes sit in the mirror band gap, below a high-index substrate) and
    // also down to just above the substrate for weakly guided TIR modes of
    // high-contrast stacks; against the superstrate every mode is evanescent
    const double lo_auto =
        std::min(nmin - 0.12, p.n_sub.real() + 1e-5);
    ScanRange r;
    r.lo = (options.scan_min > 0.0) ? options.scan_min : lo_auto;
    r.hi = (options.scan_max > 0.0) ? options.scan_max : nmax - 1e-6;
    r.lo = std::max(r.lo, p.n_sup.real() + 1e-5);
    if (r.hi <= r.lo) throw SolveError("mode scan range is empty");
    return r;
}

std::vector<cd> find_roots(const Planar& p, const SolverOptions& options) {
    const ScanRange range = scan_range(p, options);
    const double step = options.scan_step;
    const auto n_grid = static_cast<std::size_t>(std::ceil((range.hi - range.lo) / step)) + 1;
    std::vector<double> grid(n_grid);
    std::vector<FValue> fv(n_grid);
    std::vector<BcBranch> fbr(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        grid[i] = std::min(range.lo + step * static_cast<double>(i), range.hi);
        fbr[i] = branch_for(p, grid[i]);
        fv[i] = dispersion_f(p, cd{grid[i], 0.0}, fbr[i]);
    }

    struct Seed {
        cd z0, z1;
        BcBranch br;
    };
    std::vector<Seed> seeds;
    auto same_branch = [](const BcBranch& a, const BcBranch& b) {
        return a.bound_sub == b.bound_sub && a.bound_sup == b.bound_sup;
    };
    for (std::size_t i = 0; i + 1 < n_grid; ++i) {
        if (!same_branch(fbr[i], fbr[i + 1])) continue;
        const cd a = fv[i].f, b = fv[i + 1].f;
        const bool real_a = std::abs(a.imag()) < 1e-6 * std::abs(a);
        const bool real_b = std::abs(b.imag()) < 1e-6 * std::abs(b);
        if (real_a && real_b && a.real() * b.real() < 0.0) {
            seeds.push_back({cd{grid[i], 0.0}, cd{grid[i + 1], 0.0}, fbr[i]});
        }
    }
    for (std::size_t i = 1; i + 1 < n_grid; ++i) {
        if (fv[i].residual < fv[i - 1].residual && fv[i].residual < fv[i + 1].residual) {
            const double h = step / 4.0;
            seeds.push_back({cd{grid[i], 0.0}, cd{grid[i] + h, h / 2.0}, fbr[i]});
        }
    }

    std::vector<cd> roots;
    for (const Seed& s : seeds) {
        auto root = secant_refine(p, s.br, s.z0, s.z1, options.residual_tol,
                                  range.lo, range.hi, options.imag_ceiling);
        if (!root) continue;
        cd z = *root;
        if (std::abs(z.imag()) < 1e-12) z = cd{z.real(), 0.0};
        if (z.imag() < 0.0 || z.imag() > options.imag_ceiling) continue;
        if (z.real() < range.lo - 2.0 * step || z.real() > range.hi + 2.0 * step) continue;
        // keep roots only under the branch they belong to: a refinement that
        // wandered across a boundary index is re-found from its own side
        if (!same_branch(branch_for(p, z.real()), s.br)) continue;
        bool dup = false;
        for (const cd& r : roots) {
            if (std::abs(r - z) < 5e-8) {
                dup = true;
                break;
            }
        }
        if (!dup) roots.push_back(z);
    }
    std::sort(roots.begin(), roots.end(),
              [](const cd& a, const cd& b) { return a.real() > b.real(); });
    return roots;
}

std::optional<cd> polish_near(const Planar& p, cd seed, const SolverOptions& options) {
    const cd z1 = seed + cd{1e-6, 2e-7};
    double lo = seed.real() - 0.05, hi = seed.real() + 0.05;
    auto root = secant_refine(p, branch_for(p, seed.real()), seed, z1,
                              options.residual_tol, lo, hi, options.imag_ceiling);
    if (root && std::abs(root->imag()) < 1e-12) root = cd{root->real(), 0.0};
    if (root && (root->imag() < -1e-12 || root->imag() > options.imag_ceiling))
        return std::nullopt;
    return root;
}

double group_index_by_resolve(const LayerStack& stack, const DispersionTable& table,
                              Polarization pol, double wavelength_nm, cd N,
                              const SolverOptions& options) {
    double delta = options.group_index_delta_nm;
    for (int attempt = 0; attempt < 3; ++attempt) {
        const Planar p_hi = make_planar(stack, table, wavelength_nm + delta, pol,
                                        options.superstrate_index);
        const Planar p_lo = make_planar(stack, table, wavelength_nm - delta, pol,
                                        options.superstrate_index);
        const auto n_hi = polish_near(p_hi, N, options);
        const auto n_lo = polish_near(p_lo, N, options);
        if (n_hi && n_lo) {
            const double dn_dl = (n_hi->real() - n_lo->real()) / (2.0 * delta);
            return N.real() - wavelength_nm * dn_dl;
        }
        delta *= 0.25;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double cladding_equivalent_index(const LayerStack& stack,
                                 const DispersionTable& table,
                                 double wavelength_nm) {
    const auto mirrors = stack.mirror_layer_indices();
    const double T = stack.temperature_K;
    double wsum = 0.0, nsum = 0.0;
    for (std::size_t j : mirrors) {
        const Layer& layer = stack.layers[j];
        const double n = table.refractive_index({layer.x, wavelength_nm, T});
        wsum += layer.thickness_nm;
        nsum += n * layer.thickness_nm;
    }
    if (wsum <= 0.0) {
        return table.refractive_index(
            {stack.substrate.x, wavelength_nm, T});
    }
    return nsum / wsum;
}

std::vector<GuidedMode> find_modes(const LayerStack& stack,
                                   const DispersionTable& table,
                                   double wavelength_nm, Polarization pol,
                                   const SolverOptions& options) {
    if (!(wavelength_nm > 0.0)) throw RangeError("wavelength_nm must be > 0");
    const Planar p = make_planar(stack, table, wavelength_nm, pol,
                                 options.superstrate_index);
    const double clad_equiv = cladding_equivalent_index(stack, table, wavelength_nm);
    const std::vector<cd> roots = find_roots(p, options);

    std::vector<GuidedMode> modes;
    for (const cd& root : roots) {
        if (modes.size() >= options.max_modes) break;
        GuidedMode m = build_mode(p, stack, root, clad_equiv, options, true);
        if (m.family == ModeFamily::Bragg &&
            m.confinement_core < options.bragg_confinement_min) {
            continue;
        }
        if (options.with_group_index) {
            m.n_g = group_index_by_resolve(stack, table, pol, wavelength_nm, root,
                                           options);
        } else {
            m.n_g = std::numeric_limits<double>::quiet_NaN();
        }
        modes.push_back(std::move(m));
    }
    return modes;
}

std::vector<double> group_index_from_samples(
    const std::vector<double>& wavelength_nm, const std::vector<double>& n_eff) {
    const std::size_t n = wavelength_nm.size();
    if (n != n_eff.size() || n == 0) {
        throw SolveError("group_index_from_samples: size mismatch or empty input");
    }
    std::vector<double> ng(n);
    if (n == 1) {
        ng[0] = n_eff[0];
        return ng;
    }
    auto deriv3 = [&](std::size_t i0, std::size_t i1, std::size_t i2, std::size_t at) {
        const double x0 = wavelength_nm[i0], x1 = wavelength_nm[i1], x2 = wavelength_nm[i2];
        const double f0 = n_eff[i0], f1 = n_eff[i1], f2 = n_eff[i2];
        const double xa = wavelength_nm[at];
        return f0 * (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2)) +
               f1 * (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
               f2 * (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1));
    };
    for (std::size_t i = 0; i < n; ++i) {
        double dn_dl;
        if (n == 2) {
            dn_dl = (n_eff[1] - n_eff[0]) / (wavelength_nm[1] - wavelength_nm[0]);
        } else if (i == 0) {
            dn_dl = deriv3(0, 1, 2, 0);
        } else if (i == n - 1) {
            dn_dl = deriv3(n - 3, n - 2, n - 1, n - 1);
        } else {
            dn_dl = deriv3(i - 1, i, i + 1, i);
        }
        ng[i] = n_eff[i] - wavelength_nm[i] * dn_dl;
    }
    return ng;
}

DispersionCurve dispersion_curve(const LayerStack& stack,
                                 const DispersionTable& table,
                                 Polarization pol, ModeFamily family, int order,
                                 const std::vector<double>& wavelength_grid_nm,
                                 double temperature_K,
                                 const SolverOptions& options) {
    if (wavelength_grid_nm.size() < 2) {
        throw SolveError("dispersion_curve needs at least two wavelengths");
    }
    LayerStack work = stack;
    work.temperature_K = temperature_K;

    DispersionCurve curve;
    curve.pol = pol;
    curve.family = family;
    curve.order = order;
    curve.temperature_K = temperature_K;
    curve.wavelength_nm = wavelength_grid_nm;
    const std::size_t n = wavelength_grid_nm.size();
    curve.n_eff_re.assign(n, std::numeric_limits<double>::quiet_NaN());
    curve.n_eff_im.assign(n, 0.0);
    curve.alpha_cm1.assign(n, 0.0);
    curve.confinement.assign(n, 0.0);
    curve.interpolated.assign(n, false);

    SolverOptions scan_opts = options;
    scan_opts.with_group_index = false;

    // anchor: full scan at the first wavelength, pick the requested mode
    const auto anchor_modes =
        find_modes(work, table, wavelength_grid_nm.front(), pol, scan_opts);
    const GuidedMode* anchor = nullptr;
    for (const auto& m : anchor_modes) {
        if (m.family != family || m.order != order) continue;
        if (!anchor) {
            anchor = &m;
            continue;
        }
        const bool better = (family == ModeFamily::Bragg)
                                ? m.confinement_core > anchor->confinement_core
                                : m.n_eff.real() > anchor->n_eff.real();
        if (better) anchor = &m;
    }
    if (!anchor) {
        std::ostringstream os;
        os << "no " << to_string(pol) << " " << to_string(family) << " mode of order "
           << order << " found at " << wavelength_grid_nm.front() << " nm";
        throw SolveError(os.str());
    }

    std::size_t failures = 0;
    double first_lost = 0.0;
    cd prev = anchor->n_eff;
    cd prev2 = anchor->n_eff;
    double prev_lambda = wavelength_grid_nm.front();
    double prev2_lambda = prev_lambda;
    bool have_two = false;

    for (std::size_t i = 0; i < n; ++i) {
        const double lambda = wavelength_grid_nm[i];
        std::optional<cd> root;
        if (i == 0) {
            root = anchor->n_eff;
        } else {
            cd pred = prev;
            if (have_two && prev_lambda != prev2_lambda) {
                pred = prev + (prev - prev2) * (lambda - prev_lambda) /
                                   (prev_lambda - prev2_lambda);
            }
            const Planar p = make_planar(work, table, lambda, pol,
                                         options.superstrate_index);
            root = polish_near(p, pred, options);
            const double step_scale =
                have_two ? 6.0 * std::abs(prev - prev2) + 1e-4 : 4e-3;
            if (root && std::abs(*root - pred) > std::max(4e-3, step_scale)) {
                root = std::nullopt;
            }
            if (!root) {
                // tracker slipped: re-scan and take the nearest candidate
                const auto rescued = find_modes(work, table, lambda, pol, scan_opts);
                double best_dist = 0.01;
                for (const auto& m : rescued) {
                    const double dist = std::abs(m.n_eff - pred);
                    if (dist < best_dist) {
                        best_dist = dist;
                        root = m.n_eff;
                    }
                }
            }
        }
        if (root) {
            const Planar p = make_planar(work, table, lambda, pol,
                                         options.superstrate_index);
            const GuidedMode m = build_mode(p, work, *root,
                                            cladding_equivalent_index(work, table, lambda),
                                            options, false);
            curve.n_eff_re[i] = root->real();
            curve.n_eff_im[i] = root->imag();
            curve.alpha_cm1[i] = m.alpha_cm1;
            curve.confinement[i] = m.confinement_core;
            prev2 = prev;
            prev2_lambda = prev_lambda;
            prev = *root;
            prev_lambda = lambda;
            have_two = i > 0 || have_two;
        } else {
            ++failures;
            if (first_lost == 0.0) first_lost = lambda;
            curve.interpolated[i] = true;
        }
    }

    if (failures * 10 > n) {
        std::ostringstream os;
        os << "mode tracking lost near " << first_lost << " nm (" << failures << "/"
           << n << " grid points failed)";
        throw SolveError(os.str());
    }
    if (failures > 0) {
        // bridge gaps linearly between the nearest successful neighbours
        for (std::size_t i = 0; i < n; ++i) {
            if (!curve.interpolated[i]) continue;
            std::size_t lo = i, hi = i;
            while (lo > 0 && curve.interpolated[lo]) --lo;
            while (hi + 1 < n && curve.interpolated[hi]) ++hi;
            if (curve.interpolated[lo] || curve.interpolated[hi]) {
                const std::size_t src = curve.interpolated[lo] ? hi : lo;
                curve.n_eff_re[i] = curve.n_eff_re[src];
                curve.n_eff_im[i] = curve.n_eff_im[src];
                curve.alpha_cm1[i] = curve.alpha_cm1[src];
                curve.confinement[i] = curve.confinement[src];
                continue;
            }
            const double t = (wavelength_grid_nm[i] - wavelength_grid_nm[lo]) /
                             (wavelength_grid_nm[hi] - wavelength_grid_nm[lo]);
            curve.n_eff_re[i] =
                curve.n_eff_re[lo] + t * (curve.n_eff_re[hi] - curve.n_eff_re[lo]);
            curve.n_eff_im[i] =
                curve.n_eff_im[lo] + t * (curve.n_eff_im[hi] - curve.n_eff_im[lo]);
            curve.alpha_cm1[i] =
                curve.alpha_cm1[lo] + t * (curve.alpha_cm1[hi] - curve.alpha_cm1[lo]);
            curve.confinement[i] =
                curve.confinement[lo] + t * (curve.confinement[hi] - curve.confinement[lo]);
        }
    }
    curve.n_g = group_index_from_samples(curve.wavelength_nm, curve.n_eff_re);
    return curve;
}

namespace {

const CubicSpline& cached_spline(std::shared_ptr<const CubicSpline>& slot,
                                 const std::vector<double>& xs,
                                 const std::vector<double>& ys) {
    if (!slot) slot = std::make_shared<const CubicSpline>(xs, ys);
    return *slot;
}

}  // namespace

double DispersionCurve::n_at(double lambda_nm) const {
    return cached_spline(n_spline_, wavelength_nm, n_eff_re)(lambda_nm);
}

double DispersionCurve::ng_at(double lambda_nm) const {
    return cached_spline(ng_spline_, wavelength_nm, n_g)(lambda_nm);
}

double DispersionCurve::alpha_at(double lambda_nm) const {
    return cached_spline(alpha_spline_, wavelength_nm, alpha_cm1)(lambda_nm);
}

std::complex<double> overlap_integral(const ModeProfile& pump,
                                      const ModeProfile& signal,
                                      const ModeProfile& idler,
                                      const std::vector<double>& d_pm_per_V,
                                      const LayerStack& stack) {
    if (d_pm_per_V.size() != stack.layers.size()) {
        throw SchemaError("overlap_integral: one d coefficient per layer required");
    }
    const ModeProfile* profiles[3] = {&pump, &signal, &idler};
    double lo = std::numeric_limits<double>::lowest();
    double hi = std::numeric_limits<double>::max();
    double h = std::numeric_limits<double>::max();
    for (const ModeProfile* pr : profiles) {
        if (pr->field.size() < 4) throw SchemaError("overlap_integral: profile too short");
        lo = std::max(lo, pr->z_start_nm);
        hi = std::min(hi, pr->z_at(pr->field.size() - 1));
        h = std::min(h, pr->z_step_nm);
    }
    if (hi <= lo) throw SchemaError("overlap_integral: profiles do not overlap in z");

    auto n_int = static_cast<std::size_t>(std::ceil((hi - lo) / h));
    if (n_int % 2 == 1) ++n_int;
    if (n_int < 8) n_int = 8;
    const double step = (hi - lo) / static_cast<double>(n_int);

    auto sample = [&](const ModeProfile& pr, double z) -> cd {
        const double t = (z - pr.z_start_nm) / pr.z_step_nm;
        const auto i0 = static_cast<std::size_t>(
            std::clamp(std::floor(t), 0.0, static_cast<double>(pr.field.size() - 2)));
        const double frac = std::clamp(t - static_cast<double>(i0), 0.0, 1.0);
        return pr.field[i0] * (1.0 - frac) + pr.field[i0 + 1] * frac;
    };

    const auto boundaries = stack.boundaries_nm();
    auto d_at = [&](double z) -> double {
        if (z < boundaries.front() || z >= boundaries.back()) return 0.0;
        auto it = std::upper_bound(boundaries.begin(), boundaries.end(), z);
        std::size_t j = static_cast<std::size_t>(it - boundaries.begin());
        j = (j == 0) ? 0 : j - 1;
        if (j >= d_pm_per_V.size()) j = d_pm_per_V.size() - 1;
        return d_pm_per_V[j];
    };

    double norms[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
        norms[k] = simpson_samples(
            [&](std::size_t i) {
                return std::norm(sample(*profiles[k], lo + step * static_cast<double>(i)));
            },
            step, n_int);
        if (!(norms[k] > 0.0)) throw SchemaError("overlap_integral: zero-power profile");
    }
    const double scale = 1.0 / std::sqrt(norms[0] * norms[1] * norms[2]);

    // complex Simpson accumulation, pump conjugated
    cd acc{0.0, 0.0};
    for (std::size_t i = 0; i <= n_int; ++i) {
        const double z = lo + step * static_cast<double>(i);
        const double wgt = (i == 0 || i == n_int) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += wgt * d_at(z) * std::conj(sample(pump, z)) * sample(signal, z) *
               sample(idler, z);
    }
    acc *= step / 3.0;
    return acc * scale;
}

double normal_incidence_reflectance(const LayerStack& stack,
                                    const DispersionTable& table,
                                    double wavelength_nm) {
    if (!(wavelength_nm > 0.0)) throw RangeError("wavelength_nm must be > 0");
    const Planar p = make_planar(stack, table, wavelength_nm, Polarization::TE);
    // normal incidence: N = 0, field propagated bottom to top with the
    // transmitted-only condition in the substrate.
    const cd N{0.0, 0.0};
    cd u = 1.0;
    cd v = -I * p.n_sub;
    for (std::size_t j = 0; j < p.n.size(); ++j) {
        cd m11, m12, m21;
        layer_entries(p, j, N, m11, m12, m21);
        const cd u1 = m11 * u + m12 * v;
        const cd v1 = m21 * u + m11 * v;
        u = u1;
        v = v1;
    }
    const cd Z = u / v;
    const cd r = -(1.0 + I * p.n_sup * Z) / (1.0 - I * p.n_sup * Z);
    return std::norm(r);
}

}  // namespace pairforge
