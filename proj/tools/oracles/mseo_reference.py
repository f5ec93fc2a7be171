#!/usr/bin/env python3
"""Independent reference evaluation of the AlGaAs modified-single-effective-
oscillator dispersion model used to build data/algaas_mseo.json.

Run this to regenerate the calibration_rows block of the coefficient table.
The C++ implementation is checked against these rows (to 1e-3); the two
implementations share only the published model constants, typed separately.
"""

import json
import math

# Modified single-effective-oscillator model for Al(x)Ga(1-x)As below the
# band edge (Afromowitz, Solid State Commun. 15, 59 (1974)):
#   n^2(E) = 1 + Ed/E0 + Ed*E^2/E0^3
#            + (eta/pi)*E^4 * ln[(2*E0^2 - Eg^2 - E^2)/(Eg^2 - E^2)]
#   eta    = pi*Ed / (2*E0^3*(E0^2 - Eg^2))
# with composition polynomials (energies in eV):
E0_POLY = (3.65, 0.871, 0.179)
ED_POLY = (36.1, -2.45)
EG_POLY = (1.424, 1.266, 0.26)

# Linear band-edge shift applied to both oscillator energies (Varshni slope
# of GaAs near room temperature).
DE_DT = -2.0e-4      # eV/K
T_REF = 292.0        # K

# Soft clamp keeping the model finite through and above the band edge:
# E_eval = E - s*log(1 + exp((E - 0.96*Eg)/s)), shoulder s = 0.02 eV.
CLAMP_FRACTION = 0.96
CLAMP_SOFTNESS_EV = 0.02

HC_EV_NM = 1239.841984


def polyval(c, x):
    return sum(ci * x**i for i, ci in enumerate(c))


def soft_clamp(e, e_cl, s):
    u = (e - e_cl) / s
    # log(1+exp(u)) evaluated stably
    lse = u + math.log1p(math.exp(-u)) if u > 0 else math.log1p(math.exp(u))
    return e - s * lse


def refractive_index(x, wavelength_nm, temperature_K):
    dt = temperature_K - T_REF
    e0 = polyval(E0_POLY, x) + DE_DT * dt
    ed = polyval(ED_POLY, x)
    eg = polyval(EG_POLY, x) + DE_DT * dt
    e = HC_EV_NM / wavelength_nm
    e = soft_clamp(e, CLAMP_FRACTION * eg, CLAMP_SOFTNESS_EV)
    e2 = e * e
    eta_over_pi = ed / (2.0 * e0**3 * (e0**2 - eg**2))
    n2 = (1.0 + ed / e0 + ed * e2 / e0**3
          + eta_over_pi * e2 * e2
          * math.log((2.0 * e0**2 - eg**2 - e2) / (eg**2 - e2)))
    return math.sqrt(n2)


ROWS = [
    (0.00, 1570.0, 292.0),
    (0.00, 1550.0, 292.0),   # sanity anchor: literature GaAs ~3.374
    (0.00,  785.0, 292.0),   # above gap -> soft-clamped
    (0.11,  785.0, 292.0),   # quantum well, above gap -> soft-clamped
    (0.25,  785.0, 292.0),
    (0.25, 1570.0, 292.0),
    (0.25, 2400.0, 292.0),
    (0.45,  785.0, 292.0),
    (0.45, 1570.0, 292.0),
    (0.45, 1570.0, 320.0),
    (0.80,  785.0, 292.0),
    (0.80, 1570.0, 292.0),
    (0.80, 2400.0, 292.0),
    (1.00, 1570.0, 292.0),
]


def main():
    rows = []
    for x, lam, t in ROWS:
        n = refractive_index(x, lam, t)
        rows.append({"x": x, "wavelength_nm": lam, "temperature_K": t,
                     "n": round(n, 6)})
        print(f"x={x:4.2f}  lambda={lam:7.1f} nm  T={t:5.1f} K  ->  n={n:.6f}")
    print()
    print(json.dumps({"calibration_rows": rows}, indent=2))


if __name__ == "__main__":
    main()
