"""Independent high-precision values for the off-resonant projection probability.

Evaluates 1 - exp(-g W^2 T / (2 (W^2 + D^2))) with 50-digit arithmetic and
solves the calibration anchor by plain bisection (no closed-form inversion).
Values printed here are frozen into the Rust tests.
"""
from mpmath import mp, mpf, exp, pi

mp.dps = 50


def crosstalk(omega, delta, gamma, t):
    return 1 - exp(-gamma * omega**2 * t / (2 * (omega**2 + delta**2)))


# Single-transition golden: W = g, D = 10 g, g = 2 pi 13.3, T = 3.7 us.
g = 2 * pi * mpf("13.3")
print("golden_gamma", mp.nstr(crosstalk(g, 10 * g, g, mpf("3.7")), 20))

# Calibration anchor: D = 16 GHz (angular MHz), target 0.01,
# g = 1/(12 ns) in 1/us, T = 0.6 us. Bisection on W.
gamma = 1 / mpf("0.012")
t = mpf("0.6")
delta = 2 * pi * 1000 * 16
lo, hi = mpf(0), mpf(10) ** 6
for _ in range(300):
    mid = (lo + hi) / 2
    if crosstalk(mid, delta, gamma, t) < mpf("0.01"):
        lo = mid
    else:
        hi = mid
print("msr_rabi", mp.nstr(lo, 20))

# SSR 1% safe detuning in GHz (W = g, T = 3.7), bisection on D.
t = mpf("3.7")
lo, hi = mpf(0), mpf(10) ** 7
for _ in range(300):
    mid = (lo + hi) / 2
    if crosstalk(gamma, mid, gamma, t) > mpf("0.01"):
        lo = mid
    else:
        hi = mid
print("ssr_safe_ghz", mp.nstr(hi / (2 * pi * 1000), 20))
