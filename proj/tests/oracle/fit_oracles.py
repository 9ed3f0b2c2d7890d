"""Reference values for the fit tests, computed with SciPy/NumPy.

Run: python3 tests/oracle/fit_oracles.py
The printed numbers are frozen in tests/test_surge_fit.cpp and
tests/test_powerlaw_fit.cpp.
"""
import numpy as np
from scipy.optimize import curve_fit

np.set_printoptions(precision=17)
TOL = dict(ftol=1e-15, xtol=1e-15, gtol=1e-15, maxfev=100000)
JITTER = np.array([1.03, 0.97, 1.05, 0.98, 1.01, 0.96, 1.04, 0.99, 1.02, 0.95, 1.06])


def surge(b, eta_crit, b_crit):
    return eta_crit / (np.sqrt(b / b_crit) + np.sqrt(b_crit / b))


def report(name, popt, pcov):
    print(name)
    for v, s in zip(popt, np.sqrt(np.diag(pcov))):
        print(f"  {float(v)!r:>24}  +- {float(s)!r}")


# Surge curve: B = 2^16 .. 2^26, truth (0.01, 2^20), jittered.
b = 2.0 ** np.arange(16, 27)
y = surge(b, 0.01, 2.0**20) * JITTER
sig = 1e-4 * np.array([1, 2, 1, 3, 2, 0, 1, 2, 4, 1, 2], dtype=float)
p0 = [0.02, 2.0**20]
report("surge no_error", *curve_fit(surge, b, y, p0=p0, **TOL))
mean_sig = np.where(sig == 0, sig[sig > 0].mean(), sig)
eps_sig = np.where(sig == 0, 1e-15, sig)
report("surge eps_floor", *curve_fit(surge, b, y, p0=p0, sigma=eps_sig, absolute_sigma=False, **TOL))
report("surge mean_sigma", *curve_fit(surge, b, y, p0=p0, sigma=mean_sig, absolute_sigma=False, **TOL))


# Power law on T = 2^30 .. 2^37, truth (8e-5, 1, 3e5), jittered.
t = 2.0 ** np.arange(30, 38)
t_ref = np.exp(np.log(t).mean())


def law_scaled(x, a, alpha, b0):
    return a * x**alpha + b0


p = (8e-5 * t + 3e5) * JITTER[:8]
psig = 1e4 * np.array([1, 2, 0, 1, 3, 2, 5, 8], dtype=float)


def fit_law(sigma):
    # Fit in T/T_ref for conditioning, then map back: a = a' T_ref^-alpha.
    popt, pcov = curve_fit(law_scaled, t / t_ref, p, p0=[8e-5 * t_ref, 1.0, 3e5], sigma=sigma,
                           absolute_sigma=False, **TOL)
    a_s, alpha, b0 = popt
    g = np.array([[t_ref**-alpha, -a_s * t_ref**-alpha * np.log(t_ref), 0], [0, 1, 0], [0, 0, 1]])
    return np.array([a_s * t_ref**-alpha, alpha, b0]), g @ pcov @ g.T


report("powerlaw no_error", *fit_law(None))
pmean = np.where(psig == 0, psig[psig > 0].mean(), psig)
report("powerlaw mean_sigma", *fit_law(pmean))

# Fixed exponent alpha = 1 refit, mean_sigma weights.
A = np.column_stack([t, np.ones_like(t)]) / pmean[:, None]
coef, *_ = np.linalg.lstsq(A, p / pmean, rcond=None)
r = A @ coef - p / pmean
cov = np.linalg.inv(A.T @ A) * (r @ r) / (len(t) - 2)
report("refit alpha=1 mean_sigma", coef, cov)
print("  weighted residual norm", repr(float(np.sqrt(r @ r))))
