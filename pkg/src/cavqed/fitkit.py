"""Nonlinear least-squares engine and the standard fit models.

The Levenberg-Marquardt core is self-contained (damping 1e-3 start, x10 on
rejection, /10 on acceptance, Marquardt diagonal scaling) and accepts an
analytic Jacobian or falls back to central differences with a 1e-6 relative
step.  On top of it sit the four models the analysis pipeline needs:

* multi-Lorentzian (optionally Gaussian-blurred, i.e. Voigt) spectra,
* polariton anti-crossing peak positions versus detuning,
* detuning-dependent lifetime from the Lorentzian emission-rate law,
* (IRF-convolved) exponential decays as Poisson maximum likelihood.

Decay fits minimize the Poisson deviance, which is exact maximum likelihood
for counting data while reusing the least-squares machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, voigt_profile

from . import polariton
from .hbt import Histogram
from .polariton import Spectrum, SystemParams
from .units import (
    Detuning,
    detuning_to_frequency,
    wavelength_to_frequency,
)

__all__ = [
    "FitResult",
    "FitError",
    "levenberg_marquardt",
    "fit_lorentzians",
    "fit_anticrossing",
    "fit_lifetime_curve",
    "fit_decay",
    "fit_damped_modes",
    "peak_locations",
]

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class FitError(RuntimeError):
    """Unusable input or irrecoverable failure inside a fit."""


@dataclass
class FitResult:
    """Best-fit parameters with Jacobian-based uncertainties."""

    params: dict
    stderr: dict
    residual_norm: float
    n_iterations: int
    converged: bool
    message: str = ""
    derived: dict = field(default_factory=dict)
    covariance: np.ndarray | None = None

    def __getitem__(self, name: str) -> float:
        return self.params[name]


def _fd_jacobian(residual, x, r0, rel_step=1e-6):
    """Central-difference Jacobian, step 1e-6 relative (absolute floor 1e-9)."""
    n = x.size
    jac = np.empty((r0.size, n))
    for k in range(n):
        h = rel_step * max(abs(x[k]), 1e-3)
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (residual(xp) - residual(xm)) / (2.0 * h)
    return jac


def levenberg_marquardt(residual, x0, jacobian=None, max_iter=200,
                        gtol=1e-12, ftol=1e-14, xtol=1e-12, lam0=1e-3,
                        n_data=None):
    """Minimize ||residual(x)||^2; returns (x, covariance, info dict).

    The damping parameter multiplies the diagonal of J'J, starts at ``lam0``
    and moves by factors of 10; a step is accepted only if it lowers the sum
    of squares, so the residual norm is non-increasing over accepted steps.
    ``n_data`` overrides the row count used for the covariance scale when the
    residual vector carries extra constraint rows.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual(x), dtype=float)
    cost = float(r @ r)
    lam = lam0
    n_iter = 0
    converged = False
    message = "max iterations reached"
    jac = None
    for n_iter in range(1, max_iter + 1):
        jac = jacobian(x) if jacobian is not None else _fd_jacobian(residual, x, r)
        grad = jac.T @ r
        if np.max(np.abs(grad)) < gtol * max(1.0, cost):
            converged, message = True, "gradient below tolerance"
            break
        a = jac.T @ jac
        diag = np.maximum(np.diag(a), 1e-14 * max(np.max(np.diag(a)), 1.0))
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(a + lam * np.diag(diag), -grad, rcond=None)
            x_new = x + step
            r_new = np.asarray(residual(x_new), dtype=float)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                rel_drop = (cost - cost_new) / max(cost, 1e-300)
                rel_step = np.max(np.abs(step) / np.maximum(np.abs(x_new), 1e-12))
                x, r, cost = x_new, r_new, cost_new
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if rel_drop < ftol or rel_step < xtol:
                    converged, message = True, "cost change below tolerance"
                break
            lam *= 10.0
        if not accepted:
            converged, message = True, "damping exhausted at a local minimum"
            break
        if converged:
            break
    if jac is None:
        jac = jacobian(x) if jacobian is not None else _fd_jacobian(residual, x, r)
    m, n = jac.shape
    if n_data is not None:
        m = n_data
    cov = None
    if m > n:
        try:
            cov = np.linalg.inv(jac.T @ jac) * cost / (m - n)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(jac.T @ jac) * cost / (m - n)
    return x, cov, {"n_iterations": n_iter, "converged": converged,
                    "message": message, "residual_norm": math.sqrt(cost)}


def _result(names, x, cov, info, derived=None) -> FitResult:
    stderr = {}
    for i, name in enumerate(names):
        err = math.sqrt(max(cov[i, i], 0.0)) if cov is not None else float("nan")
        stderr[name] = err
    return FitResult(params=dict(zip(names, x)), stderr=stderr,
                     residual_norm=info["residual_norm"],
                     n_iterations=info["n_iterations"],
                     converged=info["converged"], message=info["message"],
                     derived=derived or {}, covariance=cov)


# ---------------------------------------------------------------------------
# peak finding / initialization heuristics
# ---------------------------------------------------------------------------

def peak_locations(axis: np.ndarray, intensity: np.ndarray, n_peaks: int,
                   min_separation: float | None = None) -> np.ndarray:
    """Locations of the ``n_peaks`` tallest local maxima, parabola-refined.

    Light smoothing suppresses single-sample noise spikes; the returned
    positions are sorted ascending.
    """
    axis = np.asarray(axis, float)
    y = np.asarray(intensity, float)
    if axis.size < 5:
        raise FitError("need at least 5 samples to locate peaks")
    kernel = np.ones(5) / 5.0
    ys = np.convolve(y, kernel, mode="same")
    if min_separation is None:
        min_separation = (axis[-1] - axis[0]) / (8.0 * max(n_peaks, 1))
    interior = np.nonzero((ys[1:-1] >= ys[:-2]) & (ys[1:-1] > ys[2:]))[0] + 1
    order = interior[np.argsort(ys[interior])[::-1]]
    chosen: list[int] = []
    for idx in order:
        if all(abs(axis[idx] - axis[j]) >= min_separation for j in chosen):
            chosen.append(idx)
        if len(chosen) == n_peaks:
            break
    if len(chosen) < n_peaks:
        raise FitError(f"found only {len(chosen)} of {n_peaks} requested peaks")
    refined = []
    for idx in chosen:
        i = min(max(idx, 1), axis.size - 2)
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if abs(denom) > 0 else 0.0
        shift = float(np.clip(shift, -1.0, 1.0))
        refined.append(axis[i] + shift * (axis[min(i + 1, axis.size - 1)] - axis[i]))
    return np.sort(np.asarray(refined))


def _halfmax_width(axis, y, center, floor) -> float:
    """Rough FWHM of the feature at ``center`` from half-max crossings."""
    i = int(np.argmin(np.abs(axis - center)))
    half = floor + 0.5 * (y[i] - floor)
    j = i
    while j + 1 < y.size and y[j] > half:
        j += 1
    k = i
    while k - 1 >= 0 and y[k] > half:
        k -= 1
    width = axis[j] - axis[k]
    span = axis[-1] - axis[0]
    return float(np.clip(width, span / y.size, span / 2.0))


# ---------------------------------------------------------------------------
# multi-Lorentzian / Voigt spectra
# ---------------------------------------------------------------------------

def _line_profile(x, center, fwhm, area, sigma_g):
    gamma = max(abs(fwhm), 1e-12) / 2.0
    return area * voigt_profile(x - center, sigma_g, gamma)


def fit_lorentzians(data: Spectrum, n_peaks: int, init: dict | None = None,
                    gaussian_fwhm: float = 0.0) -> FitResult:
    """Fit a sum of 1..3 Lorentzian peaks plus a constant background.

    With ``gaussian_fwhm`` > 0 each peak is the Lorentzian convolved with a
    Gaussian of that FWHM (a Voigt profile with the Gaussian part held
    fixed), which deconvolves a known instrument response: the reported
    ``fwhm_k`` are then the underlying Lorentzian widths.  Per-peak areas and
    area fractions are reported in ``derived``.
    """
    if not 1 <= n_peaks <= 3:
        raise FitError("n_peaks must be 1, 2 or 3")
    x = np.asarray(data.axis, float)
    y = np.asarray(data.intensity, float)
    if x.size < 3 * n_peaks + 1:
        raise FitError("not enough samples for the requested peak count")
    sigma_g = gaussian_fwhm * _FWHM_TO_SIGMA
    if init is None:
        floor = float(np.percentile(y, 5))
        centers = peak_locations(x, y, n_peaks)
        widths, areas = [], []
        for c in centers:
            w = _halfmax_width(x, y, c, floor)
            h = float(y[np.argmin(np.abs(x - c))] - floor)
            widths.append(w)
            areas.append(max(h, 1e-12) * math.pi * w / 2.0)
        p0 = [floor]
        for c, w, a in zip(centers, widths, areas):
            p0 += [c, w, a]
    else:
        p0 = [init.get("background", 0.0)]
        for k in range(1, n_peaks + 1):
            p0 += [init[f"center_{k}"], init[f"fwhm_{k}"], init[f"area_{k}"]]
    p0 = np.asarray(p0, float)

    def model(p):
        out = np.full_like(x, p[0])
        for k in range(n_peaks):
            c, w, a = p[1 + 3 * k: 4 + 3 * k]
            out = out + _line_profile(x, c, w, a, sigma_g)
        return out

    def residual(p):
        return model(p) - y

    jacobian = None
    if sigma_g == 0.0:

        def jacobian(p):
            jac = np.empty((x.size, p.size))
            jac[:, 0] = 1.0
            for k in range(n_peaks):
                c, w, a = p[1 + 3 * k: 4 + 3 * k]
                h = max(abs(w), 1e-12) / 2.0
                u = x - c
                denom = u * u + h * h
                base = (a / math.pi) * h / denom
                jac[:, 1 + 3 * k] = (a / math.pi) * h * 2.0 * u / denom**2
                jac[:, 2 + 3 * k] = 0.5 * (a / math.pi) * (u * u - h * h) / denom**2 * np.sign(w if w != 0 else 1.0)
                jac[:, 3 + 3 * k] = base / a if a != 0 else (1.0 / math.pi) * h / denom
            return jac

    sol, cov, info = levenberg_marquardt(residual, p0, jacobian=jacobian)
    names = ["background"]
    for k in range(1, n_peaks + 1):
        names += [f"center_{k}", f"fwhm_{k}", f"area_{k}"]
    sol = sol.copy()
    for k in range(n_peaks):
        sol[2 + 3 * k] = abs(sol[2 + 3 * k])
    areas = np.array([sol[3 + 3 * k] for k in range(n_peaks)])
    total = areas.sum()
    derived = {"gaussian_fwhm": gaussian_fwhm}
    for k in range(n_peaks):
        derived[f"area_fraction_{k + 1}"] = float(areas[k] / total) if total else float("nan")
    return _result(names, sol, cov, info, derived)


# ---------------------------------------------------------------------------
# anti-crossing
# ---------------------------------------------------------------------------

def _branch_wavelengths(dl_nm, g, lambda_x, gamma_x, gamma_m):
    """Model (short, long) polariton wavelengths at each wavelength detuning."""
    out_blue = np.empty_like(dl_nm)
    out_red = np.empty_like(dl_nm)
    for i, dl in enumerate(dl_nm):
        p = SystemParams(lambda_x_nm=lambda_x, lambda_m_nm=lambda_x - dl,
                         g_GHz=abs(g), gamma_x_GHz=abs(gamma_x),
                         gamma_m_GHz=abs(gamma_m),
                         gamma_b_GHz=min(abs(gamma_x), 0.0))
        modes = polariton.eigenmodes(p, Detuning.from_nm(dl, lambda_x))
        out_blue[i] = wavelength_to_frequency(1.0) / modes.omega_plus_GHz
        out_red[i] = wavelength_to_frequency(1.0) / modes.omega_minus_GHz
    return out_blue, out_red


def fit_anticrossing(dl_nm: np.ndarray, lambda_nm: np.ndarray,
                     init: dict | None = None, fit_offset: bool = False,
                     fit_linewidths: bool = False) -> FitResult:
    """Fit measured polariton wavelengths versus detuning.

    ``dl_nm``/``lambda_nm`` hold one row per measured peak (several peaks may
    share a detuning).  Free parameters: the coupling ``g_GHz`` and the
    exciton wavelength anchor ``lambda_x_nm`` that calibrates the cavity
    position lambda_m = lambda_x - dl.  The linewidths entering the complex
    splitting are held at their supplied values by default (peak positions
    barely constrain them, and they are measured independently from the
    far-detuned spectra); ``fit_linewidths=True`` frees them anyway.
    ``fit_offset`` adds a global shift of the detuning axis (off by
    default).  Points are assigned to a branch once, at the initial
    parameters, choosing by wavelength ordering at the largest detuning.
    """
    dl = np.asarray(dl_nm, float)
    lam = np.asarray(lambda_nm, float)
    if dl.size != lam.size or dl.size < 6:
        raise FitError("need at least 6 (detuning, wavelength) points")
    if np.ptp(dl) <= 0:
        raise FitError("all points at a single detuning cannot constrain a crossing")
    init = dict(init or {})
    lambda_x0 = init.get("lambda_x_nm", float(np.median(lam)))
    gamma_x0 = init.get("gamma_x_GHz", 8.5)
    gamma_m0 = init.get("gamma_m_GHz", 24.1)
    if "g_GHz" in init:
        g0 = init["g_GHz"]
    else:
        # Smallest observed gap between simultaneous peaks, as frequency.
        gaps = []
        for d in np.unique(dl):
            ls = np.sort(lam[dl == d])
            if ls.size >= 2:
                gaps.append(detuning_to_frequency(ls[-1] - ls[0], lambda_x0))
        g0 = 0.5 * min(gaps) if gaps else 10.0
    names = ["g_GHz", "lambda_x_nm"]
    p0 = [g0, lambda_x0]
    if fit_linewidths:
        names += ["gamma_x_GHz", "gamma_m_GHz"]
        p0 += [gamma_x0, gamma_m0]
    if fit_offset:
        names.append("dl_offset_nm")
        p0.append(init.get("dl_offset_nm", 0.0))
    p0 = np.asarray(p0, float)

    def unpack(p):
        g, lx = p[0], p[1]
        gx, gm = (p[2], p[3]) if fit_linewidths else (gamma_x0, gamma_m0)
        shift = p[-1] if fit_offset else 0.0
        return g, lx, gx, gm, shift

    blue0, red0 = _branch_wavelengths(dl, g0, lambda_x0, gamma_x0, gamma_m0)
    on_blue = np.abs(lam - blue0) <= np.abs(lam - red0)
    if on_blue.all() or (~on_blue).all():
        raise FitError("data lie entirely on one polariton branch")

    def residual(p):
        g, lx, gx, gm, shift = unpack(p)
        blue, red = _branch_wavelengths(dl + shift, g, lx, gx, gm)
        return np.where(on_blue, lam - blue, lam - red)

    sol, cov, info = levenberg_marquardt(residual, p0)
    g, lx, gx, gm, shift = unpack(sol)
    g, gx, gm = abs(g), abs(gx), abs(gm)
    derived = {"gamma_x_GHz": gx, "gamma_m_GHz": gm,
               "linewidths_fixed": not fit_linewidths}
    try:
        split_GHz, split_nm = polariton.rabi_splitting(SystemParams(
            lambda_x_nm=lx, lambda_m_nm=lx, g_GHz=g,
            gamma_x_GHz=gx, gamma_m_GHz=gm, gamma_b_GHz=0.0))
        derived.update(min_splitting_GHz=split_GHz, min_splitting_nm=split_nm)
    except polariton.WeakCouplingError:
        derived.update(min_splitting_GHz=float("nan"), min_splitting_nm=float("nan"))
    res = _result(names, sol, cov, info, derived)
    res.params["g_GHz"] = g
    return res


# ---------------------------------------------------------------------------
# lifetime versus detuning
# ---------------------------------------------------------------------------

def fit_lifetime_curve(dl_nm: np.ndarray, tau_ns: np.ndarray,
                       gamma_m_GHz: float = 24.1, lambda_ref_nm: float = 942.5,
                       weights: np.ndarray | None = None,
                       init: dict | None = None) -> FitResult:
    """Fit the Lorentzian lifetime-versus-detuning law for g and gamma_b.

    The model is 1/(2 pi tau) = gamma_b + gamma_m g^2/(dw^2 + (gamma_m/2)^2);
    the cavity linewidth is held fixed (it is measured independently).  By
    default residuals are relative, reflecting a constant fractional error on
    lifetimes spanning orders of magnitude; pass ``weights`` (1/sigma) to
    override.
    """
    dl = np.asarray(dl_nm, float)
    tau = np.asarray(tau_ns, float)
    if dl.size != tau.size or dl.size < 3:
        raise FitError("need at least 3 (detuning, lifetime) points")
    if np.unique(np.abs(dl)).size < 2:
        raise FitError("all points at the same |detuning| cannot constrain g")
    if np.any(tau <= 0):
        raise FitError("lifetimes must be positive")
    w = np.asarray(weights, float) if weights is not None else 1.0 / tau
    dw = detuning_to_frequency(dl, lambda_ref_nm)
    denom = dw**2 + (gamma_m_GHz / 2.0) ** 2
    init = dict(init or {})
    gamma_b0 = init.get("gamma_b_GHz", 1.0 / (2.0 * math.pi * float(np.max(tau))))
    g0 = init.get("g_GHz")
    if g0 is None:
        i = int(np.argmin(tau))
        excess = max(1.0 / (2.0 * math.pi * tau[i]) - gamma_b0, 1e-6)
        g0 = math.sqrt(excess * denom[i] / gamma_m_GHz)

    def model(p):
        g, gb = p
        return 1.0 / (2.0 * math.pi * (abs(gb) + gamma_m_GHz * g * g / denom))

    def residual(p):
        return (model(p) - tau) * w

    def jacobian(p):
        g, gb = p
        gtot = abs(gb) + gamma_m_GHz * g * g / denom
        base = -1.0 / (2.0 * math.pi * gtot**2)
        jac = np.empty((dl.size, 2))
        jac[:, 0] = base * (2.0 * gamma_m_GHz * g / denom) * w
        jac[:, 1] = base * math.copysign(1.0, gb) * w
        return jac

    sol, cov, info = levenberg_marquardt(residual, np.array([g0, gamma_b0]), jacobian=jacobian)
    sol = np.abs(sol)
    return _result(["g_GHz", "gamma_b_GHz"], sol, cov, info)


# ---------------------------------------------------------------------------
# exponential decays (Poisson maximum likelihood)
# ---------------------------------------------------------------------------

def _decay_kernel(t, tau, t0, sigma):
    """Exponential decay starting at t0, optionally Gaussian-blurred."""
    tau = max(abs(tau), 1e-9)
    if sigma <= 0:
        u = t - t0
        return np.where(u >= 0, np.exp(-np.clip(u, 0, None) / tau), 0.0)
    arg = (sigma / tau - (t - t0) / sigma) / math.sqrt(2.0)
    # Exponentially-modified Gaussian; log-form keeps the product stable.
    log_pre = sigma**2 / (2.0 * tau**2) - (t - t0) / tau
    out = np.zeros_like(t)
    ok = arg < 25.0
    out[ok] = 0.5 * np.exp(log_pre[ok]) * erfc(arg[ok])
    return out


def fit_decay(h, model: str = "mono", irf_fwhm_ns: float | None = None,
              init: dict | None = None, fix_t0: float | None = None) -> FitResult:
    """Poisson maximum-likelihood fit of an exponential decay histogram.

    ``h`` is a :class:`~cavqed.hbt.Histogram` or a ``(centers, counts)``
    pair.  ``model`` is ``"mono"`` (amplitude, tau, t0, background) or
    ``"bi"`` (two amplitude/tau pairs).  Passing ``irf_fwhm_ns`` convolves
    the model with the known Gaussian instrument response, which removes the
    bias a finite detector IRF imprints on fast decays.  Amplitudes may be
    negative (recovery dips); the mean is floored just above zero so the
    likelihood stays defined.
    """
    if isinstance(h, Histogram):
        t, counts = h.centers_ns, np.asarray(h.counts, float)
    else:
        t, counts = np.asarray(h[0], float), np.asarray(h[1], float)
    if t.size < 10:
        raise FitError("need at least 10 bins to fit a decay")
    sigma = (irf_fwhm_ns or 0.0) * _FWHM_TO_SIGMA
    init = dict(init or {})
    # Background: median of the lowest-decile bins, robust to slow decays
    # that never return to baseline inside the window.
    decile = max(t.size // 10, 3)
    b0 = init.get("background",
                  max(float(np.median(np.sort(counts)[:decile])), 1e-3))
    i_peak = int(np.argmax(counts))
    t0_default = t[i_peak] - 2.0 * sigma if sigma > 0 else float(t[0])
    if fix_t0 is None and sigma == 0 and "t0_ns" not in init:
        # Without a response model the onset is degenerate with the
        # amplitude; pin it at the start of the data.
        fix_t0 = t0_default
    t0_0 = fix_t0 if fix_t0 is not None else init.get("t0_ns", t0_default)
    # Log-linear regression over the top decade above background seeds tau.
    tail = counts[i_peak:] - b0
    top = max(float(tail[0]), 1.0)
    pos = np.nonzero(tail > 0.1 * top)[0]
    if pos.size >= 3:
        tt = t[i_peak:][pos] - t[i_peak]
        slope = np.polyfit(tt, np.log(np.maximum(tail[pos], 1e-12)), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else (t[-1] - t[0]) / 5.0
    else:
        tau0 = (t[-1] - t[0]) / 5.0
    tau0 = init.get("tau_ns", init.get("tau1_ns", abs(tau0)))
    a0 = init.get("amplitude", init.get("amplitude_1", float(counts[i_peak] - b0)))

    if model == "mono":
        names = ["amplitude", "tau_ns", "t0_ns", "background"]
        p0 = np.array([a0, tau0, t0_0, b0])
    elif model == "bi":
        names = ["amplitude_1", "tau1_ns", "amplitude_2", "tau2_ns", "t0_ns", "background"]
        p0 = np.array([0.7 * a0, tau0,
                       init.get("amplitude_2", 0.3 * a0),
                       init.get("tau2_ns", 3.0 * tau0), t0_0, b0])
    else:
        raise FitError("model must be 'mono' or 'bi'")
    if fix_t0 is not None:
        i_t0 = names.index("t0_ns")
        names = [n for n in names if n != "t0_ns"]
        p0 = np.delete(p0, i_t0)

    floor = 1e-9

    def raw_mean(p):
        q = list(p)
        if fix_t0 is not None:
            q.insert(i_t0, fix_t0)
        if model == "mono":
            a, tau, t0, b = q
            return b + a * _decay_kernel(t, tau, t0, sigma)
        a1, t1, a2, t2, t0, b = q
        return (b + a1 * _decay_kernel(t, t1, t0, sigma)
                + a2 * _decay_kernel(t, t2, t0, sigma))

    def residual(p):
        mu_raw = raw_mean(p)
        mu = np.maximum(mu_raw, floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(counts > 0, counts * np.log(counts / mu), 0.0)
        dev = 2.0 * (term - (counts - mu))
        out = np.sign(counts - mu) * np.sqrt(np.maximum(dev, 0.0))
        # Negative model means are unphysical; the penalty keeps a gradient
        # alive where the likelihood floor alone would go flat.
        return np.concatenate([out, np.minimum(mu_raw - floor, 0.0)])

    sol, cov, info = levenberg_marquardt(residual, p0, n_data=t.size)
    sol = sol.copy()
    for i, name in enumerate(names):
        if name.startswith("tau"):
            sol[i] = abs(sol[i])
    result = _result(names, sol, cov, info)
    if model == "bi":
        t1, t2 = result.params["tau1_ns"], result.params["tau2_ns"]
        if abs(t1 - t2) < 0.05 * 0.5 * (t1 + t2):
            result.message = (result.message +
                              "; degenerate bi-exponential: tau1 ~= tau2").lstrip("; ")
            result.derived["degenerate"] = True
    return result


# ---------------------------------------------------------------------------
# damped-mode extraction from uniformly sampled complex traces
# ---------------------------------------------------------------------------

def fit_damped_modes(values: np.ndarray, dt: float, n_modes: int):
    """Linear-prediction (Prony) estimate of damped complex modes.

    For data v[j] = sum_k c_k exp(s_k * j * dt) returns the continuous-time
    ``s_k`` (rad/ns if dt is ns) sorted by imaginary part.  Exact for
    noise-free traces with at least ``2 n_modes`` samples; intended for
    extracting oscillation frequencies and decay rates from regression
    correlation traces.
    """
    v = np.asarray(values)
    if v.size < 2 * n_modes + 1:
        raise FitError("too few samples for the requested mode count")
    cols = [v[n_modes - m: v.size - m] for m in range(1, n_modes + 1)]
    a, *_ = np.linalg.lstsq(np.stack(cols, axis=1), -v[n_modes:], rcond=None)
    roots = np.roots(np.concatenate([[1.0], a]))
    s = np.log(roots) / dt
    return s[np.argsort(s.imag)]
