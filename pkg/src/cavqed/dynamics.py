"""Master-equation layer: propagation, steady state, spectra, correlations.

The Lindblad generator is assembled as a dense matrix acting on row-major
vectorized density matrices (dimensions here never exceed a few hundred).
Time propagation uses a fourth-order fixed-step one-step matrix applied
through binary powering, which reproduces the stepwise integration exactly
while keeping long evolutions cheap.  Two-time quantities use the quantum
regression theorem: operator-conditioned states are propagated with the
same generator as the density matrix.

Frequencies are ordinary GHz, times ns; the generator itself is in rad/ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .hilbert import StateSpace, collapse_channels, hamiltonian
from .polariton import Spectrum, SystemParams, eigenmodes
from .units import Detuning

__all__ = [
    "CorrelationTrace",
    "NumericalError",
    "liouvillian",
    "build_model",
    "evolve",
    "steady_state",
    "emission_spectrum",
    "g2_auto",
    "g2_cross",
    "expectation",
]

TWO_PI = 2.0 * math.pi

_MIN_STEP_NS = 1e-12
_STEP_SAFETY = 0.02  # fine-step size in units of 1/||L||


class NumericalError(RuntimeError):
    """Propagation or linear-algebra failure with diagnostic context."""


@dataclass
class CorrelationTrace:
    """Normalized two-time correlation sampled on a delay grid."""

    tau_ns: np.ndarray
    values: np.ndarray
    normalization: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_ns = np.asarray(self.tau_ns, dtype=float)
        if np.any(np.diff(self.tau_ns) <= 0):
            raise ValueError("delay grid must be strictly increasing")
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            worst = float(np.max(np.abs(values.imag))) if values.size else 0.0
            if worst > 1e-8 * max(1.0, float(np.max(np.abs(values.real)))):
                raise NumericalError(f"correlation trace has imaginary residue {worst}")
            values = values.real
        self.values = values.astype(float)
        if self.values.min() < -1e-8:
            raise NumericalError(f"correlation trace negative: min {self.values.min()}")


def expectation(op: np.ndarray, rho: np.ndarray) -> float:
    """Real expectation value Tr(op rho)."""
    return float(np.trace(op @ rho).real)


def liouvillian(h_ang: np.ndarray, jump_ops: list[np.ndarray]) -> np.ndarray:
    """Lindblad generator as a matrix on row-major vectorized states (rad/ns)."""
    d = h_ang.shape[0]
    ident = np.eye(d, dtype=complex)
    gen = -1j * (np.kron(h_ang, ident) - np.kron(ident, h_ang.T))
    for c in jump_ops:
        cdc = c.conj().T @ c
        gen += np.kron(c, c.conj())
        gen -= 0.5 * (np.kron(cdc, ident) + np.kron(ident, cdc.T))
    return gen


@dataclass(frozen=True)
class _Model:
    """Prebuilt operators and generator for one parameter point."""

    params: SystemParams
    detuning: Detuning
    space: StateSpace
    h_ang: np.ndarray
    channels: list
    generator: np.ndarray


def build_model(p: SystemParams, detuning: Detuning | None = None) -> _Model:
    if detuning is None:
        detuning = p.detuning()
    space = hilbert.build_space(p)
    h_ang = hamiltonian(p, detuning, space)
    channels = collapse_channels(p, space)
    jumps = [c.jump_operator for c in channels if c.rate_GHz > 0]
    return _Model(p, detuning, space, h_ang, channels, liouvillian(h_ang, jumps))


class _Propagator:
    """Binary-powered fourth-order one-step matrix for a fixed generator."""

    def __init__(self, generator: np.ndarray, step_scale_hint: float | None = None):
        self.gen = generator
        scale = float(np.linalg.norm(generator, np.inf))
        if step_scale_hint:
            scale = max(scale, step_scale_hint)
        self.rate_scale = max(scale, 1e-12)
        self.h_target = _STEP_SAFETY / self.rate_scale
        if self.h_target < _MIN_STEP_NS:
            raise NumericalError(
                f"step-size underflow: generator scale {self.rate_scale:.3e} rad/ns "
                f"needs step {self.h_target:.3e} ns < {_MIN_STEP_NS} ns"
            )
        self._cache: dict[float, np.ndarray] = {}

    def _one_step(self, h: float) -> np.ndarray:
        ident = np.eye(self.gen.shape[0], dtype=complex)
        hg = h * self.gen
        acc = ident + hg / 4.0
        acc = ident + (hg / 3.0) @ acc
        acc = ident + (hg / 2.0) @ acc
        return ident + hg @ acc

    def segment_matrix(self, dt: float) -> np.ndarray:
        """Propagator over ``dt`` as the n-th power of a fine RK4 step."""
        if dt < 0:
            raise ValueError("cannot propagate backwards")
        key = round(dt, 15)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if dt == 0.0:
            mat = np.eye(self.gen.shape[0], dtype=complex)
        else:
            n = max(1, int(math.ceil(dt / self.h_target)))
            step = self._one_step(dt / n)
            mat = _matrix_power(step, n)
        if len(self._cache) < 64:
            self._cache[key] = mat
        return mat


def _matrix_power(m: np.ndarray, n: int) -> np.ndarray:
    result = None
    base = m
    while n:
        if n & 1:
            result = base if result is None else result @ base
        n >>= 1
        if n:
            base = base @ base
    return result


def _check_state(rho: np.ndarray, where: str) -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-8:
        raise NumericalError(f"{where}: trace drifted to {tr}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise NumericalError(f"{where}: state lost hermiticity")
    lo = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if lo < -1e-8:
        raise NumericalError(f"{where}: negative eigenvalue {lo}")


def evolve(rho0: np.ndarray, p: SystemParams, t_grid_ns: np.ndarray,
           detuning: Detuning | None = None, validate: bool = True,
           model: _Model | None = None) -> np.ndarray:
    """Propagate a density matrix to every time in ``t_grid_ns``.

    The grid must be non-decreasing and start at t >= 0; the returned array
    has shape (len(t_grid), dim, dim) and, when ``validate`` is set, every
    sample is checked for trace, hermiticity and positivity.
    """
    if model is None:
        model = build_model(p, detuning)
    t_grid = np.asarray(t_grid_ns, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("time grid must be a non-empty 1-D array")
    if t_grid[0] < 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("time grid must be non-decreasing and non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    d = model.space.dim
    if rho0.shape != (d, d):
        raise ValueError(f"state has shape {rho0.shape}, expected {(d, d)}")
    prop = _Propagator(model.generator)
    out = np.empty((t_grid.size, d, d), dtype=complex)
    vec = rho0.reshape(-1).copy()
    prev = 0.0
    for i, t in enumerate(t_grid):
        dt = t - prev
        if dt > 0:
            vec = prop.segment_matrix(dt) @ vec
            prev = t
        out[i] = vec.reshape(d, d)
        if validate:
            _check_state(out[i], f"evolve at t={t} ns")
    return out


def steady_state(p: SystemParams, detuning: Detuning | None = None,
                 model: _Model | None = None) -> np.ndarray:
    """Null-space steady state of the generator, trace-normalized.

    Raises :class:`NumericalError` when the null space is degenerate (more
    than one stationary solution) or the residual exceeds 1e-10.
    """
    if model is None:
        model = build_model(p, detuning)
    gen = model.generator
    d = model.space.dim
    svals = np.linalg.svd(gen, compute_uv=False)
    tol = max(1e-12 * svals[0], 1e-14)
    null_dim = int(np.sum(svals < tol))
    if null_dim > 1:
        raise NumericalError(
            f"degenerate steady state: generator null space has dimension {null_dim}"
        )
    trace_row = np.eye(d, dtype=complex).reshape(1, -1)
    lhs = np.vstack([gen, trace_row * svals[0]])
    rhs = np.zeros(gen.shape[0] + 1, dtype=complex)
    rhs[-1] = svals[0]
    vec, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    residual = float(np.linalg.norm(gen @ vec))
    if residual > 1e-10:
        raise NumericalError(f"steady-state residual {residual:.3e} exceeds 1e-10")
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return rho


def _sources(model: _Model, source: str):
    """(label, operator, flux weight in rad/ns) for the selected output port."""
    p = model.params
    table = {
        "cavity": (model.space.a, TWO_PI * p.gamma_m_GHz),
        "exciton": (model.space.sigma, TWO_PI * p.gamma_b_GHz),
    }
    if source == "auto":
        return [(k, op, w) for k, (op, w) in table.items() if w > 0]
    if source not in table:
        raise ValueError(f"unknown emission source {source!r}")
    op, w = table[source]
    return [(source, op, w)]


def _correlation_decay(prop: _Propagator, x0: np.ndarray, probe: np.ndarray,
                       dt: float, floor: float, max_samples: int = 1 << 21):
    """Sample Tr(probe† X(tau)) on a uniform grid until it decays below floor."""
    d = probe.shape[0]
    step = prop.segment_matrix(dt)
    vec = x0.reshape(-1).copy()
    values = [np.vdot(probe, x0)]
    scale = max(abs(values[0]), 1e-300)
    block = 512
    while len(values) < max_samples:
        tail = []
        for _ in range(block):
            vec = step @ vec
            tail.append(np.vdot(probe, vec.reshape(d, d)))
        values.extend(tail)
        if max(abs(v) for v in tail) < floor * scale:
            break
    return np.asarray(values)


def emission_spectrum(p: SystemParams, detuning: Detuning | None = None,
                      grid_GHz: np.ndarray | None = None, source: str = "auto",
                      model: _Model | None = None) -> Spectrum:
    """Emission spectrum by regression propagation of the field correlation.

    S(nu) is the one-sided transform of <op†(tau) op(0)> in the steady state,
    evaluated on an absolute ordinary-frequency grid.  With ``source="auto"``
    the cavity-loss and exciton-background output ports are summed with their
    photon-flux weights, which is what a detector collecting both channels
    sees.  Output is normalized to unit peak.
    """
    if model is None:
        model = build_model(p, detuning)
    detuning = model.detuning
    grid = np.asarray(grid_GHz, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("frequency grid must have at least 3 samples")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be sorted ascending")
    modes = eigenmodes(p, detuning)
    narrowest = 2.0 * min(modes.hwhm_plus_GHz, modes.hwhm_minus_GHz)
    if narrowest > 0 and float(np.max(np.diff(grid))) > narrowest / 2.0:
        raise ValueError(
            f"grid spacing {np.max(np.diff(grid)):.3g} GHz too coarse for the "
            f"narrowest line ({narrowest:.3g} GHz FWHM); refine below half of it"
        )
    rho_ss = steady_state(p, detuning, model=model)
    omega_m = p.omega_m_GHz
    rel = grid - omega_m
    # Nyquist for the fastest surviving oscillation in the rotating frame.
    f_osc = max(float(np.max(np.abs(rel))), abs(detuning.dw_GHz), 1.0)
    f_osc += p.gamma_x_GHz + p.gamma_m_GHz
    dt = 1.0 / (8.0 * f_osc)
    prop = _Propagator(model.generator)
    total = np.zeros(grid.size)
    parts = {}
    for label, op, weight in _sources(model, source):
        flux = weight * expectation(op.conj().T @ op, rho_ss)
        if flux <= 1e-30:
            continue
        corr = _correlation_decay(prop, op @ rho_ss, op, dt, floor=1e-8)
        tau = dt * np.arange(corr.size)
        w = np.full(corr.size, dt)
        w[0] = w[-1] = 0.5 * dt
        kernel = np.exp(-2j * math.pi * np.outer(rel, tau))
        part = weight * (kernel @ (w * corr)).real
        parts[label] = part
        total = total + part
    if not parts:
        raise NumericalError("no emission: every output port has zero flux")
    peak = float(total.max())
    if peak <= 0:
        raise NumericalError("spectrum peak is non-positive")
    if total.min() < -1e-6 * peak:
        raise NumericalError(f"spectrum dipped negative: {total.min() / peak:.2e} of peak")
    total = np.maximum(total, 0.0)
    return Spectrum(
        grid, total / peak,
        components={k: v / peak for k, v in parts.items()},
        meta={"frame": "rotating@omega_m", "omega_m_GHz": omega_m,
              "detuning_nm": detuning.dl_nm, "source": source, "tau_step_ns": dt},
    )


def _propagate_probe(model: _Model, x0: np.ndarray, probe: np.ndarray,
                     tau_grid: np.ndarray) -> np.ndarray:
    prop = _Propagator(model.generator)
    d = model.space.dim
    vec = x0.reshape(-1).copy()
    out = np.empty(tau_grid.size, dtype=complex)
    prev = 0.0
    for i, t in enumerate(tau_grid):
        dt = t - prev
        if dt > 0:
            vec = prop.segment_matrix(dt) @ vec
            prev = t
        out[i] = np.vdot(probe, vec.reshape(d, d))
    return out


def g2_auto(p: SystemParams, detuning: Detuning | None = None,
            tau_grid_ns: np.ndarray | None = None, source: str = "cavity",
            normalization: str = "stationary", rho0: np.ndarray | None = None,
            model: _Model | None = None) -> CorrelationTrace:
    """Normalized intensity autocorrelation of one output port.

    ``normalization="stationary"`` divides by the squared steady-state
    intensity (the usual CW definition); ``"time-local"`` divides by
    <n(0)><n(tau)> instead, which is the right reference when correlating
    from a supplied non-stationary ``rho0``.
    """
    if model is None:
        model = build_model(p, detuning)
    tau = np.asarray(tau_grid_ns, dtype=float)
    if tau.ndim != 1 or tau.size == 0 or tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be increasing and non-negative")
    (label, op, _weight), = _sources(model, source)
    n_op = op.conj().T @ op
    rho = steady_state(p, model=model) if rho0 is None else np.asarray(rho0, complex)
    n_mean = expectation(n_op, rho)
    if n_mean <= 1e-30:
        raise NumericalError(f"zero emission from source {label!r}: cannot normalize g2")
    x0 = op @ rho @ op.conj().T
    raw = _propagate_probe(model, x0, n_op, tau)
    if normalization == "stationary":
        denom = np.full(tau.size, n_mean**2)
    elif normalization == "time-local":
        rhos = evolve(rho, p, tau, validate=False, model=model)
        denom = n_mean * np.array([expectation(n_op, r) for r in rhos])
        if np.any(denom <= 1e-30):
            raise NumericalError("time-local intensity vanished along the trace")
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return CorrelationTrace(tau, raw / denom, normalization=float(n_mean**2),
                            meta={"kind": "auto", "source": label,
                                  "normalization": normalization})


def g2_cross(p: SystemParams, detuning: Detuning | None = None,
             tau_grid_ns: np.ndarray | None = None,
             model: _Model | None = None) -> CorrelationTrace:
    """Two-sided exciton/cavity cross-correlation.

    Positive delays condition on an exciton detection and probe the cavity
    intensity a delay tau later; negative delays mirror the roles.  The
    supplied grid must be non-negative; the returned trace covers both signs.
    """
    if model is None:
        model = build_model(p, detuning)
    tau = np.asarray(tau_grid_ns, dtype=float)
    if tau.ndim != 1 or tau.size == 0 or tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be increasing and non-negative")
    space = model.space
    a, sig = space.a, space.sigma
    n_m = a.conj().T @ a
    n_x = sig.conj().T @ sig
    rho = steady_state(p, model=model)
    mean_x, mean_m = expectation(n_x, rho), expectation(n_m, rho)
    denom = mean_x * mean_m
    if denom <= 1e-30:
        raise NumericalError("cross-correlation undefined: one stream has zero rate")
    pos = _propagate_probe(model, sig @ rho @ sig.conj().T, n_m, tau) / denom
    neg = _propagate_probe(model, a @ rho @ a.conj().T, n_x, tau) / denom
    if tau[0] == 0.0:
        full_tau = np.concatenate([-tau[::-1], tau[1:]])
        values = np.concatenate([neg[::-1], pos[1:]])
    else:
        full_tau = np.concatenate([-tau[::-1], tau])
        values = np.concatenate([neg[::-1], pos])
    return CorrelationTrace(full_tau, values, normalization=float(denom),
                            meta={"kind": "cross", "positive_side": "exciton_then_cavity"})
