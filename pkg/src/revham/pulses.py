"""Pulse waveforms: exact engineered pulses, fitted lab-friendly shapes, STIRAP.

A :class:`PulseSet` stores two base waveforms on a nominal clock plus per-leg
amplitude and time-stretch factors, so perturbed copies of the same pulses can
be evaluated together in vectorized sweeps::

    Omega_k(t) = amplitude[k] * f_k(t / stretch[k])

Base waveforms are zero outside their ``support`` window (the pulse generator
is off).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import rydberg_omegas
from .frames import ScheduleParams

LEGS = ((1, 2), (2, 3))
ANTISYMMETRIC = "antisymmetric"  # H = i O1 (|2><1| - |1><2|) + i O2 (|2><3| - |3><2|)
SYMMETRIC = "symmetric"          # H = O12 |1><2| + O23 |2><3| + h.c.
CONVENTIONS = (ANTISYMMETRIC, SYMMETRIC)

# reference fitted-pulse coefficients, dimensionless (t/T, Omega*T)
PAPER_OMEGA1 = (3.154, 5.939, 0.02523, 1.686, 6.531, 0.3177, 0.534)
PAPER_OMEGA2 = (-0.9443, 0.3185, 0.1848, -2.95, 0.7233, 0.2004)


@dataclass(frozen=True)
class PulseSet:
    """Rabi-frequency waveforms on the legs ``|1>-|2>`` and ``|2>-|3>``."""

    waveforms: tuple
    convention: str
    T: float = 1.0
    duration: Optional[float] = None
    amplitude: tuple = (1.0, 1.0)
    stretch: tuple = (1.0, 1.0)
    support: Optional[tuple] = None
    breakpoints: tuple = ((), ())
    source: str = "custom"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown phase convention {self.convention!r}; expected one of {CONVENTIONS}")
        if self.duration is None:
            object.__setattr__(self, "duration", float(self.T))
        if len(self.waveforms) != 2:
            raise ValueError("a pulse set has exactly two legs")

    def omega(self, leg: int, t) -> np.ndarray:
        """Waveform of leg 0 (``|1>-|2>``) or 1 (``|2>-|3>``) at times ``t``."""
        t = np.asarray(t, float)
        u = t / self.stretch[leg]
        if self.support is None:
            return self.amplitude[leg] * np.asarray(self.waveforms[leg](u), float)
        lo, hi = self.support
        inside = (u >= lo) & (u <= hi)
        return np.where(inside, self.amplitude[leg] * np.asarray(self.waveforms[leg](np.clip(u, lo, hi)), float), 0.0)

    def omegas(self, t):
        return self.omega(0, t), self.omega(1, t)

    def discontinuities(self) -> list:
        """Times in ``(0, duration)`` where a waveform may jump."""
        points = set()
        for leg in (0, 1):
            marks = list(self.breakpoints[leg])
            if self.support is not None:
                marks += list(self.support)
            for b in marks:
                tb = b * self.stretch[leg]
                if 0 < tb < self.duration:
                    points.add(float(tb))
        return sorted(points)

    def scaled(self, amplitude=(1.0, 1.0), stretch=(1.0, 1.0), duration=None) -> "PulseSet":
        """Copy with amplitude/stretch factors multiplied in."""
        return replace(
            self,
            amplitude=tuple(a * b for a, b in zip(self.amplitude, amplitude)),
            stretch=tuple(a * b for a, b in zip(self.stretch, stretch)),
            duration=self.duration if duration is None else float(duration),
        )


# --- waveform models -------------------------------------------------------

def piecewise_sine(t, params) -> np.ndarray:
    """``A1 sin(w1 t - p1)`` for ``t <= b``, ``A2 sin(w2 t - p2)`` after."""
    A1, w1, p1, A2, w2, p2, b = params
    t = np.asarray(t, float)
    return np.where(t <= b, A1 * np.sin(w1 * t - p1), A2 * np.sin(w2 * t - p2))


def gaussian_sum(t, params) -> np.ndarray:
    """``sum_k a_k exp(-((t - c_k) / w_k)^2)`` over parameter triples."""
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    for a, c, w in np.reshape(params, (-1, 3)):
        out = out + a * np.exp(-(((t - c) / w) ** 2))
    return out


def _sine_jacobian(t, params):
    A, w, p = params
    arg = w * t - p
    s, c = np.sin(arg), np.cos(arg)
    return np.stack([s, A * t * c, -A * c], axis=-1)


def _gaussian_jacobian(t, params):
    cols = []
    for a, c, w in np.reshape(params, (-1, 3)):
        z = (t - c) / w
        g = np.exp(-z * z)
        cols += [g, a * g * 2 * z / w, a * g * 2 * z * z / w]
    return np.stack(cols, axis=-1)


# --- Levenberg-Marquardt --------------------------------------------------

class FitError(RuntimeError):
    """Fit failed; ``params`` holds the best parameters reached."""

    def __init__(self, message, params):
        super().__init__(message)
        self.params = np.asarray(params, float)


@dataclass
class FitResult:
    params: np.ndarray
    residual_rms: float
    iterations: int = 0
    converged: bool = True
    grad_norm: float = 0.0


def levenberg_marquardt(residual: Callable, jacobian: Callable, x0, bounds=None,
                        gtol: float = 1e-8, max_iter: int = 500) -> FitResult:
    """Damped Gauss-Newton with Marquardt diagonal scaling and box projection.

    Stops when the infinity norm of the gradient ``J^T r`` drops below
    ``gtol``, when the step no longer changes ``x`` in floating point, or after
    ``max_iter`` iterations.
    """
    x = np.asarray(x0, float).copy()
    lo, hi = (np.full_like(x, -np.inf), np.full_like(x, np.inf)) if bounds is None else map(np.asarray, bounds)
    x = np.clip(x, lo, hi)
    r = residual(x)
    if not np.all(np.isfinite(r)):
        raise FitError("non-finite residual at the initial guess", x)
    cost = float(r @ r)
    damping = 1e-3
    g_norm = np.inf
    for it in range(1, max_iter + 1):
        J = jacobian(x)
        g = J.T @ r
        g_norm = float(np.max(np.abs(g)))
        if g_norm < gtol:
            return FitResult(x, float(np.sqrt(cost / r.size)), it - 1, True, g_norm)
        JTJ = J.T @ J
        diag = np.maximum(np.diag(JTJ), 1e-12 * max(1.0, np.max(np.diag(JTJ))))
        while True:
            try:
                step = np.linalg.solve(JTJ + damping * np.diag(diag), -g)
            except np.linalg.LinAlgError as exc:
                raise FitError(f"singular normal equations: {exc}", x) from exc
            x_new = np.clip(x + step, lo, hi)
            if np.array_equal(x_new, x):
                return FitResult(x, float(np.sqrt(cost / r.size)), it, True, g_norm)
            r_new = residual(x_new)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new <= cost:
                x, r, cost = x_new, r_new, cost_new
                damping = max(damping / 3, 1e-15)
                break
            damping *= 4
            if damping > 1e16:
                # no descent direction left at machine precision
                return FitResult(x, float(np.sqrt(cost / r.size)), it, g_norm < 1e3 * gtol, g_norm)
    return FitResult(x, float(np.sqrt(cost / r.size)), max_iter, False, g_norm)


# --- fitting front end ----------------------------------------------------

@dataclass
class FitSpec:
    """Which model to fit, with optional initial guess and bounds.

    For ``piecewise_sine`` the parameters are ``(A1, w1, p1, A2, w2, p2, b)``;
    leaving ``breakpoint`` as None searches it over the sample positions.
    For ``gaussian_sum`` they are ``(a1, c1, w1, a2, c2, w2)``.
    """

    model: str
    initial: Optional[Sequence[float]] = None
    bounds: Optional[tuple] = None
    breakpoint: Optional[float] = None
    terms: int = 2

    def __post_init__(self):
        if self.model not in ("piecewise_sine", "gaussian_sum"):
            raise ValueError(f"unknown fit model {self.model!r}")
        if self.breakpoint is not None and not self.breakpoint > 0:
            raise ValueError("breakpoint must lie inside the sampled interval")

    @property
    def n_params(self) -> int:
        return 7 if self.model == "piecewise_sine" else 3 * self.terms


def _sine_guess(t, y):
    """Amplitude/phase by linear least squares on a frequency scan."""
    span = t[-1] - t[0]
    ws = np.linspace(0.25 * np.pi / span, 8 * np.pi / span, 400)
    S = np.sin(np.outer(ws, t))
    C = np.cos(np.outer(ws, t))
    # 2x2 normal equations per frequency
    ss, cc, sc = np.sum(S * S, 1), np.sum(C * C, 1), np.sum(S * C, 1)
    sy, cy = S @ y, C @ y
    det = ss * cc - sc * sc
    det = np.where(np.abs(det) < 1e-300, np.inf, det)
    a_all = (cc * sy - sc * cy) / det
    b_all = (ss * cy - sc * sy) / det
    err = np.sum((a_all[:, None] * S + b_all[:, None] * C - y) ** 2, axis=1)
    k = int(np.argmin(err))
    w, a, b = ws[k], a_all[k], b_all[k]
    # a sin + b cos = A sin(w t + psi)
    return np.array([np.hypot(a, b), w, -np.arctan2(b, a)])


def _normalize_sine(params):
    A, w, p = params
    if A < 0:
        A, p = -A, p + np.pi
    p = (p + np.pi) % (2 * np.pi) - np.pi
    return np.array([A, w, p])


def _fit_sine_segment(t, y, x0=None) -> FitResult:
    x0 = _sine_guess(t, y) if x0 is None else np.asarray(x0, float)
    res = levenberg_marquardt(
        lambda x: x[0] * np.sin(x[1] * t - x[2]) - y,
        lambda x: _sine_jacobian(t, x),
        x0,
    )
    res.params = _normalize_sine(res.params)
    return res


def _fit_piecewise(t, y, b, x0=None):
    left = t <= b
    if left.sum() < 4 or (~left).sum() < 4:
        raise FitError("breakpoint leaves fewer than 4 samples in a segment", np.full(7, np.nan))
    r1 = _fit_sine_segment(t[left], y[left], None if x0 is None else x0[:3])
    r2 = _fit_sine_segment(t[~left], y[~left], None if x0 is None else x0[3:6])
    params = np.concatenate([r1.params, r2.params, [b]])
    rms = float(np.sqrt(np.mean((piecewise_sine(t, params) - y) ** 2)))
    return FitResult(params, rms, r1.iterations + r2.iterations, r1.converged and r2.converged,
                     max(r1.grad_norm, r2.grad_norm))


def _gaussian_guess(t, y, terms):
    """Greedy peak picking: largest |y| first, width from the half-maximum span."""
    resid = y.copy()
    out = []
    for _ in range(terms):
        k = int(np.argmax(np.abs(resid)))
        a = resid[k]
        below = np.abs(resid) < abs(a) / 2
        right = np.nonzero(below[k:])[0]
        left = np.nonzero(below[:k + 1][::-1])[0]
        spans = []
        if right.size:
            spans.append(t[k + right[0]] - t[k])
        if left.size:
            spans.append(t[k] - t[k - left[0]])
        half = min(spans) if spans else (t[-1] - t[0]) / 4
        w = max(half / np.sqrt(np.log(2)), (t[1] - t[0]))
        out += [a, t[k], w]
        resid = resid - a * np.exp(-(((t - t[k]) / w) ** 2))
    return np.array(out)


def fit_pulse(t, y, spec: FitSpec, gtol: float = 1e-8, max_iter: int = 500) -> FitResult:
    """Least-squares fit of one pulse shape to samples ``(t, y)``.

    Raises
    ------
    FitError
        On too few samples, non-finite residuals or singular normal equations.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if t.size < 10 * spec.n_params:
        raise FitError(f"need at least {10 * spec.n_params} samples, got {t.size}",
                       np.full(spec.n_params, np.nan))
    order = np.argsort(t)
    t, y = t[order], y[order]

    if spec.model == "gaussian_sum":
        x0 = _gaussian_guess(t, y, spec.terms) if spec.initial is None else np.asarray(spec.initial, float)
        if spec.bounds is None:
            span = t[-1] - t[0]
            lo = np.tile([-np.inf, t[0] - span, 1e-6 * span], spec.terms)
            hi = np.tile([np.inf, t[-1] + span, 10 * span], spec.terms)
            bounds = (lo, hi)
        else:
            bounds = spec.bounds
        if np.all(y == 0) and spec.initial is None:
            x0[0::3] = 0.0
        res = levenberg_marquardt(lambda x: gaussian_sum(t, x) - y, lambda x: _gaussian_jacobian(t, x),
                                  x0, bounds, gtol, max_iter)
        # order terms by centre for reproducible output
        triples = sorted(np.reshape(res.params, (-1, 3)).tolist(), key=lambda p: p[1])
        res.params = np.array(triples).ravel()
        return res

    if np.all(y == 0):
        b = spec.breakpoint if spec.breakpoint is not None else t[t.size // 2]
        return FitResult(np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0, b]), 0.0)
    x0 = None if spec.initial is None else np.asarray(spec.initial, float)
    if spec.breakpoint is not None:
        return _fit_piecewise(t, y, spec.breakpoint, x0)
    if x0 is not None:
        return _fit_piecewise(t, y, x0[6], x0)
    # coarse scan of breakpoints on sample positions, then refine around the best
    n = t.size
    interior = np.arange(max(4, n // 10), min(n - 5, n - n // 10))
    coarse = interior[::10]
    scores = [(_fit_piecewise(t, y, t[k]).residual_rms, k) for k in coarse]
    _, k_best = min(scores)
    fine = range(max(interior[0], k_best - 10), min(interior[-1], k_best + 10) + 1)
    results = [(_fit_piecewise(t, y, t[k]), k) for k in fine]
    best, _ = min(results, key=lambda rk: (rk[0].residual_rms, rk[1]))
    return best


# --- pulse sets -------------------------------------------------------------

def exact_pulses(p: ScheduleParams) -> PulseSet:
    """The engineered pulses of the eliminated design (no |1>-|3> coupling)."""
    return PulseSet(
        waveforms=(lambda t: rydberg_omegas(p, t)[0], lambda t: rydberg_omegas(p, t)[1]),
        convention=ANTISYMMETRIC,
        T=p.T,
        support=(0.0, p.T),
        source="exact",
    )


def fitted_pulses(params1, params2, T: float = 1.0, source: str = "fitted") -> PulseSet:
    """Pulse set from dimensionless piecewise-sine and Gaussian-sum parameters."""
    params1 = np.asarray(params1, float)
    params2 = np.asarray(params2, float)
    return PulseSet(
        waveforms=(lambda t: piecewise_sine(t / T, params1) / T,
                   lambda t: gaussian_sum(t / T, params2) / T),
        convention=ANTISYMMETRIC,
        T=T,
        support=(0.0, T),
        breakpoints=((float(params1[6]) * T,), ()),
        source=source,
    )


def paper_fitted_pulses(T: float = 1.0) -> PulseSet:
    """Reference fitted pulses: two sine segments and a negative two-Gaussian sum."""
    return fitted_pulses(PAPER_OMEGA1, PAPER_OMEGA2, T, source="paper_fitted")


def fit_exact_pulses(p: ScheduleParams, points: int = 1001):
    """Fit both model families to the exact pulses on a uniform grid.

    Returns the fitted :class:`PulseSet` and the two :class:`FitResult` objects.
    """
    s = np.linspace(0.0, 1.0, points)
    o1, o2 = rydberg_omegas(p, s * p.T)
    r1 = fit_pulse(s, o1 * p.T, FitSpec("piecewise_sine"))
    r2 = fit_pulse(s, o2 * p.T, FitSpec("gaussian_sum"))
    return fitted_pulses(r1.params, r2.params, p.T), r1, r2


@dataclass(frozen=True)
class StirapParams:
    """Counter-intuitive Gaussian pair; widths and offsets default to 0.19 T, 0.14 T."""

    Omega0: float
    t_c: Optional[float] = None
    t_0: Optional[float] = None
    mu: float = np.pi / 4

    def resolved(self, T: float):
        t_c = 0.19 * T if self.t_c is None else self.t_c
        t_0 = 0.14 * T if self.t_0 is None else self.t_0
        if not (self.Omega0 > 0 and t_c > 0 and t_0 > 0):
            raise ValueError("Omega0, t_c and t_0 must be positive")
        return t_c, t_0


@lru_cache(maxsize=None)
def _stirap_shapes(T: float, t_c: float, t_0: float, mu: float):
    """Unit-amplitude STIRAP shapes; cached so equal settings share function objects."""

    def pump(t):
        return -np.exp(-(((t - t_0 - T / 2) / t_c) ** 2)) * np.sin(mu)

    def stokes(t):
        return (np.exp(-(((t + t_0 - T / 2) / t_c) ** 2))
                + np.exp(-(((t - t_0 - T / 2) / t_c) ** 2)) * np.cos(mu))

    return pump, stokes


def stirap_pulses(s: StirapParams, T: float = 1.0) -> PulseSet:
    """Stokes-first Gaussian pulses whose ratio tends to ``-tan(mu)`` at late times."""
    t_c, t_0 = s.resolved(T)
    return PulseSet(
        waveforms=_stirap_shapes(float(T), float(t_c), float(t_0), float(s.mu)),
        convention=SYMMETRIC,
        T=T,
        amplitude=(s.Omega0, s.Omega0),
        source="stirap",
    )


def write_pulse_csv(path, ps: PulseSet, points: int = 1001) -> Path:
    """Tabulate a pulse set as ``t_over_T, omega1_T, omega2_T``."""
    path = Path(path)
    t = np.linspace(0.0, ps.duration, points)
    o1, o2 = ps.omegas(t)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_over_T", "omega1_T", "omega2_T"])
        for row in zip(t / ps.T, o1 * ps.T, o2 * ps.T):
            w.writerow([f"{v:.12g}" for v in row])
    return path
