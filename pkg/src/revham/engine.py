"""Hamiltonians generated by designed evolution operators.

``H(t) = i (dU/dt) U^dag`` is evaluated from analytic frame and mixing-block
derivatives: with ``U = Phi(t) M(t) Phi(0)^dag``,

    H = i Phi' Phi^dag + i Phi (M' M^dag) Phi^dag.

Level labels in this module (``coupling(m, n)``, forbidden pairs) count from 1,
matching the ``|1>, |2>, |3>`` naming of the three-level atom.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .frames import ScheduleParams, rydberg_frame, schedule_alpha, schedule_beta
from .propagator import PropagatorDesign, ThreeLevelControls, _dagger, rotation_block

HERMITICITY_TOL = 1e-9
# tolerance on the real part of <2|H|1>, <2|H|3> for the antisymmetric-i form
STRUCTURE_TOL = 1e-10


class StructureError(ValueError):
    """The Hamiltonian does not have the expected coupling structure."""


@dataclass(frozen=True)
class EngineeredHamiltonian:
    """Time-dependent Hermitian matrix ``H(t)`` (hbar = 1) on ``[0, duration]``."""

    dim: int
    eval_fn: Callable[[np.ndarray], np.ndarray]
    duration: float = 1.0
    breakpoints: tuple = ()

    def __call__(self, t) -> np.ndarray:
        return np.asarray(self.eval_fn(np.asarray(t, float)), dtype=complex)

    def coupling(self, m: int, n: int, t) -> np.ndarray:
        """Complex coefficient of ``|m><n|`` (levels counted from 1)."""
        return self(t)[..., m - 1, n - 1]

    def hermiticity_deviation(self, t) -> float:
        H = self(t)
        return float(np.max(np.abs(H - _dagger(H))))


@dataclass(frozen=True)
class ForbiddenCouplingReport:
    pairs: list
    max_abs: float
    worst_time: float
    per_pair: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "max_abs": self.max_abs,
            "worst_time": self.worst_time,
            "per_pair": {f"{m},{n}": v for (m, n), v in self.per_pair.items()},
        }


def extract_H(design: PropagatorDesign, duration: float = 1.0) -> EngineeredHamiltonian:
    """Hamiltonian generating ``design``'s evolution operator."""
    frame = design.frame
    if frame.derivative_fn is None or design.mixing.derivative_fn is None:
        raise ValueError("extract_H needs analytic derivatives of the frame and the mixing block")

    def eval_fn(t):
        Phi = frame.basis(t)
        dPhi = frame.derivative(t)
        M = design.coefficients(t)
        dM = design.coefficients_dot(t)
        Phi_dag = _dagger(Phi)
        return 1j * dPhi @ Phi_dag + 1j * Phi @ (dM @ _dagger(M)) @ Phi_dag

    return EngineeredHamiltonian(design.dim, eval_fn, duration)


def transport_H(frame, duration: float = 1.0) -> EngineeredHamiltonian:
    """Parallel-transport Hamiltonian ``i sum_k |phi_k'><phi_k|``."""

    def eval_fn(t):
        return 1j * frame.derivative(t) @ _dagger(frame.basis(t))

    return EngineeredHamiltonian(frame.dim, eval_fn, duration)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :].conj()


def rydberg_H_theta(controls: ThreeLevelControls, p: ScheduleParams) -> EngineeredHamiltonian:
    """Three-level Hamiltonian of the (lambda, theta) operator family, term by term."""
    frame = rydberg_frame(p)

    def eval_fn(t):
        B = frame.basis(t)
        dB = frame.derivative(t)
        lam, lam_dot, th, th_dot = controls.values(t)
        phi2, phi3 = B[..., :, 1], B[..., :, 2]
        e = np.exp(1j * th)[..., None, None]
        sl = np.sin(lam)[..., None, None]
        cl = np.cos(lam)[..., None, None]
        ld = lam_dot[..., None, None]
        td = th_dot[..., None, None]
        p23, p32 = _outer(phi2, phi3), _outer(phi3, phi2)
        H = 1j * dB @ _dagger(B)
        H = H + 1j * ld * (e * p23 - e.conj() * p32)
        H = H - td * sl * cl * (e * p23 + e.conj() * p32)
        H = H - td * sl ** 2 * (_outer(phi2, phi2) - _outer(phi3, phi3))
        return H

    return EngineeredHamiltonian(3, eval_fn, p.T)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15 * tol:
            return left + right + delta / 15
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f((a + b) / 2)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def _one_minus_cos_over_sin_beta(p: ScheduleParams, t):
    """``(1 - cos(2 pi t/T)) / sin(beta)`` with its limit ``2/A`` where beta -> 0."""
    x = 2 * np.pi * np.asarray(t, float) / p.T
    beta = p.A / 2 * (1 - np.cos(x))
    # sin(beta) = beta * sinc(beta/pi), and beta = A (1 - cos x) / 2
    return 2.0 / (p.A * np.sinc(beta / np.pi))


def elimination_lambda_dot(p: ScheduleParams, t):
    """``-alpha_dot / sin(beta)``, evaluated without the removable 0/0 at the ends."""
    t = np.asarray(t, float)
    schedule_alpha(p, t)  # domain check
    one_minus_cos = 1 - np.cos(2 * np.pi * t / p.T)
    # alpha_dot = (8 mu / 3T) sin^4(pi t/T) = (2 mu / 3T) (1 - cos)^2
    return -(2 * p.mu / (3 * p.T)) * one_minus_cos * _one_minus_cos_over_sin_beta(p, t)


def eliminate_13(p: ScheduleParams, grid_points: int = 2001, tol: float = 1e-10) -> ThreeLevelControls:
    """Controls that cancel the ``|1><3|`` coupling: ``lambda' sin(beta) + alpha' = 0``.

    ``theta`` is zero. ``lambda(t)`` is integrated by adaptive Simpson on each
    cell of a uniform grid and interpolated with a cubic Hermite spline that
    uses the exact rate at the nodes.
    """
    if not p.A > 0:
        raise ValueError("A must be positive: with beta = 0 the constraint cannot be solved")
    nodes = np.linspace(0.0, p.T, grid_points)
    rate = lambda s: float(elimination_lambda_dot(p, s))
    cells = [adaptive_simpson(rate, a, b, tol / grid_points) for a, b in zip(nodes[:-1], nodes[1:])]
    lam_nodes = np.concatenate([[0.0], np.cumsum(cells)])
    spline = CubicHermiteSpline(nodes, lam_nodes, elimination_lambda_dot(p, nodes))

    def lambda_fn(t):
        t = np.asarray(t, float)
        schedule_alpha(p, t)
        return spline(np.clip(t, 0.0, p.T))

    return ThreeLevelControls(lambda_fn, lambda t: elimination_lambda_dot(p, t))


def rydberg_omegas(p: ScheduleParams, t):
    """Closed-form Rabi frequencies of the eliminated design.

    ``Omega1 = beta' cos(alpha) + alpha' cot(beta) sin(alpha)`` and
    ``Omega2 = beta' sin(alpha) - alpha' cot(beta) cos(alpha)``, with the
    endpoint limits (both zero) handled exactly.
    """
    alpha, _ = schedule_alpha(p, t)
    beta, beta_dot = schedule_beta(p, t)
    one_minus_cos = 1 - np.cos(2 * np.pi * np.asarray(t, float) / p.T)
    # alpha' cot(beta) = (2 mu / 3T) (1 - cos)^2 cos(beta) / sin(beta)
    ad_cot = (2 * p.mu / (3 * p.T)) * one_minus_cos * _one_minus_cos_over_sin_beta(p, t) * np.cos(beta)
    omega1 = beta_dot * np.cos(alpha) + ad_cot * np.sin(alpha)
    omega2 = beta_dot * np.sin(alpha) - ad_cot * np.cos(alpha)
    return omega1, omega2


def rydberg_design(p: ScheduleParams, controls: ThreeLevelControls | None = None) -> PropagatorDesign:
    """Generic-path design equivalent to the (lambda, theta) operator family."""
    controls = controls if controls is not None else eliminate_13(p)
    return PropagatorDesign(rydberg_frame(p), 1, rotation_block(controls))


def pulse_coefficients(H: EngineeredHamiltonian, t, tol: float = STRUCTURE_TOL):
    """Read ``(Omega1, Omega2)`` off ``H = i O1(|2><1| - |1><2|) + i O2(|2><3| - |3><2|)``.

    Raises
    ------
    StructureError
        If ``<2|H|1>`` or ``<2|H|3>`` has a real part beyond ``tol``.
    """
    if H.dim != 3:
        raise StructureError("pulse read-off needs a three-level Hamiltonian")
    h21 = H.coupling(2, 1, t)
    h23 = H.coupling(2, 3, t)
    worst = max(float(np.max(np.abs(h21.real))), float(np.max(np.abs(h23.real))))
    if worst > tol:
        raise StructureError(f"<2|H|1> or <2|H|3> has real part {worst:.3e}; not the antisymmetric-i form")
    return h21.imag, h23.imag


def forbidden_coupling_report(H: EngineeredHamiltonian, pairs: Sequence = ((1, 3),),
                              points: int = 1001) -> ForbiddenCouplingReport:
    """Largest magnitude of the listed matrix elements over a uniform grid."""
    grid = np.linspace(0.0, H.duration, points)
    M = H(grid)
    per_pair = {}
    best, worst_t = 0.0, 0.0
    for m, n in pairs:
        mags = np.maximum(np.abs(M[:, m - 1, n - 1]), np.abs(M[:, n - 1, m - 1]))
        k = int(np.argmax(mags))
        per_pair[(m, n)] = float(mags[k])
        if mags[k] >= best:
            best, worst_t = float(mags[k]), float(grid[k])
    return ForbiddenCouplingReport([tuple(p) for p in pairs], best, worst_t, per_pair)
