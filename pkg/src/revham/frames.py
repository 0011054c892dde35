"""Moving orthonormal frames and the control schedules of the three-level example.

A frame is a time-dependent basis ``{|phi_n(t)>}`` stored column-wise: evaluating
it at an array of times of shape ``S`` yields an array of shape ``S + (D, D)``
whose ``[..., :, n]`` slice is ``|phi_n(t)>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

# slack on the [0, T] domain check, relative to T
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class ScheduleParams:
    """Schedule constants for the Rydberg population-transfer design.

    Parameters
    ----------
    mu : float
        Target mixing angle; the target state is ``cos(mu)|1> + sin(mu)|3>``.
    A : float
        Peak value of the beta schedule (radians).
    T : float
        Total interaction time. All rates are in units of ``1/T``.
    """

    mu: float = np.pi / 4
    A: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.A > 0:
            raise ValueError(f"A must be positive (A = 0 makes cot(beta) singular), got {self.A}")
        if not np.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")


@dataclass(frozen=True)
class MovingFrame:
    """Time-parameterized orthonormal basis with an analytic time derivative."""

    dim: int
    basis_fn: ArrayFn
    derivative_fn: ArrayFn

    def basis(self, t) -> np.ndarray:
        return np.asarray(self.basis_fn(np.asarray(t, dtype=float)), dtype=complex)

    def derivative(self, t) -> np.ndarray:
        return np.asarray(self.derivative_fn(np.asarray(t, dtype=float)), dtype=complex)

    def vector(self, n: int, t) -> np.ndarray:
        """``|phi_n(t)>`` with ``n`` counted from 1."""
        return self.basis(t)[..., :, n - 1]


def _check_domain(p: ScheduleParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    slack = _DOMAIN_SLACK * p.T
    if np.any(t < -slack) or np.any(t > p.T + slack):
        raise ValueError(f"time outside [0, T={p.T}]: {t.min()}..{t.max()}")
    return np.clip(t, 0.0, p.T)


def schedule_alpha(p: ScheduleParams, t):
    """Return ``(alpha, alpha_dot)``; alpha rises from 0 to mu with flat ends."""
    t = _check_domain(p, t)
    x = np.pi * t / p.T
    alpha = (p.mu * t / p.T
             - 2 * p.mu / (3 * np.pi) * np.sin(2 * x)
             + p.mu / (12 * np.pi) * np.sin(4 * x))
    alpha_dot = 8 * p.mu / (3 * p.T) * np.sin(x) ** 4
    return alpha, alpha_dot


def schedule_beta(p: ScheduleParams, t):
    """Return ``(beta, beta_dot)``; a raised-cosine bump of height A."""
    t = _check_domain(p, t)
    x = 2 * np.pi * t / p.T
    beta = p.A / 2 * (1 - np.cos(x))
    beta_dot = np.pi * p.A / p.T * np.sin(x)
    return beta, beta_dot


def rydberg_basis(alpha, beta) -> np.ndarray:
    """Frame vectors as columns for given mixing angles (broadcasts)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    zero = np.zeros(np.broadcast(alpha, beta).shape)
    phi1 = np.stack([ca * cb, sb + zero, sa * cb], axis=-1)
    phi2 = np.stack([ca * sb, -cb + zero, sa * sb], axis=-1)
    phi3 = np.stack([sa + zero, zero, -ca + zero], axis=-1)
    return np.stack([phi1, phi2, phi3], axis=-1)


def rydberg_basis_derivative(alpha, beta, alpha_dot, beta_dot) -> np.ndarray:
    alpha, beta = np.asarray(alpha, float), np.asarray(beta, float)
    ad, bd = np.asarray(alpha_dot, float), np.asarray(beta_dot, float)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    zero = np.zeros(np.broadcast(alpha, beta, ad, bd).shape)
    dphi1 = np.stack([-sa * cb * ad - ca * sb * bd,
                      cb * bd + zero,
                      ca * cb * ad - sa * sb * bd], axis=-1)
    dphi2 = np.stack([-sa * sb * ad + ca * cb * bd,
                      sb * bd + zero,
                      ca * sb * ad + sa * cb * bd], axis=-1)
    dphi3 = np.stack([ca * ad + zero, zero, sa * ad + zero], axis=-1)
    return np.stack([dphi1, dphi2, dphi3], axis=-1)


def rydberg_frame(p: ScheduleParams) -> MovingFrame:
    """Three-level frame whose first vector carries |1> to the target state."""

    def basis_fn(t):
        alpha, _ = schedule_alpha(p, t)
        beta, _ = schedule_beta(p, t)
        return rydberg_basis(alpha, beta)

    def derivative_fn(t):
        alpha, alpha_dot = schedule_alpha(p, t)
        beta, beta_dot = schedule_beta(p, t)
        return rydberg_basis_derivative(alpha, beta, alpha_dot, beta_dot)

    return MovingFrame(3, basis_fn, derivative_fn)


def gram_deviation(frame: MovingFrame, t) -> float:
    """Max-norm of ``<phi_m|phi_n> - delta_mn`` over the given times."""
    B = frame.basis(t)
    G = np.swapaxes(B, -1, -2).conj() @ B
    return float(np.max(np.abs(G - np.eye(frame.dim))))


def completeness_deviation(frame: MovingFrame, t) -> float:
    B = frame.basis(t)
    P = B @ np.swapaxes(B, -1, -2).conj()
    return float(np.max(np.abs(P - np.eye(frame.dim))))


def _expm_antihermitian(K: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``exp(c K)`` for anti-Hermitian ``K`` and an array of scalars ``c``."""
    w, V = np.linalg.eigh(1j * K)  # iK is Hermitian: K = -i V diag(w) V^dag
    phases = np.exp(-1j * np.multiply.outer(c, w))
    return (V * phases[..., None, :]) @ V.conj().T


def exponential_frame(generators, coefficients) -> MovingFrame:
    """Frame ``prod_j exp(c_j(t) K_j)`` from anti-Hermitian generators.

    ``coefficients`` is a sequence of ``(c_j, c_j_dot)`` callable pairs. The
    derivative follows from the product rule, so no finite differences are
    involved. Useful for building smooth generic frames in any dimension.
    """
    generators = [np.asarray(K, dtype=complex) for K in generators]
    if len(generators) != len(coefficients):
        raise ValueError("one coefficient pair per generator is required")
    dim = generators[0].shape[0]
    for K in generators:
        if K.shape != (dim, dim) or not np.allclose(K, -K.conj().T, atol=1e-12):
            raise ValueError("generators must be square anti-Hermitian matrices")

    def factors(t):
        return [_expm_antihermitian(K, np.asarray(c(t), float)) for K, (c, _) in zip(generators, coefficients)]

    def basis_fn(t):
        out = np.broadcast_to(np.eye(dim, dtype=complex), np.shape(t) + (dim, dim))
        for E in factors(t):
            out = out @ E
        return out

    def derivative_fn(t):
        Es = factors(t)
        shape = np.shape(t) + (dim, dim)
        total = np.zeros(shape, dtype=complex)
        left = np.broadcast_to(np.eye(dim, dtype=complex), shape)
        for j, (K, (_, cdot)) in enumerate(zip(generators, coefficients)):
            right = np.broadcast_to(np.eye(dim, dtype=complex), shape)
            for E in Es[j:]:
                right = right @ E
            rate = np.asarray(cdot(t), float)[..., None, None]
            total = total + rate * (left @ K @ right)
            left = left @ Es[j]
        return total

    return MovingFrame(dim, basis_fn, derivative_fn)
