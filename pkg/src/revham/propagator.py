"""Designed evolution operators over a moving frame.

The operator is assembled as ``U(t) = Phi(t) M(t) Phi(0)^dag`` where ``Phi`` holds
the frame vectors as columns and ``M = diag(I_s, Lambda(t))``: the first ``s``
frame states are transported exactly, the rest are mixed by the unitary block
``Lambda``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .frames import MovingFrame, _expm_antihermitian

UNITARITY_TOL = 1e-10


class NonUnitaryError(ValueError):
    """Raised when a mixing block or assembled operator fails ``U U^dag = I``."""

    def __init__(self, message: str, time: float, deviation: float):
        super().__init__(f"{message} at t={time!r}: max|U U^dag - I| = {deviation:.3e}")
        self.time = time
        self.deviation = deviation


def _dagger(X: np.ndarray) -> np.ndarray:
    return np.swapaxes(X, -1, -2).conj()


def unitarity_deviation(U: np.ndarray) -> np.ndarray:
    """Per-sample max-norm of ``U U^dag - I``."""
    n = U.shape[-1]
    return np.max(np.abs(U @ _dagger(U) - np.eye(n)), axis=(-2, -1))


def _require_unitary(X: np.ndarray, t, what: str, tol: float) -> None:
    dev = np.atleast_1d(unitarity_deviation(X))
    worst = int(np.argmax(dev))
    if dev[worst] > tol:
        times = np.atleast_1d(np.asarray(t, float))
        raise NonUnitaryError(what, float(times[worst % times.size]), float(dev[worst]))


@dataclass(frozen=True)
class MixingBlock:
    """Unitary ``(D-s) x (D-s)`` block of mixing coefficients and its derivative."""

    size: int
    value_fn: Callable[[np.ndarray], np.ndarray]
    derivative_fn: Callable[[np.ndarray], np.ndarray]

    def value(self, t) -> np.ndarray:
        return np.asarray(self.value_fn(np.asarray(t, float)), dtype=complex)

    def derivative(self, t) -> np.ndarray:
        return np.asarray(self.derivative_fn(np.asarray(t, float)), dtype=complex)

    @classmethod
    def constant(cls, matrix) -> "MixingBlock":
        matrix = np.asarray(matrix, dtype=complex)
        n = matrix.shape[0]
        return cls(
            n,
            lambda t: np.broadcast_to(matrix, np.shape(t) + (n, n)),
            lambda t: np.zeros(np.shape(t) + (n, n), dtype=complex),
        )


@dataclass(frozen=True)
class ThreeLevelControls:
    """Mixing angle ``lambda(t)`` and phase ``theta(t)`` with their rates."""

    lambda_fn: Callable
    lambda_dot_fn: Callable
    theta_fn: Callable = lambda t: np.zeros(np.shape(t))
    theta_dot_fn: Callable = lambda t: np.zeros(np.shape(t))

    def values(self, t):
        t = np.asarray(t, float)
        return (np.asarray(self.lambda_fn(t), float), np.asarray(self.lambda_dot_fn(t), float),
                np.asarray(self.theta_fn(t), float), np.asarray(self.theta_dot_fn(t), float))


def rotation_block(controls: ThreeLevelControls) -> MixingBlock:
    """The 2x2 block ``[[cos l, e^{i th} sin l], [-e^{-i th} sin l, cos l]]``."""

    def value(t):
        lam, _, th, _ = controls.values(t)
        c, s, e = np.cos(lam), np.sin(lam), np.exp(1j * th)
        return np.stack([np.stack([c + 0j, e * s], -1),
                         np.stack([-np.conj(e) * s, c + 0j], -1)], -2)

    def derivative(t):
        lam, lam_dot, th, th_dot = controls.values(t)
        c, s, e = np.cos(lam), np.sin(lam), np.exp(1j * th)
        d11 = -s * lam_dot + 0j
        d12 = e * (1j * th_dot * s + c * lam_dot)
        d21 = np.conj(e) * (1j * th_dot * s - c * lam_dot)
        return np.stack([np.stack([d11, d12], -1), np.stack([d21, d11], -1)], -2)

    return MixingBlock(2, value, derivative)


def exponential_block(generator, coefficient: Callable, coefficient_dot: Callable) -> MixingBlock:
    """Block ``exp(c(t) K)``; unitary whenever ``K`` is anti-Hermitian."""
    K = np.asarray(generator, dtype=complex)

    def value(t):
        return _expm_antihermitian(K, np.asarray(coefficient(t), float))

    def derivative(t):
        rate = np.asarray(coefficient_dot(t), float)[..., None, None]
        return rate * (K @ value(t))

    return MixingBlock(K.shape[0], value, derivative)


@dataclass(frozen=True)
class PropagatorDesign:
    """A frame, the number of exactly transported states, and the mixing block.

    The transported ("anchored") states are the first ``anchored`` frame
    vectors. The admissible range is ``1 <= anchored <= dim - 2``.
    """

    frame: MovingFrame
    anchored: int
    mixing: MixingBlock
    tol: float = UNITARITY_TOL

    def __post_init__(self):
        D, s = self.frame.dim, self.anchored
        if not 1 <= s <= D - 2:
            raise ValueError(
                f"anchored count s={s} outside 1 <= s <= D-2 = {D - 2}; s = D-1 leaves "
                "only a 1x1 phase block, which this construction does not admit")
        if self.mixing.size != D - s:
            raise ValueError(f"mixing block size {self.mixing.size} != D - s = {D - s}")
        start = self.mixing.value(0.0)
        dev = float(np.max(np.abs(start - np.eye(self.mixing.size))))
        if dev > self.tol:
            raise ValueError(f"mixing block must be the identity at t=0 (deviation {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.frame.dim

    def coefficients(self, t) -> np.ndarray:
        """Full ``D x D`` coefficient matrix ``diag(I_s, Lambda(t))``."""
        lam = self.mixing.value(t)
        D, s = self.dim, self.anchored
        M = np.zeros(lam.shape[:-2] + (D, D), dtype=complex)
        M[..., :s, :s] = np.eye(s)
        M[..., s:, s:] = lam
        return M

    def coefficients_dot(self, t) -> np.ndarray:
        dlam = self.mixing.derivative(t)
        D, s = self.dim, self.anchored
        M = np.zeros(dlam.shape[:-2] + (D, D), dtype=complex)
        M[..., s:, s:] = dlam
        return M


def build_U(design: PropagatorDesign, t) -> np.ndarray:
    """Evaluate the designed evolution operator at time(s) ``t``.

    Raises
    ------
    NonUnitaryError
        If the mixing block is not unitary at some requested time.
    """
    t = np.asarray(t, float)
    _require_unitary(design.mixing.value(t), t, "non-unitary mixing block", design.tol)
    Phi_t = design.frame.basis(t)
    Phi_0 = design.frame.basis(0.0)
    return Phi_t @ design.coefficients(t) @ Phi_0.conj().T


def three_level_U(frame: MovingFrame, controls: ThreeLevelControls, t) -> np.ndarray:
    """Operator of the (lambda, theta) family written out term by term."""
    if frame.dim != 3:
        raise ValueError("three_level_U needs a three-dimensional frame")
    t = np.asarray(t, float)
    lam, _, th, _ = controls.values(t)
    B, B0 = frame.basis(t), frame.basis(0.0)

    def ket_bra(m, n):
        return B[..., :, m, None] * B0[:, n].conj()

    c = np.cos(lam)[..., None, None]
    s = np.sin(lam)[..., None, None]
    e = np.exp(1j * th)[..., None, None]
    U = (ket_bra(0, 0)
         + c * (ket_bra(1, 1) + ket_bra(2, 2))
         + s * (e * ket_bra(1, 2) - e.conj() * ket_bra(2, 1)))
    _require_unitary(U, t, "non-unitary three-level operator", 1e-9)
    return U
