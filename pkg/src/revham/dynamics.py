"""Schrödinger and Lindblad integration for three-level systems.

All integrators share one fixed-step classical RK4 core that advances a batch
of independent systems in lockstep. Each system's time axis is split at its
pulse discontinuities and the split points land on step boundaries, so
piecewise waveforms are integrated without straddling a jump. Stage times are
nudged a hair inside their segment so that one-sided waveform values are used
at the edges.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import EngineeredHamiltonian
from .pulses import ANTISYMMETRIC, SYMMETRIC, PulseSet

DEFAULT_STEPS = 20_000
NORM_DRIFT_TOL = 1e-6
# relative inward nudge of stage times at segment edges
_EDGE_NUDGE = 1e-12
# Hamiltonian samples precomputed per block, summed over the batch
_BLOCK_BUDGET = 1 << 16


class IntegrationError(RuntimeError):
    """Norm or trace drifted beyond tolerance; the step count is too small."""


@dataclass(frozen=True)
class LindbladParams:
    """Spontaneous-emission rates for ``|2> -> |1>`` and ``|3> -> |2>``."""

    Gamma1: float = 0.0
    Gamma2: float = 0.0

    def __post_init__(self):
        if self.Gamma1 < 0 or self.Gamma2 < 0:
            raise ValueError("decay rates must be non-negative")

    def operators(self) -> np.ndarray:
        L = np.zeros((2, 3, 3))
        L[0, 0, 1] = np.sqrt(self.Gamma1)
        L[1, 1, 2] = np.sqrt(self.Gamma2)
        return L


@dataclass
class SimResult:
    grid: np.ndarray
    states: np.ndarray
    populations: np.ndarray
    fidelity: float
    target: np.ndarray
    purity: Optional[np.ndarray] = None
    norm_error: float = 0.0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, path, T: float = 1.0) -> Path:
        """Trajectory as ``t_over_T, p1, p2, p3[, purity]``."""
        path = Path(path)
        header = ["t_over_T", "p1", "p2", "p3"] + (["purity"] if self.purity is not None else [])
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k, t in enumerate(self.grid):
                row = [t / T, *self.populations[k]]
                if self.purity is not None:
                    row.append(self.purity[k])
                w.writerow([f"{v:.12g}" for v in row])
        return path


def target_state(mu: float) -> np.ndarray:
    return np.array([np.cos(mu), 0.0, np.sin(mu)], dtype=complex)


def fidelity(state, mu: float) -> float:
    """``|<target|psi>|^2`` for a ket, ``<target|rho|target>`` for a density matrix."""
    tar = target_state(mu)
    state = np.asarray(state)
    if state.ndim == 1:
        return float(abs(tar.conj() @ state) ** 2)
    return float((tar.conj() @ state @ tar).real)


def _pulse_matrix(o1, o2, convention: str) -> np.ndarray:
    o1 = np.asarray(o1, float)
    o2 = np.asarray(o2, float)
    H = np.zeros(np.broadcast(o1, o2).shape + (3, 3), dtype=complex)
    if convention == ANTISYMMETRIC:
        H[..., 1, 0] = 1j * o1
        H[..., 0, 1] = -1j * o1
        H[..., 1, 2] = 1j * o2
        H[..., 2, 1] = -1j * o2
    elif convention == SYMMETRIC:
        H[..., 0, 1] = H[..., 1, 0] = o1
        H[..., 1, 2] = H[..., 2, 1] = o2
    else:
        raise ValueError(f"unknown phase convention {convention!r}")
    return H


def build_pulse_H(ps: PulseSet, t) -> np.ndarray:
    """Three-level Hamiltonian driven by ``ps`` at time(s) ``t``."""
    o1, o2 = ps.omegas(t)
    return _pulse_matrix(o1, o2, ps.convention)


# --- batching of Hamiltonian sources ---------------------------------------

@dataclass
class _Batch:
    hamiltonian: Callable[[np.ndarray], np.ndarray]  # t (N,) -> (N, 3, 3)
    edges: np.ndarray                                # (N, K + 2) segment edges


def _pulse_batch(sets: Sequence[PulseSet]) -> _Batch:
    first = sets[0]
    for ps in sets[1:]:
        if ps.waveforms is not first.waveforms or ps.convention != first.convention or ps.support != first.support:
            raise ValueError("batched pulse sets must share base waveforms, convention and support")
    amp = np.array([ps.amplitude for ps in sets], float)
    stretch = np.array([ps.stretch for ps in sets], float)
    support = first.support
    f1, f2 = first.waveforms

    def leg(f, k, t):
        u = t / stretch[:, k]  # t: (..., N)
        if support is None:
            return amp[:, k] * f(u)
        lo, hi = support
        inside = (u >= lo) & (u <= hi)
        return np.where(inside, amp[:, k] * f(np.clip(u, lo, hi)), 0.0)

    def hamiltonian(t):
        return _pulse_matrix(leg(f1, 0, t), leg(f2, 1, t), first.convention)

    cuts = [ps.discontinuities() for ps in sets]
    if len({len(c) for c in cuts}) != 1:
        raise ValueError("batched pulse sets must have the same number of discontinuities")
    edges = np.array([[0.0, *c, ps.duration] for c, ps in zip(cuts, sets)])
    return _Batch(hamiltonian, edges)


def _as_batch(source, duration: Optional[float] = None) -> _Batch:
    if isinstance(source, PulseSet):
        return _pulse_batch([source])
    if isinstance(source, (list, tuple)) and source and isinstance(source[0], PulseSet):
        return _pulse_batch(list(source))
    if isinstance(source, EngineeredHamiltonian):
        T = source.duration if duration is None else duration
        cuts = [b for b in source.breakpoints if 0 < b < T]
        return _Batch(lambda t: source(t), np.array([[0.0, *cuts, T]]))
    if callable(source):
        if duration is None:
            raise ValueError("a bare callable Hamiltonian needs an explicit duration")
        return _Batch(lambda t: np.asarray(source(t), complex), np.array([[0.0, duration]]))
    raise TypeError(f"unsupported Hamiltonian source {type(source).__name__}")


def _segment_steps(edges: np.ndarray, steps: int) -> np.ndarray:
    """Steps per segment: shared by the batch, proportional to mean segment length."""
    rel = edges / edges[:, -1:]
    cum = np.rint(rel.mean(axis=0) * steps).astype(int)
    cum[0], cum[-1] = 0, steps
    for j in range(1, cum.size):
        cum[j] = max(cum[j], cum[j - 1] + 1)
    if cum[-1] != steps:
        raise ValueError(f"{steps} steps cannot cover {edges.shape[1] - 1} segments")
    return np.diff(cum)


def _rk4_lockstep(hamiltonian, rhs, y0: np.ndarray, edges: np.ndarray, steps: int, record: bool):
    """Advance ``y' = rhs(H(t), y)`` for a batch of systems in lockstep.

    ``hamiltonian`` maps times of shape ``(..., N)`` to ``(..., N, 3, 3)``; it is
    evaluated for a block of steps at a time, outside the stepping loop.
    """
    block = int(np.clip(_BLOCK_BUDGET // y0.shape[0], 8, 256))
    n_seg = _segment_steps(edges, steps)
    eps = _EDGE_NUDGE * edges[:, -1]
    y = y0.copy()
    traj_t = [edges[:, 0].copy()] if record else None
    traj_y = [y.copy()] if record else None
    expand = (slice(None),) + (None,) * (y.ndim - 1)
    for j, n in enumerate(n_seg):
        a, b = edges[:, j], edges[:, j + 1]
        h = (b - a) / n
        lo, hi = a + eps, b - eps
        hb = h[expand]
        for start in range(0, n, block):
            ks = np.arange(start, min(n, start + block))[:, None]
            t0 = a + ks * h
            H0 = hamiltonian(np.clip(t0, lo, hi))
            Hm = hamiltonian(np.clip(t0 + h / 2, lo, hi))
            H1 = hamiltonian(np.clip(t0 + h, lo, hi))
            for i in range(ks.shape[0]):
                k1 = rhs(H0[i], y)
                k2 = rhs(Hm[i], y + hb / 2 * k1)
                k3 = rhs(Hm[i], y + hb / 2 * k2)
                k4 = rhs(H1[i], y + hb * k3)
                y = y + hb / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                if record:
                    traj_t.append(t0[i] + h)
                    traj_y.append(y)
    if record:
        return y, np.stack(traj_t, axis=1), np.stack(traj_y, axis=1)
    return y, None, None


def _schrodinger_rhs(H, psi):
    return -1j * (H @ psi[..., None])[..., 0]


def _lindblad_rhs(L: np.ndarray):
    """``i[rho, H] + sum_l (L rho L^dag - {L^dag L, rho}/2)``; ``L`` is (N, n_ops, 3, 3)."""
    Ld = np.swapaxes(L, -1, -2).conj()
    LdL = np.sum(Ld @ L, axis=1)

    def rhs(H, rho):
        out = 1j * (rho @ H - H @ rho)
        out = out + np.sum(L @ rho[:, None] @ Ld, axis=1)
        return out - 0.5 * (LdL @ rho + rho @ LdL)
    return rhs


def _initial_ket(psi0) -> np.ndarray:
    psi0 = np.asarray(psi0 if psi0 is not None else [1, 0, 0], dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-12:
        raise ValueError("initial state must be normalized")
    return psi0


def evolve_pure(source, psi0=None, steps: int = DEFAULT_STEPS, mu: float = np.pi / 4,
                duration: Optional[float] = None) -> SimResult:
    """Integrate ``i psi' = H psi`` over ``[0, duration]`` with fixed-step RK4.

    ``source`` is a :class:`PulseSet`, an :class:`EngineeredHamiltonian` or a
    callable ``t -> H`` (then ``duration`` is required).

    Raises
    ------
    IntegrationError
        If the norm drifts by more than ``1e-6``.
    """
    batch = _as_batch(source, duration)
    psi0 = _initial_ket(psi0)
    y, tt, yy = _rk4_lockstep(batch.hamiltonian, _schrodinger_rhs, psi0[None, :], batch.edges, steps, True)
    states = yy[0]
    norm_err = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    if norm_err > NORM_DRIFT_TOL:
        raise IntegrationError(f"norm drift {norm_err:.3e} exceeds {NORM_DRIFT_TOL}; increase steps")
    return SimResult(tt[0], states, np.abs(states) ** 2, fidelity(states[-1], mu), target_state(mu),
                     norm_error=norm_err)


def evolve_pure_batch(sources: Sequence[PulseSet], psi0=None, steps: int = DEFAULT_STEPS,
                      mu: float = np.pi / 4) -> np.ndarray:
    """Final fidelities for many pulse sets that share base waveforms."""
    batch = _as_batch(list(sources))
    psi0 = _initial_ket(psi0)
    y0 = np.tile(psi0, (batch.edges.shape[0], 1))
    y, _, _ = _rk4_lockstep(batch.hamiltonian, _schrodinger_rhs, y0, batch.edges, steps, False)
    norm_err = float(np.max(np.abs(np.linalg.norm(y, axis=1) - 1)))
    if norm_err > NORM_DRIFT_TOL:
        raise IntegrationError(f"norm drift {norm_err:.3e} exceeds {NORM_DRIFT_TOL}; increase steps")
    tar = target_state(mu)
    return np.abs(y @ tar.conj()) ** 2


def _initial_rho(rho0) -> np.ndarray:
    if rho0 is None:
        rho0 = np.diag([1.0, 0.0, 0.0])
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if abs(np.trace(rho0) - 1) > 1e-12 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise ValueError("initial density matrix must be Hermitian with unit trace")
    if np.min(np.linalg.eigvalsh(rho0)) < -1e-12:
        raise ValueError("initial density matrix must be positive semidefinite")
    return rho0


def _check_trace(rho: np.ndarray) -> float:
    drift = float(np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1)))
    if drift > NORM_DRIFT_TOL:
        raise IntegrationError(f"trace drift {drift:.3e} exceeds {NORM_DRIFT_TOL}; increase steps")
    return drift


def evolve_lindblad(source, rho0=None, lp: LindbladParams = LindbladParams(), steps: int = DEFAULT_STEPS,
                    mu: float = np.pi / 4, duration: Optional[float] = None) -> SimResult:
    """Integrate the Lindblad master equation with spontaneous emission on both legs.

    Fidelity is ``<target|rho(T)|target>``.
    """
    batch = _as_batch(source, duration)
    rho0 = _initial_rho(rho0)
    rhs = _lindblad_rhs(lp.operators()[None])
    y, tt, yy = _rk4_lockstep(batch.hamiltonian, rhs, rho0[None], batch.edges, steps, True)
    rhos = yy[0]
    drift = _check_trace(rhos)
    populations = np.real(np.diagonal(rhos, axis1=-2, axis2=-1))
    purity = np.real(np.einsum("kij,kji->k", rhos, rhos))
    return SimResult(tt[0], rhos, populations, fidelity(rhos[-1], mu), target_state(mu),
                     purity=purity, norm_error=drift)


def evolve_lindblad_batch(source, gammas, rho0=None, steps: int = DEFAULT_STEPS,
                          mu: float = np.pi / 4) -> np.ndarray:
    """Final fidelities for one pulse source under many ``(Gamma1, Gamma2)`` pairs."""
    gammas = np.atleast_2d(np.asarray(gammas, float))
    if np.any(gammas < 0):
        raise ValueError("decay rates must be non-negative")
    single = _as_batch(source)
    N = gammas.shape[0]
    L = np.zeros((N, 2, 3, 3))
    L[:, 0, 0, 1] = np.sqrt(gammas[:, 0])
    L[:, 1, 1, 2] = np.sqrt(gammas[:, 1])

    def hamiltonian(t):
        # every system shares the same drive and time grid
        return np.broadcast_to(single.hamiltonian(t[..., :1]), t.shape + (3, 3))

    edges = np.repeat(single.edges, N, axis=0)
    rho0 = _initial_rho(rho0)
    y, _, _ = _rk4_lockstep(hamiltonian, _lindblad_rhs(L), np.tile(rho0, (N, 1, 1)), edges, steps, False)
    _check_trace(y)
    tar = target_state(mu)
    return np.real(np.einsum("i,nij,j->n", tar.conj(), y, tar))
