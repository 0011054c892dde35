"""Robustness studies: pulse-deviation tables and grids, STIRAP scan, decay map.

Every study is a set of independent simulations. They are run as vectorized
batches (one lockstep integration per group of compatible pulse sets) and the
results are always assembled in row-major grid order, so outputs do not depend
on how the work was grouped.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dynamics import DEFAULT_STEPS, evolve_lindblad_batch, evolve_pure_batch
from .pulses import PulseSet, StirapParams, paper_fitted_pulses, stirap_pulses

FIDELITY_CEILING = 1 + 1e-9
# reference amplitude for the decay map: Gamma axes are Gamma / OMEGA0_REF_T * T
OMEGA0_REF_T = 3.154

STRATEGIES = ("split_clock", "area", "truncate", "omega2_area")
DEFAULT_STRATEGY = "split_clock"


@dataclass(frozen=True)
class DeviationSpec:
    """Relative deviations of the two Rabi frequencies and of the interaction time."""

    d_omega1: float = 0.0
    d_omega2: float = 0.0
    d_T: float = 0.0

    def __post_init__(self):
        for name in ("d_omega1", "d_omega2", "d_T"):
            v = getattr(self, name)
            if not -1 < v < 1:
                raise ValueError(f"{name} must lie in (-1, 1), got {v}")


def apply_deviation(ps: PulseSet, d: DeviationSpec, strategy: str = DEFAULT_STRATEGY):
    """Perturbed copy of ``ps`` and its interaction time ``T_eff``.

    Amplitude deviations always scale a leg by ``1 + d``. The time deviation
    ``k = 1 + d_T`` depends on ``strategy``:

    ``area``
        both waveforms stretched to ``k T`` at unchanged amplitude, so both
        pulse areas grow by ``k``.
    ``truncate``
        nominal waveforms, run for ``k T`` (cut short or followed by idle time).
    ``omega2_area``
        only the ``|2>-|3>`` amplitude scaled by ``k``, run for ``T``.
    ``split_clock``
        ``|1>-|2>`` amplitude scaled by ``k`` on the nominal clock,
        ``|2>-|3>`` stretched by ``k`` at nominal amplitude, run for ``k T``.
    """
    a1, a2, k = 1 + d.d_omega1, 1 + d.d_omega2, 1 + d.d_T
    T = ps.duration
    if strategy == "area":
        out = ps.scaled(amplitude=(a1, a2), stretch=(k, k), duration=k * T)
    elif strategy == "truncate":
        out = ps.scaled(amplitude=(a1, a2), duration=k * T)
    elif strategy == "omega2_area":
        out = ps.scaled(amplitude=(a1, a2 * k))
    elif strategy == "split_clock":
        out = ps.scaled(amplitude=(a1 * k, a2), stretch=(1.0, k), duration=k * T)
    else:
        raise ValueError(f"unknown deviation strategy {strategy!r}; expected one of {STRATEGIES}")
    return out, out.duration


def batched_fidelities(sets: Sequence[PulseSet], steps: int = DEFAULT_STEPS,
                       mu: float = np.pi / 4) -> np.ndarray:
    """Final fidelities in input order, batching sets with matching segment layouts."""
    groups: dict = {}
    for i, ps in enumerate(sets):
        groups.setdefault(len(ps.discontinuities()), []).append(i)
    out = np.empty(len(sets))
    for idx in groups.values():
        out[idx] = evolve_pure_batch([sets[i] for i in idx], steps=steps, mu=mu)
    return out


# --- deviation tables ---------------------------------------------------------

# (d_omega1, d_omega2, d_T, reference F); deviations in percent
TABLES = {
    "I": [(10, 10, 0, 0.9835), (10, 0, 0, 0.9951), (0, 10, 0, 0.9916), (0, 0, 0, 1.0000),
          (-10, 0, 0, 0.9938), (0, -10, 0, 0.9902), (-10, -10, 0, 0.9822), (10, -10, 0, 0.9875),
          (-10, 10, 0, 0.9887)],
    "II": [(10, 0, 10, 0.9855), (10, 0, 0, 0.9951), (0, 0, 10, 0.9942), (0, 0, 0, 1.0000),
           (-10, 0, 0, 0.9938), (0, 0, -10, 0.9855), (-10, 0, -10, 0.9729), (10, 0, -10, 0.9879),
           (-10, 0, 10, 0.9915)],
    "III": [(0, 10, 10, 0.9688), (0, 10, 0, 0.9916), (0, 0, 10, 0.9942), (0, 0, 0, 1.0000),
            (0, -10, 0, 0.9902), (0, 0, -10, 0.9855), (0, -10, -10, 0.9588), (0, 10, -10, 0.9974),
            (0, -10, 10, 0.9994)],
    "IV": [(-10, -10, -10, 0.9469), (10, -10, -10, 0.9607), (-10, 10, -10, 0.9853),
           (-10, -10, 10, 0.9926), (10, 10, -10, 0.9990), (10, -10, 10, 0.9956),
           (-10, 10, 10, 0.9713), (10, 10, 10, 0.9531)],
}
# which deviations each table varies, in column order
TABLE_COLUMNS = {
    "I": ("d_omega1", "d_omega2"),
    "II": ("d_omega1", "d_T"),
    "III": ("d_omega2", "d_T"),
    "IV": ("d_omega1", "d_omega2", "d_T"),
}

STIRAP_TABLE = [(3.154, 0.5538), (5, 0.6263), (10, 0.8516), (15, 0.9604), (20, 0.9898),
                (25, 0.9960), (30, 0.9992)]


@dataclass(frozen=True)
class TableRow:
    deviation: DeviationSpec
    reference: float
    fidelity: float


def run_table(table_id: str, base: Optional[PulseSet] = None, strategy: str = DEFAULT_STRATEGY,
              steps: int = DEFAULT_STEPS, mu: float = np.pi / 4) -> list:
    """Recompute every row of a reference deviation table with perturbed fitted pulses."""
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id!r}; expected one of {sorted(TABLES)}")
    base = paper_fitted_pulses() if base is None else base
    specs = [DeviationSpec(a / 100, b / 100, c / 100) for a, b, c, _ in TABLES[table_id]]
    sets = [apply_deviation(base, d, strategy)[0] for d in specs]
    F = batched_fidelities(sets, steps, mu)
    return [TableRow(d, row[3], float(f)) for d, row, f in zip(specs, TABLES[table_id], F)]


def stirap_scan(points: Sequence[float], steps: int = DEFAULT_STEPS, T: float = 1.0,
                mu: float = np.pi / 4, t_c: Optional[float] = None,
                t_0: Optional[float] = None) -> list:
    """``(Omega0 T, F)`` for STIRAP pulses at each dimensionless amplitude."""
    sets = [stirap_pulses(StirapParams(w / T, t_c, t_0, mu), T) for w in points]
    F = evolve_pure_batch(sets, steps=steps, mu=mu)
    return [(float(w), float(f)) for w, f in zip(points, F)]


# --- grids ---------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.points < 1:
            raise ValueError(f"axis {self.name!r} needs at least one point")
        if self.points > 1 and not self.stop > self.start:
            raise ValueError(f"axis {self.name!r} needs stop > start")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass
class SweepGrid:
    """Fidelities over the Cartesian product of ``axes`` (first axis slowest)."""

    axes: tuple
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(a.points for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"result shape {self.values.shape} does not match axes {shape}")
        if np.any(self.values < 0) or np.any(self.values > FIDELITY_CEILING):
            raise ValueError("fidelities must lie in [0, 1]")

    def rows(self):
        """``(*coordinates, F)`` in row-major order."""
        grids = np.meshgrid(*[a.values() for a in self.axes], indexing="ij")
        for idx in np.ndindex(self.values.shape):
            yield tuple(float(g[idx]) for g in grids) + (float(self.values[idx]),)

    def write_csv(self, path) -> Path:
        return write_rows(path, [a.name for a in self.axes] + ["F"], self.rows())


FIG4_PAIRS = {
    "4a": ("d_omega1", "d_omega2"),
    "4b": ("d_omega1", "d_T"),
    "4c": ("d_omega2", "d_T"),
}


def deviation_grid(pair: str, points: int = 41, span: float = 0.10, base: Optional[PulseSet] = None,
                   strategy: str = DEFAULT_STRATEGY, steps: int = DEFAULT_STEPS,
                   mu: float = np.pi / 4) -> SweepGrid:
    """Fidelity over two deviations on ``[-span, span]``, the third held at zero."""
    if pair not in FIG4_PAIRS:
        raise ValueError(f"unknown deviation pair {pair!r}; expected one of {sorted(FIG4_PAIRS)}")
    base = paper_fitted_pulses() if base is None else base
    names = FIG4_PAIRS[pair]
    axes = tuple(Axis(n, -span, span, points) for n in names)
    sets = []
    for x, y in ((x, y) for x in axes[0].values() for y in axes[1].values()):
        d = DeviationSpec(**{names[0]: float(x), names[1]: float(y)})
        sets.append(apply_deviation(base, d, strategy)[0])
    F = batched_fidelities(sets, steps, mu).reshape(points, points)
    meta = {"study": f"fig{pair}", "pulse_source": base.source, "deviation_strategy": strategy,
            "steps": steps, "mu": mu}
    return SweepGrid(axes, F, meta)


def decoherence_map(gamma1: Axis, gamma2: Axis, base: Optional[PulseSet] = None,
                    steps: int = DEFAULT_STEPS, mu: float = np.pi / 4) -> SweepGrid:
    """Lindblad fidelity over decay rates given as ``Gamma / Omega0`` with ``Omega0 T = 3.154``.

    The initial state is ``|1><1|``.
    """
    if min(gamma1.start, gamma2.start) < 0:
        raise ValueError("decay-rate axes must be non-negative")
    base = paper_fitted_pulses() if base is None else base
    scale = OMEGA0_REF_T / base.T
    g1, g2 = np.meshgrid(gamma1.values(), gamma2.values(), indexing="ij")
    gammas = np.stack([g1.ravel(), g2.ravel()], axis=1) * scale
    F = evolve_lindblad_batch(base, gammas, steps=steps, mu=mu).reshape(g1.shape)
    meta = {"study": "fig6", "pulse_source": base.source, "steps": steps, "mu": mu,
            "omega0_T": OMEGA0_REF_T}
    return SweepGrid((gamma1, gamma2), F, meta)


# --- output ----------------------------------------------------------------------

def write_rows(path, header: Sequence[str], rows) -> Path:
    """CSV with a header row, LF line endings and 12 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else f"{v:.12g}" for v in row])
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path, metadata: dict) -> Path:
    """JSON metadata next to ``path`` (``<name>.json``), keys sorted."""
    out = sidecar_path(path)
    out.write_text(json.dumps(_jsonable(metadata), indent=2, sort_keys=True) + "\n")
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Axis):
        return asdict(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_table_csv(path, table_id: str, rows: Sequence[TableRow]) -> Path:
    cols = TABLE_COLUMNS[table_id]
    body = ([getattr(r.deviation, c) for c in cols] + [r.reference, r.fidelity] for r in rows)
    return write_rows(path, list(cols) + ["F_reference", "F"], body)


def write_stirap_csv(path, scan: Sequence, reference: Optional[dict] = None) -> Path:
    """``Omega0_T, F`` plus a ``F_reference`` column when reference values are given."""
    if reference is None:
        return write_rows(path, ["Omega0_T", "F"], scan)
    rows = ((w, reference.get(w, float("nan")), f) for w, f in scan)
    return write_rows(path, ["Omega0_T", "F_reference", "F"], rows)
