"""Random smooth designs shared by the propagator and engine tests."""
import numpy as np

from revham.frames import exponential_frame
from revham.propagator import PropagatorDesign, exponential_block


def _random_antihermitian(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (X - X.conj().T) / 2


def random_design(seed: int, dim: int = 4, anchored: int = 2) -> PropagatorDesign:
    """Smooth frame from two random generators and an exponential mixing block."""
    rng = np.random.default_rng(seed)
    a, b, w = rng.uniform(0.5, 2.0, 3)
    frame = exponential_frame(
        [_random_antihermitian(rng, dim), _random_antihermitian(rng, dim)],
        [(lambda t: a * np.sin(w * t), lambda t: a * w * np.cos(w * t)),
         (lambda t: b * t ** 2, lambda t: 2 * b * t)],
    )
    c = rng.uniform(0.5, 2.0)
    block = exponential_block(_random_antihermitian(rng, dim - anchored),
                              lambda t: c * np.sin(t) ** 2, lambda t: c * np.sin(2 * t))
    return PropagatorDesign(frame, anchored, block)
