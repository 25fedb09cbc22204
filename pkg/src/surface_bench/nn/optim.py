"""Stochastic gradient descent with optional momentum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 3e-5
    momentum: float = 0.0

    def __post_init__(self) -> None:
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


class SGD:
    """Updates p <- p - lr * v with v <- momentum * v + g, in place."""

    def __init__(self, params: dict[str, np.ndarray], config: SgdConfig):
        self.params = params
        self.config = config
        self._velocity: dict[str, np.ndarray] = {}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        lr = self.config.learning_rate
        mu = self.config.momentum
        for name, p in self.params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(
                    f"gradient shape {g.shape} != parameter shape {p.shape} "
                    f"for {name!r}"
                )
            if mu > 0.0:
                v = self._velocity.get(name)
                if v is None:
                    v = np.zeros_like(p)
                    self._velocity[name] = v
                v *= mu
                v += g
                g = v
            p -= (lr * g).astype(p.dtype, copy=False)


def sgd_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], config: SgdConfig
) -> dict[str, np.ndarray]:
    """One in-place SGD step; use the SGD class when momentum state must
    persist across steps."""
    SGD(params, config).step(grads)
    return params
