"""Loss-weight strategies mapping a signal-to-noise ratio to a loss weight.

Five closed forms:

  eps-snr       w = snr            (x-space weight equivalent to plain noise MSE)
  trunc-snr     w = max(snr, 1)
  snr-plus-one  w = 1 + snr
  min-snr       w = min(snr, gamma)
  bsa           w = min(snr + 1, gamma)

The bsa form stays in [1, gamma]: capped at high snr like min-snr, but never
dropping to zero weight at snr = 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class WeightKind(enum.Enum):
    EPSILON_SNR = "eps-snr"
    TRUNCATED_SNR = "trunc-snr"
    SNR_PLUS_ONE = "snr-plus-one"
    MIN_SNR_GAMMA = "min-snr"
    BALANCED_SNR_AWARE = "bsa"


STRATEGY_NAMES = tuple(kind.value for kind in WeightKind)


@dataclass(frozen=True)
class WeightStrategy:
    kind: WeightKind
    gamma: float = 5.0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be a positive real, got {self.gamma}")

    def weight(self, snr):
        return weight(self, snr)


def weight(strategy: WeightStrategy, snr):
    """Evaluate the strategy's closed form; scalar or array snr."""
    scalar = np.ndim(snr) == 0
    s = np.asarray(snr, dtype=np.float64)
    if np.any(~np.isfinite(s)) or np.any(s < 0):
        raise ValueError(f"snr must be finite and >= 0, got {snr}")
    kind = strategy.kind
    if kind is WeightKind.EPSILON_SNR:
        out = s
    elif kind is WeightKind.TRUNCATED_SNR:
        out = np.maximum(s, 1.0)
    elif kind is WeightKind.SNR_PLUS_ONE:
        out = 1.0 + s
    elif kind is WeightKind.MIN_SNR_GAMMA:
        out = np.minimum(s, strategy.gamma)
    elif kind is WeightKind.BALANCED_SNR_AWARE:
        out = np.minimum(s + 1.0, strategy.gamma)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown weight kind {kind}")
    return float(out) if scalar else out


def strategy_from_name(name: str, gamma: float = 5.0) -> WeightStrategy:
    """Look up a strategy by its config/CLI name."""
    for kind in WeightKind:
        if kind.value == name:
            return WeightStrategy(kind=kind, gamma=gamma)
    raise ValueError(f"unknown weight strategy {name!r}; choose from {STRATEGY_NAMES}")
