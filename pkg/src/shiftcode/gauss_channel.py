"""Gaussian shift channel on runlengths and its discretizations.

A transmitted run of length ``x`` lasts ``x * K`` at the receiver, where
``K ~ N(1, epsilon**2)``.  A quantization scheme turns that real duration
back into a positive integer.  Two schemes are supported:

* :class:`Rounding` -- nearest positive integer, optionally truncated to a
  window of ``gamma`` around the transmitted length.
* :class:`Thresholded` -- an explicit set of admissible values with
  decision thresholds between consecutive values.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import erfc

__all__ = [
    "ChannelParams",
    "Rounding",
    "Thresholded",
    "QuantizationScheme",
    "RunSequence",
    "q_function",
    "interval_probability",
    "shift_probability",
    "local_threshold",
    "pairwise_decision_error",
    "quantize",
    "transition_distribution",
    "sample_received_run",
    "transmit_runs",
    "channel_outputs",
]

_SQRT2 = math.sqrt(2.0)
# Probability below which the open upper tail of the untruncated rounding
# channel is folded into its last listed output.
_TAIL_FOLD = 1e-18


@dataclass(frozen=True)
class ChannelParams:
    """Spread of the multiplicative timing factor ``K``."""

    epsilon: float
    nu: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be a positive finite number, got {self.epsilon!r}")
        if self.nu != 1.0:
            raise ValueError("only an unbiased timing factor (nu = 1) is supported")


@dataclass(frozen=True)
class Rounding:
    """Round to the nearest positive integer (ties go up).

    ``gamma`` truncates the output to ``[max(1, x - gamma'), x + gamma]``
    around the transmitted length ``x`` with ``gamma' = min(gamma, x - 1)``;
    the mass outside that window is lumped onto its end points.
    ``gamma=None`` means no truncation.
    """

    gamma: int | None = None

    def __post_init__(self):
        if self.gamma is not None and (int(self.gamma) != self.gamma or self.gamma < 1):
            raise ValueError(f"gamma must be an integer >= 1 or None, got {self.gamma!r}")

    @property
    def label(self) -> str:
        return "rounding" if self.gamma is None else f"rounding:{self.gamma}"


@dataclass(frozen=True)
class Thresholded:
    """Map a duration onto ``values`` using half-open decision intervals.

    ``thresholds[i]`` separates ``values[i]`` from ``values[i + 1]``; a
    duration exactly on a threshold goes to the larger value.
    """

    values: tuple[int, ...]
    thresholds: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        thr = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "thresholds", thr)
        if not vals or vals[0] < 1:
            raise ValueError("values must be nonempty positive integers")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("values must be strictly increasing")
        if len(thr) != len(vals) - 1:
            raise ValueError("need exactly one threshold between consecutive values")
        for a, t, b in zip(vals, thr, vals[1:]):
            if not a < t < b:
                raise ValueError(f"threshold {t} does not separate {a} and {b}")

    @classmethod
    def optimal(cls, values: Sequence[int]) -> "Thresholded":
        """Scheme on ``values`` with the pairwise-optimal thresholds."""
        vals = tuple(sorted(int(v) for v in values))
        return cls(vals, tuple(local_threshold(a, b) for a, b in zip(vals, vals[1:])))

    def is_pairwise_optimal(self, tol: float = 1e-12) -> bool:
        return all(
            abs(t - local_threshold(a, b)) <= tol
            for a, t, b in zip(self.values, self.thresholds, self.values[1:])
        )

    @property
    def label(self) -> str:
        vals = self.values
        if self.is_pairwise_optimal():
            if vals == tuple(range(vals[0], vals[-1] + 1)) and len(vals) > 2:
                return f"q:[{vals[0]}-{vals[-1]}]"
            return "q:{" + ",".join(map(str, vals)) + "}"
        return "q:{" + ",".join(map(str, vals)) + "}@" + ",".join(repr(t) for t in self.thresholds)


QuantizationScheme = Union[Rounding, Thresholded]


@dataclass(frozen=True)
class RunSequence:
    """A binary frame written as its first bit and its runlengths."""

    start_polarity: int
    runs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))
        if self.start_polarity not in (0, 1):
            raise ValueError("start_polarity must be 0 or 1")
        if any(r < 1 for r in self.runs):
            raise ValueError("runlengths must be >= 1")

    def __len__(self):
        return len(self.runs)


def q_function(x):
    """Upper tail of the standard normal, ``P(Z > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2) if np.ndim(x) else float(0.5 * erfc(x / _SQRT2))


def interval_probability(lo, hi):
    """``P(lo <= Z < hi)`` for standard normal ``Z``, vectorized.

    Differences are always taken between upper tails on the same side of
    zero, so tiny probabilities far from the mean keep full precision.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    with np.errstate(invalid="ignore"):
        right = q_function(lo) - q_function(hi)
        left = q_function(-hi) - q_function(-lo)
        mid = 1.0 - q_function(hi) - q_function(-lo)
    out = np.where(lo >= 0, right, np.where(hi <= 0, left, mid))
    return np.maximum(out, 0.0)


def shift_probability(length: float, epsilon: float) -> float:
    """Probability that rounding moves a run of ``length`` up by one."""
    return q_function(1.0 / (2.0 * length * epsilon))


def local_threshold(a: int, b: int) -> float:
    """Decision threshold between durations ``a < b`` that equalizes errors."""
    if not (1 <= a < b):
        raise ValueError(f"need 1 <= a < b, got a={a}, b={b}")
    return 2.0 * a * b / (a + b)


def pairwise_decision_error(a: int, b: int, epsilon: float) -> float:
    """Error probability of the optimal two-way decision between ``a`` and ``b``."""
    if not (1 <= a < b):
        raise ValueError(f"need 1 <= a < b, got a={a}, b={b}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return q_function((b - a) / ((a + b) * epsilon))


def quantize(y: float, scheme: QuantizationScheme) -> int:
    if not y > 0:
        raise ValueError(f"received duration must be positive, got {y!r}")
    if isinstance(scheme, Thresholded):
        return scheme.values[bisect_right(scheme.thresholds, y)]
    return max(1, math.floor(y + 0.5))


def _rounding_window(x: int, gamma: int | None) -> tuple[int, int | None]:
    if gamma is None:
        return 1, None
    return max(1, x - min(gamma, x - 1)), x + gamma


def transition_distribution(x: int, scheme: QuantizationScheme, params: ChannelParams) -> dict[int, float]:
    """Exact output law ``{y: P(y | x)}`` for one run of length ``x``."""
    x = int(x)
    if x < 1:
        raise ValueError("input runlength must be >= 1")
    eps = params.epsilon
    if isinstance(scheme, Thresholded):
        if x not in scheme.values:
            raise ValueError(f"run {x} is not an admissible value of {scheme.label}")
        edges = np.array([-np.inf, *scheme.thresholds, np.inf])
        z = (edges / x - 1.0) / eps
        probs = interval_probability(z[:-1], z[1:])
        return {v: float(p) for v, p in zip(scheme.values, probs)}

    low, high = _rounding_window(x, scheme.gamma)
    if high is None:
        # walk upward until the remaining upper tail is negligible
        high = x + 1
        while q_function(((high + 0.5) / x - 1.0) / eps) > _TAIL_FOLD:
            high += 1
    ys = np.arange(low, high + 1)
    lo = ((ys - 0.5) / x - 1.0) / eps
    hi = ((ys + 0.5) / x - 1.0) / eps
    lo[0] = -np.inf
    hi[-1] = np.inf
    probs = interval_probability(lo, hi)
    return {int(y): float(p) for y, p in zip(ys, probs)}


def sample_received_run(x: int, scheme: QuantizationScheme, params: ChannelParams, rng) -> int:
    if isinstance(scheme, Thresholded) and x not in scheme.values:
        raise ValueError(f"run {x} is not an admissible value of {scheme.label}")
    if x < 1:
        raise ValueError("input runlength must be >= 1")
    z = rng.standard_normal()
    return int(channel_outputs(np.array([x]), np.array([z]), scheme, params.epsilon)[0])


def transmit_runs(runs: RunSequence, scheme: QuantizationScheme, params: ChannelParams, rng) -> RunSequence:
    """Pass every run through the channel independently."""
    x = np.asarray(runs.runs, dtype=np.int64)
    if isinstance(scheme, Thresholded):
        bad = set(x.tolist()) - set(scheme.values)
        if bad:
            raise ValueError(f"runs {sorted(bad)} are not admissible values of {scheme.label}")
    z = rng.standard_normal(len(x))
    return RunSequence(runs.start_polarity, tuple(channel_outputs(x, z, scheme, params.epsilon).tolist()))


def channel_outputs(x: np.ndarray, z: np.ndarray, scheme: QuantizationScheme, epsilon: float) -> np.ndarray:
    """Vectorized channel: quantize ``x * (1 + epsilon * z)`` elementwise.

    ``x`` and ``z`` broadcast together; the result has integer dtype.
    Entries of ``x`` are not checked against the scheme's alphabet.
    """
    x = np.asarray(x)
    y = x * (1.0 + epsilon * np.asarray(z, dtype=float))
    if isinstance(scheme, Thresholded):
        vals = np.asarray(scheme.values, dtype=np.int64)
        return vals[np.searchsorted(np.asarray(scheme.thresholds), y, side="right")]
    out = np.floor(y + 0.5)
    if scheme.gamma is None:
        out = np.maximum(out, 1.0)
    else:
        g = scheme.gamma
        out = np.clip(out, np.maximum(1, x - np.minimum(g, x - 1)), x + g)
    return out.astype(np.int64)
