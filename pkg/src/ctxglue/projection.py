"""Two-branch realization weights, phased gluing and interference.

For a binary partition {A, not-A} and a target event B, each branch carries
a classical weight ``r = sqrt(P(branch) P(B | branch))``.  Transport through
the context atlas attaches a phase to each branch; projecting the glued sum
back to a probability gives ``|r_A + r_notA e^{i theta}|^2``, which is the
law of total probability plus the cross term ``2 r_A r_notA cos(theta)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

DEFAULT_TOL = 1e-9
RANGE_TOL = 1e-12
TWO_PI = 2.0 * math.pi


class DegenerateBranchError(ValueError):
    pass


def _check_prob(name, v):
    if not (0.0 <= v <= 1.0) or math.isnan(v):
        raise ValueError(f"{name}={v!r} is not a probability")


@dataclass(frozen=True)
class BranchData:
    pA: float
    pB_given_A: float
    pBarA: float
    pB_given_BarA: float

    def __post_init__(self):
        for name in ("pA", "pB_given_A", "pBarA", "pB_given_BarA"):
            _check_prob(name, getattr(self, name))
        if abs(self.pA + self.pBarA - 1.0) > DEFAULT_TOL:
            raise ValueError(f"pA + pBarA = {self.pA + self.pBarA!r}, not 1")

    @classmethod
    def from_partition(cls, pA: float, pB_given_A: float, pB_given_BarA: float) -> "BranchData":
        return cls(pA, pB_given_A, 1.0 - pA, pB_given_BarA)

    def complement(self) -> "BranchData":
        """Branch data for the event not-B over the same partition."""
        return BranchData(self.pA, 1.0 - self.pB_given_A, self.pBarA, 1.0 - self.pB_given_BarA)


@dataclass(frozen=True)
class RealizationAmplitude:
    magnitude: float
    phase: float

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        object.__setattr__(self, "phase", float(self.phase) % TWO_PI)

    @property
    def value(self) -> complex:
        return cmath.rect(self.magnitude, self.phase)


@dataclass(frozen=True)
class GluingPhase:
    """Relative phase of the not-A branch against the A branch, kept in [0, 2pi)."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", reduce_phase(self.theta))

    def __float__(self):
        return self.theta


Phase = Union[float, GluingPhase]


def reduce_phase(x: float) -> float:
    """Reduce to [0, 2pi)."""
    r = math.fmod(float(x), TWO_PI)
    if r < 0:
        r += TWO_PI
    return 0.0 if r >= TWO_PI else r


class Projection(NamedTuple):
    probability: float
    in_range: bool


class PhaseFit(NamedTuple):
    theta: float  # in [0, pi]
    feasible: bool
    excess: float  # distance of the observation beyond the reachable band; 0 inside
    cos_theta: float  # unclamped


def ltp_predict(d: BranchData) -> float:
    return d.pA * d.pB_given_A + d.pBarA * d.pB_given_BarA


def realization_weights(d: BranchData) -> tuple[float, float]:
    return math.sqrt(d.pA * d.pB_given_A), math.sqrt(d.pBarA * d.pB_given_BarA)


def glued_amplitudes(d: BranchData, theta: Phase) -> tuple[RealizationAmplitude, RealizationAmplitude]:
    rA, rBarA = realization_weights(d)
    return RealizationAmplitude(rA, 0.0), RealizationAmplitude(rBarA, float(theta))


def glued_projection(d: BranchData, theta: Phase) -> Projection:
    """Squared norm of the glued branch sum; never clamped, flagged when outside [0, 1]."""
    a, abar = glued_amplitudes(d, theta)
    p = abs(a.value + abar.value) ** 2
    return Projection(p, -RANGE_TOL <= p <= 1.0 + RANGE_TOL)


def interference_term(d: BranchData, theta: Phase) -> float:
    rA, rBarA = realization_weights(d)
    return 2.0 * rA * rBarA * math.cos(float(theta))


def extract_phase(observed: float, d: BranchData, tol: float = DEFAULT_TOL) -> PhaseFit:
    """Invert the projection for the gluing phase given an observed P(B).

    Only |theta| is identifiable from a single total, so the result lies in
    [0, pi].  When the observation lies outside the reachable band
    ``LTP +- 2 r_A r_notA`` so that ``|cos theta|`` would exceed ``1 + tol``,
    the fit is flagged infeasible and ``theta`` is pinned to the nearest band
    edge (0 or pi); ``excess`` reports the overshoot in probability units.
    """
    rA, rBarA = realization_weights(d)
    scale = 2.0 * rA * rBarA
    if scale == 0.0:
        raise DegenerateBranchError(
            "one realization weight is zero, so there is no cross term and the phase is undefined"
        )
    cos_t = (observed - ltp_predict(d)) / scale
    over = max(abs(cos_t) - 1.0, 0.0)
    return PhaseFit(math.acos(max(-1.0, min(1.0, cos_t))), over <= tol, over * scale, cos_t)


def binary_consistency(dB: BranchData, dNotB: BranchData, thetaB: Phase, thetaNotB: Phase,
                       tol: float = DEFAULT_TOL) -> float:
    """|P(B) + P(not B) - 1| for the two glued projections."""
    if (abs(dB.pA - dNotB.pA) > tol
            or abs(dB.pB_given_A + dNotB.pB_given_A - 1.0) > tol
            or abs(dB.pB_given_BarA + dNotB.pB_given_BarA - 1.0) > tol):
        raise ValueError("dNotB must share the partition of dB and carry complementary conditionals")
    total = glued_projection(dB, thetaB).probability + glued_projection(dNotB, thetaNotB).probability
    return abs(total - 1.0)
