"""Balanced-compromise tool: minimize a private objective near the consensus.

Solves

    min  J(x)   s.t.  ||x - consensus||_2 <= radius,  x in feasible box

for a linear J. The KKT system makes the solution explicit: either the
box minimizer already lies inside the ball, or the ball constraint is
active and x(mu) = clip_box(consensus - gradient/mu) for the multiplier
mu > 0 that puts x(mu) on the ball boundary. ||x(mu) - consensus|| is
monotone in mu, so a bisection pins the multiplier to machine precision.

The radius encodes willingness to move: radius 0 concedes fully to the
consensus, radius equal to the current distance imposes no movement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FeasibleSet, SetpointVector, distance
from .objectives import ObjectiveSpec

_BISECTION_STEPS = 200


def flexibility_to_radius(flexibility: float, d: float) -> float:
    """Map a unitless flexibility factor in [0, 1] to a ball radius.

    Flexibility 1 concedes fully (radius 0); flexibility 0 keeps the
    full current distance d (no required movement).
    """
    if not (0.0 <= flexibility <= 1.0):
        raise ValueError(f"flexibility {flexibility} outside [0, 1]")
    if d < 0.0:
        raise ValueError(f"distance {d} must be >= 0")
    return (1.0 - flexibility) * d


@dataclass(frozen=True)
class CompromiseRequest:
    """One compromise query: objective, box, consensus anchor, and radius.

    `desired` is the point the agent currently wants (its unconstrained
    optimum at the start of a session, its latest offer thereafter); the
    radius may not exceed its distance to the consensus. Both anchor
    points are projected into the box at construction.
    """

    objective: ObjectiveSpec
    feasible: FeasibleSet
    consensus: SetpointVector
    desired: SetpointVector
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "consensus", self.feasible.clip(self.consensus))
        object.__setattr__(self, "desired", self.feasible.clip(self.desired))
        d = distance(self.desired, self.consensus)
        if self.radius < -1e-12 or self.radius > d + 1e-9:
            raise ValueError(f"radius {self.radius} outside [0, {d}]")
        object.__setattr__(self, "radius", min(max(self.radius, 0.0), d))


def _shrink_onto_ball(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    delta = x - center
    norm = float(np.linalg.norm(delta))
    if norm <= radius or norm == 0.0:
        return x
    return center + delta * (radius / norm)


def balanced_compromise(req: CompromiseRequest) -> SetpointVector:
    """Minimizer of the request's objective over ball(consensus) ∩ box."""
    req.objective.gradient._check_same_devices(req.consensus)
    if req.radius <= 0.0:
        return req.consensus
    g = req.objective.gradient.to_array()
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        return req.consensus  # every feasible point is optimal
    center = req.consensus.to_array()
    lower = req.feasible.lower.to_array()
    upper = req.feasible.upper.to_array()

    # ball inactive: the box minimizer is within reach
    # (zero-coefficient devices stay at the consensus: minimal movement)
    x_box = np.where(g > 0, lower, np.where(g < 0, upper, center))
    if float(np.linalg.norm(x_box - center)) <= req.radius:
        return SetpointVector.from_array(req.consensus.devices, x_box)

    # ball active: bisect the ball multiplier
    def reach(mu: float) -> float:
        return float(np.linalg.norm(np.clip(center - g / mu, lower, upper) - center))

    mu_hi = 2.0 * g_norm / req.radius  # reach(mu_hi) <= radius (clip is nonexpansive)
    mu_lo = mu_hi * 1e-18  # reach(mu_lo) ~ the box minimizer, outside the ball
    for _ in range(_BISECTION_STEPS):
        mu_mid = 0.5 * (mu_lo + mu_hi)
        if reach(mu_mid) > req.radius:
            mu_lo = mu_mid
        else:
            mu_hi = mu_mid
    x = np.clip(center - g / mu_hi, lower, upper)
    # exactify feasibility: shrinking toward the in-box center stays in box
    x = np.clip(_shrink_onto_ball(x, center, req.radius), lower, upper)
    return SetpointVector.from_array(req.consensus.devices, x)
