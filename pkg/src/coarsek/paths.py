"""Sampled operator paths with propagation-decay bookkeeping.

A path records operators at finitely many times starting at 1, up to a
horizon, together with its uniform-continuity modulus (the largest
consecutive norm gap).  The asymptotic condition "propagation tends to 0"
becomes: propagation drops below the requested bound by some sampled time
and stays there through the horizon.

Quasi-element checks in path contexts run at the stricter eps < 1/8 gate
(the doubled level 2 eps must itself stay a valid control level); reports
record which bound gated each check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controlled import QuasiParams, is_quasi_projection, is_quasi_unitary
from .errors import DomainError, NoDecayError
from .operator import DEFAULT_TAU, opnorm, propagation

PATH_EPS_GATE = 1 / 8


@dataclass
class PathOperator:
    """Operators sampled along [1, horizon] with recorded modulus."""

    times: np.ndarray
    values: list
    modulus: float = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) != len(self.values):
            raise DomainError("one operator per sampled time required")
        if self.times[0] != 1.0:
            raise DomainError("paths start at time 1")
        if (np.diff(self.times) <= 0).any():
            raise DomainError("times must be strictly increasing")
        gaps = [opnorm(b - a) for a, b in zip(self.values, self.values[1:])]
        measured = max(gaps, default=0.0)
        if self.modulus is None:
            self.modulus = measured
        elif measured > self.modulus + 1e-12:
            raise DomainError(
                f"recorded modulus {self.modulus} below measured gap {measured}")

    def __len__(self):
        return len(self.values)

    @property
    def horizon(self):
        return float(self.times[-1])

    def time_index(self, t):
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))
        if not hit.size:
            raise DomainError(f"time {t} is not sampled")
        return int(hit[0])


def eventual_propagation(path, r, tau=DEFAULT_TAU):
    """Earliest sampled time from which propagation stays below r.

    Raises when even the final sample is too spread out (no decay by the
    horizon)."""
    props = [propagation(v, tau) for v in path.values]
    below = np.array([p < r for p in props])
    if not below[-1]:
        raise NoDecayError(
            f"propagation {props[-1]} at the horizon still >= {r}")
    # last index where the bound fails, then the next sampled time
    failing = np.flatnonzero(~below)
    start = int(failing[-1]) + 1 if failing.size else 0
    return float(path.times[start])


def trim(path, n_time):
    """Shift the path to start at a sampled time, re-indexed to begin at 1."""
    i = path.time_index(n_time)
    times = path.times[i:] - path.times[i] + 1.0
    return PathOperator(times, list(path.values[i:]), path.modulus)


def evaluate(path, t, interpolate=False):
    """The operator at a sampled time, or the linear blend between the two
    neighbors when interpolation is enabled."""
    try:
        return path.values[path.time_index(t)]
    except DomainError:
        if not interpolate:
            raise
    if not path.times[0] <= t <= path.times[-1]:
        raise DomainError(f"time {t} outside [1, {path.horizon}]")
    j = int(np.searchsorted(path.times, t))
    t0, t1 = path.times[j - 1], path.times[j]
    lam = (t - t0) / (t1 - t0)
    return (1 - lam) * path.values[j - 1] + lam * path.values[j]


def check_path_quasi(path, params, parity="even", tau=DEFAULT_TAU):
    """Per-sample quasi-test with the stricter path-context eps gate.

    Returns (verdict, report); the report records whether the 1/8 path gate
    or the generic 1/4 level bound was the binding constraint.
    """
    if params.eps >= PATH_EPS_GATE:
        raise DomainError(
            f"path contexts require eps < {PATH_EPS_GATE}; got {params.eps}")
    gate = "1/8" if params.eps * 2 >= 0.25 or params.eps >= PATH_EPS_GATE / 2 \
        else "1/4"
    test = is_quasi_projection if parity == "even" else is_quasi_unitary
    sample_reports = []
    ok = True
    for t, v in zip(path.times, path.values):
        good, wit = test(v, params, tau)
        ok = ok and good
        sample_reports.append({"time": float(t), "ok": good, **wit})
    return ok, {"parity": parity, "eps_gate": gate,
                "modulus": path.modulus, "samples": sample_reports}


def interpolated_params(path, params):
    """Control level valid for every linear interpolant of the path, via the
    perturbation bound applied to each step."""
    bound = params.eps + 5 * path.modulus
    if bound >= 0.25:
        raise DomainError("modulus too large; interpolants leave the regime")
    return QuasiParams(bound, params.r)
