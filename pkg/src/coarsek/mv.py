"""Two-piece decomposition checks and a clutching-projection index detector.

The decomposition machinery verifies, on random banded operators, the two
quantitative axioms that make a pair of overlapping regions usable for
gluing: a coercive splitting x = x1 + x2 with ||x_i|| <= 4 ||x|| along the
three-block structure of the overlap, and the midpoint construction that
approximates two nearby region-supported operators by one supported in the
intersection, within 4 eps.

The detector turns a quasi-unitary u and a cut function phi (1 on one deep
region, 0 on the other, ramping only across the overlap band) into the
projection

    p = W diag(1, 0) W*,   W = R(pi phi / 2) diag(u, 1) R(pi phi / 2)*,

whose spectral projection differs from the reference (u = 1) only near the
cut regions; the rounded partial trace over one cut region is an integer
index detecting the winding of u across that cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controlled import kappa_even, unitary_defects
from .errors import DomainError, PropagationError, VerificationFailure
from .generators import random_banded, random_region_supported, trial_rngs
from .geometry import decompose, neighborhood
from .operator import (
    DEFAULT_TAU,
    FiniteOperator,
    block_abs_max,
    coordinate_mask,
    opnorm,
    restrict,
    support,
)


def split_masks(m1, m2):
    """Disjoint three-block partition (only-1, overlap, only-2) of two masks."""
    m1 = np.asarray(m1, dtype=bool)
    m2 = np.asarray(m2, dtype=bool)
    if not (m1 | m2).all():
        raise DomainError("masks must cover every sample")
    return m1 & ~m2, m1 & m2, m2 & ~m1


def coercive_split(x, masks, tau=DEFAULT_TAU):
    """Split x into region-supported x1 + x2 along a three-block partition.

    The corner blocks joining the two outer regions must vanish below tau
    (guaranteed when the propagation of x is below the region separation);
    then x1 carries blocks {11, 12, 21, 22}, x2 carries {23, 32, 33}, the
    sum reproduces x exactly, and both norms are at most 4 ||x||.
    """
    p1, p2, p3 = masks
    if ((p1 & p2) | (p1 & p3) | (p2 & p3)).any():
        raise DomainError("split masks must be disjoint")
    corners = block_abs_max(x) * (np.outer(p1, p3) | np.outer(p3, p1))
    if corners.max(initial=0.0) > tau:
        y, z = np.unravel_index(np.argmax(corners), corners.shape)
        raise PropagationError(
            f"corner block ({y}, {z}) holds {corners[y, z]} > tau; "
            "propagation too large for this decomposition")
    x1 = restrict(x, p1 | p2, p1 | p2)
    x2 = restrict(x, p2 | p3, p2 | p3) - restrict(x, p2, p2)
    return x1, x2


def cia_midpoint(x, y, masks, eps, tau=DEFAULT_TAU):
    """Midpoint of the overlap blocks of two nearby region-supported operators.

    x must be supported in the (only-1 + overlap) region, y in the
    (overlap + only-2) region, and ||x - y|| < eps; the returned z is
    supported in the overlap and satisfies ||x - z|| <= 4 eps and
    ||y - z|| <= 4 eps.
    """
    s1, s2, s3 = masks
    for op, bad, side in ((x, s3, "first"), (y, s1, "second")):
        reach = block_abs_max(op)
        leak = max(reach[bad, :].max(initial=0.0), reach[:, bad].max(initial=0.0))
        if leak > tau:
            raise PropagationError(
                f"{side} operator leaks {leak} outside its region")
    gap = opnorm(x - y)
    if gap >= eps:
        raise DomainError(f"||x - y|| = {gap} not below eps = {eps}")
    z = restrict(0.5 * (x + y), s2, s2)
    dx, dy = opnorm(x - z), opnorm(y - z)
    if dx > 4 * eps + 1e-12 or dy > 4 * eps + 1e-12:
        raise VerificationFailure(
            f"midpoint distances ({dx}, {dy}) exceed 4 eps = {4 * eps}")
    return z


@dataclass
class MvPair:
    """Operator-support regions, their enlarged neighborhoods, a degree, and
    the coercivity constant they are claimed to satisfy."""

    delta1: np.ndarray
    delta2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    r: float
    coercity: float = 4.0

    def __post_init__(self):
        if not ((~self.delta1 | self.a1).all() and (~self.delta2 | self.a2).all()):
            raise DomainError("each region must sit inside its neighborhood")

    @classmethod
    def from_decomposition(cls, space, complex_, r=1 / 50, margin=1 / 10):
        x1, x2 = decompose(space, complex_)
        return cls(x1, x2, neighborhood(space, x1, margin),
                   neighborhood(space, x2, margin), r)


def neighborhood_containment(space, delta_mask, a_mask, r, trials=20, seed=0,
                             amplification=1, tau=DEFAULT_TAU):
    """Randomized check that band-limited multiples of region-supported
    operators stay supported in the enlarged neighborhood.

    Draws a, a' with propagation below 5r and d supported in the region,
    and scans the supports of a d, d a, and a d a' against the
    neighborhood; violating point pairs are reported, not raised.
    """
    delta_mask = np.asarray(delta_mask, dtype=bool)
    a_mask = np.asarray(a_mask, dtype=bool)
    outside = ~a_mask
    violations = []
    for t, rng in enumerate(trial_rngs(seed, trials)):
        a = random_banded(space, 5 * r, rng, amplification)
        a2 = random_banded(space, 5 * r, rng, amplification)
        d = random_region_supported(space, delta_mask, rng, amplification)
        for label, prod in (("a*d", a @ d), ("d*a", d @ a), ("a*d*a'", a @ d @ a2)):
            sup = support(prod, tau)
            bad = sup & (np.outer(outside, np.ones_like(outside))
                         | np.outer(np.ones_like(outside), outside))
            if bad.any():
                yx = tuple(int(v) for v in np.argwhere(bad)[0])
                violations.append({"trial": t, "product": label, "pair": yx})
    return {"trials": trials, "radius": r, "violations": violations,
            "passed": not violations}


def verify_weak_mv_pair(space, pair, trials=100, seed=0, eps=0.05,
                        amplification=1, tau=DEFAULT_TAU):
    """Exercise the splitting and midpoint axioms at a grid of scales s <= r.

    Random banded operators at each scale are split along the region
    partition and recombined; random region-supported pairs feed the
    midpoint construction.  Reports the worst measured constants against
    the claimed coercivity and a plot-ready table.
    """
    p1, p2, p3 = split_masks(pair.delta1, pair.delta2)
    s_grid = [pair.r / 4, pair.r / 2, pair.r * 3 / 4, pair.r]
    per_scale = max(1, trials // len(s_grid))
    worst_split = 0.0
    worst_recon = 0.0
    worst_cia = 0.0
    rows = []
    rngs = iter(trial_rngs(seed, per_scale * len(s_grid) + len(s_grid)))
    for s in s_grid:
        scale_split = 0.0
        scale_cia = 0.0
        sig1 = neighborhood(space, pair.delta1, 1 / 10 + s)
        sig_masks = split_masks(sig1, neighborhood(space, pair.delta2, 1 / 10 + s))
        for _ in range(per_scale):
            rng = next(rngs)
            x = random_banded(space, s, rng, amplification, norm=1.0)
            x1, x2 = coercive_split(x, (p1, p2, p3), tau)
            nx = opnorm(x)
            worst_recon = max(worst_recon,
                              float(np.abs((x1 + x2 - x).concrete()).max()))
            scale_split = max(scale_split, opnorm(x1) / nx, opnorm(x2) / nx)

            core = random_region_supported(space, sig_masks[1], rng,
                                           amplification, norm=1.0)
            lobe1 = random_region_supported(space, sig_masks[0] | sig_masks[1],
                                            rng, amplification, norm=1.0)
            lobe2 = random_region_supported(space, sig_masks[1] | sig_masks[2],
                                            rng, amplification, norm=1.0)
            xa = core + (eps / 2) * lobe1
            ya = core + (eps / 2) * lobe2
            gap = opnorm(xa - ya)
            z = cia_midpoint(xa, ya, sig_masks, max(gap, 1e-12) * (1 + 1e-9), tau)
            if gap > 1e-12:
                scale_cia = max(scale_cia, opnorm(xa - z) / gap,
                                opnorm(ya - z) / gap)
        worst_split = max(worst_split, scale_split)
        worst_cia = max(worst_cia, scale_cia)
        rows.append((f"split_ratio s={s:.6g}", scale_split, pair.coercity,
                     pair.coercity - scale_split))
        rows.append((f"cia_ratio s={s:.6g}", scale_cia, pair.coercity,
                     pair.coercity - scale_cia))
    passed = (worst_split <= pair.coercity + 1e-9
              and worst_cia <= pair.coercity + 1e-9
              and worst_recon <= 1e-14)
    return {
        "trials": per_scale * len(s_grid),
        "degree": pair.r,
        "worst_split_ratio": worst_split,
        "worst_cia_ratio": worst_cia,
        "worst_reconstruction": worst_recon,
        "coercity_bound": pair.coercity,
        "passed": passed,
        "table": rows,
    }


# -- cut functions and the index detector -----------------------------------


@dataclass
class CutFunction:
    """Per-sample values in [0, 1] whose ramp is confined to a declared band."""

    values: np.ndarray
    band: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if ((self.values < 0) | (self.values > 1)).any():
            raise DomainError("cut values must lie in [0, 1]")
        if self.band is None:
            self.band = (self.values > 0) & (self.values < 1)
        self.band = np.asarray(self.band, dtype=bool)
        ramp = (self.values > 0) & (self.values < 1)
        if (ramp & ~self.band).any():
            raise DomainError("cut ramp escapes the declared band")


def cut_from_decomposition(space, complex_):
    """Cut function from the normalized center distance: 1 on the deep inner
    piece, 0 on the deep outer piece, linear across the [0.45, 0.55] band."""
    from .geometry import center_distances

    dmin = np.full(len(space), np.inf)
    for s in complex_.top_simplices():
        dmin = np.minimum(dmin, center_distances(space, complex_, s))
    vals = np.clip((0.55 - dmin) / 0.1, 0.0, 1.0)
    vals[~np.isfinite(dmin)] = 0.0
    band = (dmin >= 0.45) & (dmin <= 0.55)
    return CutFunction(vals, band)


def arc_positions(space, order):
    """Fractional arc-length position of each ordered circle sample."""
    hops = np.array([space.dist[order[i], order[(i + 1) % len(order)]]
                     for i in range(len(order))])
    total = float(hops.sum())
    pos = np.zeros(len(order))
    pos[1:] = np.cumsum(hops[:-1]) / total
    out = np.zeros(len(space))
    out[order] = pos
    return out


def circle_cut(space, order, width=0.1):
    """Smoothed indicator of the upper arc of an ordered circle.

    Returns the cut function plus the two cut-region masks (around arc
    positions 0 and 1/2), each wide enough to contain its ramp.
    """
    if not 0 < width < 0.25:
        raise DomainError("ramp width must lie in (0, 1/4)")
    pos = arc_positions(space, order)
    vals = np.zeros(len(space))
    for i, t in enumerate(pos):
        if t >= 1 - width:
            vals[i] = (t - (1 - width)) / (2 * width)
        elif t < width:
            vals[i] = (t + width) / (2 * width)
        elif t <= 0.5 - width:
            vals[i] = 1.0
        elif t < 0.5 + width:
            vals[i] = (0.5 + width - t) / (2 * width)
    wrap = np.minimum(pos, 1 - pos)
    region0 = wrap <= 2 * width
    region1 = np.abs(pos - 0.5) <= 2 * width
    band = (vals > 0) & (vals < 1)
    return CutFunction(vals, band | region0 | region1), region0, region1


def _pointwise_rotation(space, amplification, phi):
    theta = np.repeat(0.5 * math.pi * phi.values, space.internal_dims)
    theta = np.tile(theta, amplification)
    c = np.diag(np.cos(theta)).astype(complex)
    s = np.diag(np.sin(theta)).astype(complex)
    return np.block([[c, s], [-s, c]])


def clutching_projection(u, phi):
    """The clutching projection of a quasi-unitary along a cut function.

    Exactly a projection when u is exactly unitary; in general
    ||p^2 - p|| <= ||W||^2 max(||u*u - 1||, ||uu* - 1||).  Its propagation
    never exceeds twice the propagation of u since the rotation acts
    pointwise.
    """
    if phi.values.shape != (len(u.space),):
        raise DomainError("cut function must match the operator's space")
    n = u.dim
    rot = _pointwise_rotation(u.space, u.amplification, phi)
    w = rot @ np.block([[u.concrete(), np.zeros((n, n))],
                        [np.zeros((n, n)), np.eye(n)]]) @ rot.conj().T
    d10 = np.zeros((2 * n, 2 * n), dtype=complex)
    d10[:n, :n] = np.eye(n)
    p = w @ d10 @ w.conj().T
    p = (p + p.conj().T) / 2
    return FiniteOperator(u.space, p, 2 * u.amplification)


def local_index(u, phi, region, tau=DEFAULT_TAU):
    """Rounded partial trace of chi(p(u, phi)) - chi(p(1, phi)) over one cut
    region; integral within 0.1, else the detector reports itself
    inconclusive (refine the mesh or shrink the propagation)."""
    p_u = clutching_projection(u, phi)
    one = FiniteOperator.identity(u.space, u.amplification, unitized=False)
    p_1 = clutching_projection(one, phi)
    for p in (p_u, p_1):
        m = p.concrete()
        if opnorm(m @ m - m) >= 0.25:
            raise DomainError("clutching projection has no spectral gap; "
                              f"unitary defects {unitary_defects(u)} too large")
    diff = kappa_even(p_u).concrete() - kappa_even(p_1).concrete()
    mask = coordinate_mask(u.space, p_u.amplification, region)
    raw = float(np.real(np.diag(diff)[mask].sum()))
    nearest = round(raw)
    if abs(raw - nearest) > 0.1:
        raise DomainError(
            f"detector inconclusive: partial trace {raw} not within 0.1 of an "
            "integer; refine the mesh or shrink r")
    return int(nearest)
