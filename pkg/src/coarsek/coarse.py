"""Coarse maps between sampled spaces, isometry covers, the induced
conjugation functor, and homotopy certificates for coarsely homotopic maps.

A delta-cover of a map f is an isometry between the modules whose support
pairs (y, x) all satisfy d(y, f(x)) < delta; conjugating by it moves
operators from the source algebra to the target algebra while stretching
propagation by at most the expansion of f plus 2 delta.  Two covers of the
same map are linked by an explicit two-by-two rotation homotopy, and a
uniformly Lipschitz homotopy of maps yields a certified path between the
transported representatives built from a chain of covers along a fine
partition of the homotopy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .controlled import (
    HomotopyCertificate,
    QuasiParams,
    is_quasi_unitary,
    quasi_defect,
    verify_certificate,
)
from .errors import CapacityError, CertificateError, DomainError, ShapeError
from .operator import (
    DEFAULT_TAU,
    FiniteOperator,
    amplify_scalar_matrix,
    direct_sum,
    opnorm,
)


class CoarseMap:
    """A sample-to-sample map between two sampled spaces."""

    def __init__(self, source, target, assignment):
        self.source = source
        self.target = target
        self.assignment = np.asarray(assignment, dtype=int)
        if self.assignment.shape != (len(source),):
            raise ShapeError("one target index per source point required")
        if ((self.assignment < 0) | (self.assignment >= len(target))).any():
            raise DomainError("assignment hits indices outside the target")
        self.fiber_sizes = np.bincount(self.assignment, minlength=len(target))

    def __call__(self, i):
        return int(self.assignment[i])

    @classmethod
    def identity(cls, space):
        return cls(space, space, np.arange(len(space)))

    def displacement(self, other):
        """Sup over source points of the target distance between images."""
        if other.source is not self.source or other.target is not self.target:
            raise ShapeError("maps must share source and target")
        return float(np.max(self.target.dist[self.assignment, other.assignment],
                            initial=0.0))

    def lipschitz_constant(self):
        """Max ratio d(f(x), f(y)) / d(x, y) over finite-distance pairs."""
        dsrc = self.source.dist
        dtgt = self.target.dist[np.ix_(self.assignment, self.assignment)]
        finite = np.isfinite(dsrc) & (dsrc > 0)
        if not finite.any():
            return 0.0
        return float(np.max(dtgt[finite] / dsrc[finite]))


def expansion_function(f, r):
    """sup { d(f(x1), f(x2)) : d(x1, x2) < r } over sampled pairs."""
    close = f.source.dist < r
    if not close.any():
        return 0.0
    dtgt = f.target.dist[np.ix_(f.assignment, f.assignment)]
    return float(dtgt[close].max())


def retraction_coarse_map(space, complex_, mask, kind):
    """Package a piece retraction as a coarse map from the masked subspace.

    Returns (map, indices): the map sends the subspace of masked samples
    into the full space along the retraction table, and its measured
    Lipschitz constant is the empirical uniform constant of that piece.
    """
    from .geometry import retract_onto_pieces

    table = retract_onto_pieces(space, complex_, mask, kind)
    sub, idx = space.subspace(mask)
    return CoarseMap(sub, space, table[idx]), idx


@dataclass
class CoverIsometry:
    """An isometry of modules supported delta-near the graph of a map."""

    map: CoarseMap
    delta: float
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        src, tgt = self.map.source, self.map.target
        if self.matrix.shape != (tgt.total_dim, src.total_dim):
            raise ShapeError("cover matrix shape mismatch")
        gram = self.matrix.conj().T @ self.matrix
        if opnorm(gram - np.eye(src.total_dim)) > 1e-12:
            raise DomainError("cover matrix is not an isometry to 1e-12")
        bad = self.support_violations()
        if bad:
            raise DomainError(f"support pair {bad[0]} farther than delta from the graph")

    def support_violations(self, tau=DEFAULT_TAU):
        """Exhaustive scan of the support condition d(y, f(x)) < delta."""
        src, tgt = self.map.source, self.map.target
        out = []
        for y in range(len(tgt)):
            ys = slice(tgt.offsets[y], tgt.offsets[y + 1])
            for x in range(len(src)):
                xs = slice(src.offsets[x], src.offsets[x + 1])
                if np.abs(self.matrix[ys, xs]).max(initial=0.0) > tau:
                    if not tgt.dist[y, self.map(x)] < self.delta:
                        out.append((y, x))
        return out

    def range_projection(self):
        return self.matrix @ self.matrix.conj().T


def delta_cover(f, delta, bias="nearest"):
    """Deterministic fiber packing: each source coordinate goes to a distinct
    coordinate of an admissible target point (d(y, f(x)) < delta), solved as
    a minimum-cost assignment so nearest targets are preferred and any
    feasible packing is found.

    ``bias`` breaks cost ties ("nearest" prefers low fiber slots,
    "pack-high" prefers high ones), giving genuinely different covers of
    the same map whenever the targets have slack capacity.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    if bias not in ("nearest", "pack-high"):
        raise DomainError(f"unknown bias {bias!r}")
    src, tgt = f.source, f.target
    if src.total_dim > tgt.total_dim:
        raise CapacityError(
            f"source module dimension {src.total_dim} exceeds the target's "
            f"{tgt.total_dim}; no isometry exists")
    admissible = tgt.dist[:, f.assignment] < delta  # (target point, source point)
    demand = src.internal_dims
    supply_of = tgt.internal_dims
    for x in range(len(src)):
        if supply_of[admissible[:, x]].sum() < demand[x]:
            raise CapacityError(
                f"target fibers within delta={delta} of f({x}) cannot absorb "
                f"a fiber of dimension {demand[x]}")
    cost = np.full((src.total_dim, tgt.total_dim), np.inf)
    tgt_point = tgt.point_of_coord
    slot_rank = np.concatenate([np.arange(d) for d in tgt.internal_dims])
    tie = slot_rank if bias == "nearest" else slot_rank.max() - slot_rank
    for x in range(len(src)):
        open_slots = admissible[:, x][tgt_point]
        row = np.where(open_slots, tgt.dist[tgt_point, f(x)] + 1e-9 * tie, np.inf)
        cost[src.offsets[x]:src.offsets[x + 1], :] = row
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError as exc:
        raise CapacityError(
            f"no isometry packing exists at delta={delta}: {exc}") from exc
    matrix = np.zeros((tgt.total_dim, src.total_dim))
    matrix[cols, rows] = 1.0
    return CoverIsometry(f, delta, matrix)


def ad(cover, op):
    """Transport an operator through a cover: V T V* blockwise over copies.

    Unitization elements keep their scalar vector (the unital extension),
    so quasi-unitaries stay quasi-unitary with the same defect.
    """
    src, tgt = cover.map.source, cover.map.target
    if op.space.total_dim != src.total_dim:
        raise ShapeError("operator does not live over the cover's source")
    v = np.kron(np.eye(op.amplification), cover.matrix)
    entries = v @ op.entries @ v.conj().T
    return FiniteOperator(tgt, entries, op.amplification, op.scalar)


def ad_doubled(pair_matrix, op):
    """Conjugate a doubled-module operator (amplification 2k) by a raw
    isometry of the doubled modules; needs a constant scalar vector."""
    if op.scalar is not None and not np.allclose(op.scalar, op.scalar[0]):
        raise DomainError("doubled transport needs a constant scalar part")
    entries = pair_matrix @ op.entries @ pair_matrix.conj().T
    return entries, (None if op.scalar is None else op.scalar[0])


def _rotation2(theta, halves_dim):
    c, s = math.cos(theta), math.sin(theta)
    eye = np.eye(halves_dim)
    return np.block([[c * eye, s * eye], [-s * eye, c * eye]])


def swap_unitary(Vf, Vg):
    """The self-adjoint unitary exchanging the ranges of two covers."""
    v, w = Vf.matrix, Vg.matrix
    py, qy = v @ v.conj().T, w @ w.conj().T
    eye = np.eye(py.shape[0])
    return np.block([[eye - py, v @ w.conj().T],
                     [w @ v.conj().T, eye - qy]])


def _lift_doubled(matrix, k, module_dim):
    """Lift a (2D, 2D) doubled-module matrix to k inner copies.

    Copy ordering groups the k copies inside each module half, matching the
    copy-major layout of a 2k-amplification operator.
    """
    if k == 1:
        return matrix
    D = module_dim
    eye = np.eye(k)
    return np.block([[np.kron(eye, matrix[i * D:(i + 1) * D, j * D:(j + 1) * D])
                      for j in range(2)] for i in range(2)])


def rotation_homotopy(Vf, Vg, p, params, R=None, steps=None, tau=DEFAULT_TAU,
                      max_steps=4096):
    """Certificate joining diag(V_f p V_f*, 0, 0, 0) to diag(0, V_g p V_g*, 0, 0)
    over 4x amplification, through quasi-projections at (eps, R + 8 delta).

    Both covers must cover the same map at the same delta; R defaults to the
    measured expansion of the map at the declared propagation level.
    """
    from .controlled import is_quasi_projection

    if Vf.map is not Vg.map and not np.array_equal(Vf.map.assignment,
                                                   Vg.map.assignment):
        raise DomainError("covers must cover the same map")
    if Vf.delta != Vg.delta:
        raise DomainError("covers must share delta")
    ok, wit = is_quasi_projection(p, params, tau)
    if not ok:
        raise DomainError(f"input fails its quasi-projection test: {wit}")
    delta = Vf.delta
    omega = expansion_function(Vf.map, params.r)
    if R is None:
        R = omega * (1 + 1e-12) + 1e-12
    elif omega >= R:
        raise DomainError(f"expansion {omega} not below R={R}")
    ambient = QuasiParams(params.eps, R + 8 * delta)

    tgt = Vf.map.target
    k = p.amplification
    kd = k * tgt.total_dim
    u_lift = _lift_doubled(swap_unitary(Vf, Vg), k, tgt.total_dim)
    x = np.zeros((4 * kd, 4 * kd), dtype=complex)
    x[:kd, :kd] = ad(Vf, p).concrete()
    zero2 = np.zeros((2 * kd, 2 * kd))
    eye2 = np.eye(2 * kd)
    diag_u_1 = np.block([[u_lift, zero2], [zero2, eye2]])
    diag_1_ustar = np.block([[eye2, zero2], [zero2, u_lift.conj().T]])

    def sample(t):
        theta = (1.0 - t) * math.pi / 2
        rot = _rotation2(theta, 2 * kd)
        u_t = diag_u_1 @ rot @ diag_1_ustar @ rot.conj().T
        out = u_t @ x @ u_t.conj().T
        return FiniteOperator(tgt, (out + out.conj().T) / 2, 4 * k)

    return _certify_path(sample, "even", ambient, steps, tau, max_steps)


def _certify_path(sample_fn, parity, ambient, steps, tau, max_steps):
    """Sample a continuous path finely enough that the certificate verifies.

    A coarse probe estimates the arc length plus the worst sample defect,
    which fixes the step budget the perturbation margin allows; the sampled
    certificate is then verified outright (and refined if the estimate was
    optimistic)."""
    explicit = steps is not None
    if explicit:
        n = steps
    else:
        probe_ts = np.linspace(0.0, 1.0, 9)
        probe = [sample_fn(t) for t in probe_ts]
        arc = sum(opnorm(b - a) for a, b in zip(probe, probe[1:]))
        worst = max(quasi_defect(s, parity) for s in probe)
        margin = ambient.eps - worst
        if margin <= 0:
            raise CertificateError(
                f"probe sample defect {worst} already exceeds eps {ambient.eps}")
        step_budget = 1.8 * math.sqrt(margin)
        n = max(8, math.ceil(arc / step_budget * 1.1))
        if n > max_steps:
            raise CertificateError(
                f"certificate would need {n} > {max_steps} steps")
    while True:
        ts = np.linspace(0.0, 1.0, n + 1)
        samples = [sample_fn(t) for t in ts]
        bounds = [opnorm(b - a) for a, b in zip(samples, samples[1:])]
        cert = HomotopyCertificate(parity, samples, ambient, bounds)
        ok, report = verify_certificate(cert, tau)
        if ok:
            return cert
        if explicit or n >= max_steps:
            raise CertificateError(
                f"path not certifiable at {n} steps: {report['failures'][:3]}")
        n *= 2


def partition_homotopy(F, delta):
    """Minimal frame subsequence with consecutive sup-displacement < delta."""
    frames = F.frames
    idx = [0]
    i = 0
    while i < len(frames) - 1:
        j = None
        for cand in range(len(frames) - 1, i, -1):
            if frames[i].displacement(frames[cand]) < delta:
                j = cand
                break
        if j is None:
            raise CertificateError(
                f"adjacent frames past index {i} already displace >= {delta}; "
                "supply denser frames")
        idx.append(j)
        i = j
    return idx


class LipschitzHomotopy:
    """An ordered family of coarse maps with recorded displacement table and
    a uniform Lipschitz bound."""

    def __init__(self, frames, lipschitz_bound=None):
        if len(frames) < 1:
            raise DomainError("need at least one frame")
        self.frames = list(frames)
        src, tgt = frames[0].source, frames[0].target
        for f in frames:
            if f.source is not src or f.target is not tgt:
                raise ShapeError("all frames must share source and target")
        self.displacement_table = [a.displacement(b) for a, b
                                   in zip(self.frames, self.frames[1:])]
        measured = max((f.lipschitz_constant() for f in self.frames), default=0.0)
        self.lipschitz_bound = lipschitz_bound if lipschitz_bound is not None \
            else measured
        self.measured_lipschitz = measured

    def check_table(self):
        for i, bound in enumerate(self.displacement_table):
            actual = self.frames[i].displacement(self.frames[i + 1])
            if actual > bound:
                return False, i
        return True, None


def _cyclic_fraction(m, s):
    """Fractional power of the m-cycle block shift e_j -> e_{j+1}, exactly
    unitary for every s."""
    j = np.arange(m)
    f = np.exp(2j * np.pi * np.outer(j, j) / m) / math.sqrt(m)
    lam = np.exp(-2j * np.pi * j / m)
    return (f * lam ** s) @ f.conj().T


def _dsum2(u):
    """u (+) I over the source, amplification doubled, scalar kept constant."""
    pad = FiniteOperator.identity(u.space, u.amplification, unitized=True)
    return direct_sum([u, pad])


def homotopy_invariance_certificate(F, u, params, delta, tau=DEFAULT_TAU,
                                    steps=None, max_steps=4096):
    """Certified path between the transports of a quasi-unitary along the two
    ends of a uniformly Lipschitz homotopy.

    Builds covers V_i along a partition with consecutive displacement below
    delta, the chained comparison unitaries w_i = u_i u_l*, their block sums,
    the two-by-two rotations sliding each w_i to w_{i+1}, and a cyclic block
    rotation; the assembled path joins (u_0 (+) I (+) ...) to
    (u_l (+) I (+) ...) inside (21 eps, 5 (c r + 4 delta)).  Returns the
    certificate and a parameter report including the achieved (eps', r').
    """
    if u.scalar is None:
        raise DomainError("the transported element must live in the unitization")
    if u.amplification != 1:
        raise DomainError("transport is implemented for amplification 1")
    if params.eps >= 1 / 84:
        # the conclusion lives at 21 eps, which must stay a valid level
        raise DomainError("homotopy transport needs eps < 1/84")
    ok, wit = is_quasi_unitary(u, params, tau)
    if not ok:
        raise DomainError(f"input fails its quasi-unitary test: {wit}")
    c = F.lipschitz_bound
    idx = partition_homotopy(F, delta)
    maps = [F.frames[i] for i in idx]
    covers = [delta_cover(f, delta) for f in maps]
    ell = len(maps) - 1
    m = ell + 1
    tgt = maps[0].target

    us = [ad(v, u) for v in covers]
    u_last = us[-1]
    w = [ui @ u_last.adjoint() for ui in us]

    def blk(op):
        return _dsum2(op)

    ident2 = blk(FiniteOperator.identity(tgt, 1, unitized=True))
    a = direct_sum([blk(wi) for wi in w])
    b = direct_sum([blk(wi) for wi in w[1:]] + [blk(w[-1])])
    c_op = direct_sum([blk(w[-1])] + [blk(wi) for wi in w[1:]])
    base = direct_sum([blk(u_last)] + [ident2] * ell)
    a0 = direct_sum([blk(us[0])] + [ident2] * ell)
    a1 = base

    du2 = _dsum2(u)
    dul2_star = _dsum2(u_last).adjoint()

    def pair_cover(i, s):
        rot_y = _rotation2(math.pi / 2 * s, tgt.total_dim)
        rot_x = _rotation2(math.pi / 2 * s, u.space.total_dim)
        stacked = np.block(
            [[covers[i].matrix, np.zeros((tgt.total_dim, u.space.total_dim))],
             [np.zeros((tgt.total_dim, u.space.total_dim)), covers[i + 1].matrix]])
        return rot_y @ stacked @ rot_x.conj().T

    def gamma_slide_blocks(s):
        """First homotopy stage (a to b), one 2-amplification block per
        summand: each w_i rotates to w_{i+1} through doubled covers."""
        parts = []
        for i in range(ell):
            entries, scal = ad_doubled(pair_cover(i, s), du2)
            parts.append(FiniteOperator(tgt, entries, 2,
                                        None if scal is None else [scal, scal]))
        parts.append(blk(u_last))
        return [p @ dul2_star for p in parts]

    def gamma_cycle(s):
        """Second stage (b to c): cyclic rotation of the block summands;
        the mixed result is no longer block-diagonal."""
        mix = np.kron(_cyclic_fraction(m, s), np.eye(2))
        rot = amplify_scalar_matrix(tgt, 2 * m, mix)
        return rot @ b @ rot.adjoint()

    ab_blocks = [blk(wi) @ blk_base for wi, blk_base in
                 zip(w, [blk(u_last)] + [ident2] * ell)]
    a_base = a @ base

    def seg2_sample(t):
        # runs gamma backwards from c to a so the junctions line up
        s = 1 - t
        if s <= 0.5:
            parts = gamma_slide_blocks(2 * s)
            return direct_sum([g.adjoint() @ abk
                               for g, abk in zip(parts, ab_blocks)])
        return gamma_cycle(2 * s - 1).adjoint() @ a_base

    ambient = QuasiParams(21 * params.eps, 5 * (c * params.r + 4 * delta))
    segs = []
    bee = (c_op.adjoint() @ a) @ base
    aa_base = (a.adjoint() @ a) @ base
    stages = [
        ("opening interpolation", lambda t: (1 - t) * a0 + t * bee),
        ("chain rotation", seg2_sample),
        ("closing interpolation", lambda t: (1 - t) * aa_base + t * a1),
    ]
    for stage, fn in stages:
        try:
            segs.append(_certify_path(fn, "odd", ambient, steps, tau,
                                      max_steps))
        except (CertificateError, DomainError) as exc:
            raise CertificateError(f"{stage} stage failed: {exc}") from exc
    cert = concatenate_certificates(segs)
    ok, report = verify_certificate(cert, tau)
    if not ok:
        raise CertificateError(f"assembled certificate failed: {report['failures'][:3]}")
    report["achieved_eps"] = report.pop("worst_defect")
    report["achieved_r"] = report.pop("worst_propagation")
    report["bound_eps"] = ambient.eps
    report["bound_r"] = ambient.r
    report["stated_bound_r"] = 5 * (c * params.r + 2 * delta)
    report["frames_used"] = m
    report["lipschitz_bound"] = c
    return cert, report


def concatenate_certificates(certs):
    """Join certificates end to start; junction gaps become explicit steps."""
    if not certs:
        raise CertificateError("nothing to concatenate")
    parity = certs[0].parity
    params = certs[0].params
    samples = list(certs[0].samples)
    bounds = list(certs[0].step_bounds)
    for nxt in certs[1:]:
        if nxt.parity != parity or nxt.params != params:
            raise CertificateError("certificates disagree on ambient data")
        bounds.append(opnorm(nxt.samples[0] - samples[-1]))
        samples.extend(nxt.samples)
        bounds.extend(nxt.step_bounds)
    return HomotopyCertificate(parity, samples, params, bounds)
