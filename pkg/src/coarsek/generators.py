"""Deterministic randomized construction of banded operators and
quasi-elements with known structure, for verification harnesses and tests.

All generators take a numpy Generator; harnesses derive per-trial
generators from a master seed via SeedSequence.spawn so trial k is
reproducible independently of the others.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .errors import DomainError
from .operator import FiniteOperator, expand_point_mask, opnorm


def rng_from(seed):
    return np.random.default_rng(seed)


def trial_rngs(seed, trials):
    """Independent per-trial generators derived from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def band_mask(space, amplification, r):
    """Coordinate mask of the strict metric band d < r (diagonal included)."""
    pts = space.dist < r
    np.fill_diagonal(pts, True)
    return expand_point_mask(space, amplification, pts)


def random_banded(space, r, rng, amplification=1, selfadjoint=False, norm=None):
    """Dense complex Gaussian matrix supported on the open band d < r."""
    n = amplification * space.total_dim
    m = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    m *= band_mask(space, amplification, r)
    if selfadjoint:
        m = (m + m.conj().T) / 2
    if norm is not None and m.any():
        m *= norm / opnorm(m)
    return FiniteOperator(space, m, amplification)


def random_region_supported(space, region, rng, amplification=1, norm=1.0,
                            band_r=None):
    """Random operator with support inside region x region (optionally banded)."""
    region = np.asarray(region, dtype=bool)
    op = random_banded(space, band_r if band_r is not None else np.inf,
                       rng, amplification)
    keep = np.outer(region, region)
    m = op.entries * expand_point_mask(space, amplification, keep)
    if m.any() and norm is not None:
        m = m * (norm / opnorm(m))
    return FiniteOperator(space, m, amplification)


def haar_unitary(n, rng):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def banded_near_unitary(space, r, rng, amplification=1, strength=0.25):
    """exp of a small banded skew-Hermitian; nearly banded, exactly unitary."""
    a = random_banded(space, r, rng, amplification, norm=strength).entries
    skew = (a - a.conj().T) / 2
    return expm(skew)


def random_quasi_projection(space, params, rng, amplification=1, rank=None,
                            max_tries=8):
    """Quasi-projection with a known spectral-projection rank.

    Conjugates a 0/1 diagonal (plus uniform diagonal noise below eps/2) by a
    banded near-unitary, masks the result back onto the band d < r, and
    re-symmetrizes; retries with weaker noise until the measured defect sits
    inside eps.  Returns (operator, rank).
    """
    n = amplification * space.total_dim
    if rank is None:
        rank = int(rng.integers(0, n + 1))
    if not 0 <= rank <= n:
        raise DomainError("rank outside [0, dim]")
    diag01 = np.zeros(n)
    diag01[rng.permutation(n)[:rank]] = 1.0
    mask = band_mask(space, amplification, params.r)
    noise_level = params.eps / 2
    # keep the rotation weak enough that masking its tails costs less than eps
    strength = min(0.25, 3 * params.eps)
    for _ in range(max_tries):
        noise = rng.uniform(-noise_level, noise_level, size=n)
        d = diag01 + noise
        v = banded_near_unitary(space, params.r / 3, rng, amplification,
                                strength=strength)
        m = (v * d) @ v.conj().T
        m = m * mask
        m = (m + m.conj().T) / 2
        p = FiniteOperator(space, m, amplification)
        lam = np.linalg.eigvalsh(m)
        defect = float(np.abs(lam * lam - lam).max())
        if defect < 0.9 * params.eps and int((lam > 0.5).sum()) == rank:
            return p, rank
        noise_level /= 2
    raise DomainError("could not reach the requested quasi-projection level; "
                      "band too tight for this space")


def random_quasi_unitary(space, params, rng, amplification=1, max_tries=8):
    """Quasi-unitary: random phases times a masked banded near-unitary."""
    n = amplification * space.total_dim
    strength = 0.25
    for _ in range(max_tries):
        v = banded_near_unitary(space, params.r / 3, rng, amplification,
                                strength=strength)
        v = v * band_mask(space, amplification, params.r)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=n))
        m = phases[:, None] * v
        u = FiniteOperator(space, m, amplification)
        eye = np.eye(n)
        defect = max(opnorm(m.conj().T @ m - eye), opnorm(m @ m.conj().T - eye))
        if defect < 0.9 * params.eps:
            return u
        strength /= 2
    raise DomainError("could not reach the requested quasi-unitary level")


def random_blockdiag_quasi_projection(space, rng, ranks, noise=0.02,
                                      amplification=1):
    """Independent per-point blocks with exact chi-ranks plus small noise.

    Propagation is 0, so the result is a quasi-projection at any r; the
    noise bound keeps each block's spectrum within `noise` of {0, 1}.
    """
    ranks = np.asarray(ranks, dtype=int)
    if len(ranks) != len(space):
        raise DomainError("one rank per point required")
    n = amplification * space.total_dim
    m = np.zeros((n, n), dtype=complex)
    D = space.total_dim
    for j in range(len(space)):
        d = int(space.internal_dims[j]) * amplification
        if not 0 <= ranks[j] <= d:
            raise DomainError(f"rank {ranks[j]} outside [0, {d}] at point {j}")
        q = haar_unitary(d, rng)
        diag = np.zeros(d)
        diag[:ranks[j]] = 1.0
        h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = (h + h.conj().T) / 2
        h *= noise / max(opnorm(h), 1e-15)
        block = (q * diag) @ q.conj().T + h
        off = space.offsets[j]
        coords = np.concatenate([a * D + off + np.arange(space.internal_dims[j])
                                 for a in range(amplification)])
        m[np.ix_(coords, coords)] = block
    return FiniteOperator(space, m, amplification)


def phase_unitary(space, angles, amplification=1, unitized=True):
    """Diagonal multiplication unitary e^{i theta(x)}, propagation 0."""
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (len(space),):
        raise DomainError("one angle per sample point required")
    diag = np.repeat(np.exp(1j * angles), space.internal_dims)
    full = np.tile(diag, amplification)
    if unitized:
        entries = np.diag(full - 1.0)
        return FiniteOperator(space, entries, amplification,
                              np.ones(amplification, dtype=complex))
    return FiniteOperator(space, np.diag(full), amplification)


def shift_unitary(space, order, power=1, amplification=1):
    """Cyclic shift along an ordered circle of samples (equal fibers)."""
    order = np.asarray(order, dtype=int)
    dims = space.internal_dims[order]
    if not (dims == dims[0]).all():
        raise DomainError("cyclic shift needs equal fiber dimensions")
    n = space.total_dim
    m = np.zeros((n, n), dtype=complex)
    k = len(order)
    for pos in range(k):
        src = order[pos]
        dst = order[(pos + power) % k]
        so, do = space.offsets[src], space.offsets[dst]
        m[do:do + dims[0], so:so + dims[0]] = np.eye(dims[0])
    if amplification > 1:
        m = np.kron(np.eye(amplification), m)
    return FiniteOperator(space, m, amplification)
