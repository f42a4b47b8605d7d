"""Finite operators over a sampled space, with support and propagation.

An operator acts on ``k`` copies of the module ``H = sum_i C^{d_i}`` (one
fiber per sample point).  Coordinates are stored copy-major: coordinate
``a * D + offset_i + f`` is fiber coordinate ``f`` of point ``i`` in copy
``a``.  Elements of the unitization carry a per-copy scalar vector that is
folded into the dense matrix only when a concrete matrix is needed, so the
scalar bookkeeping stays exact.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

DEFAULT_TAU = 1e-12


class FiniteOperator:
    """A complex matrix over a SampledSpace with block structure by point pairs."""

    def __init__(self, space, entries, amplification=1, scalar=None):
        self.space = space
        self.amplification = int(amplification)
        n = self.amplification * space.total_dim
        entries = np.asarray(entries, dtype=complex)
        if entries.shape != (n, n):
            raise ShapeError(
                f"entries shape {entries.shape} != ({n}, {n}) for amplification "
                f"{amplification} over a module of dimension {space.total_dim}")
        self.entries = entries
        self.entries.flags.writeable = False
        if scalar is not None:
            scalar = np.atleast_1d(np.asarray(scalar, dtype=complex))
            if scalar.shape == (1,):
                scalar = np.full(self.amplification, scalar[0])
            if scalar.shape != (self.amplification,):
                raise ShapeError("scalar vector length must equal amplification")
            scalar.flags.writeable = False
        self.scalar = scalar

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, space, amplification=1, unitized=False):
        n = amplification * space.total_dim
        scalar = np.zeros(amplification, dtype=complex) if unitized else None
        return cls(space, np.zeros((n, n), dtype=complex), amplification, scalar)

    @classmethod
    def identity(cls, space, amplification=1, unitized=True):
        n = amplification * space.total_dim
        if unitized:
            return cls(space, np.zeros((n, n), dtype=complex), amplification,
                       np.ones(amplification, dtype=complex))
        return cls(space, np.eye(n, dtype=complex), amplification)

    @classmethod
    def from_matrix(cls, space, matrix, amplification=1):
        return cls(space, matrix, amplification)

    # -- basic views -------------------------------------------------------

    @property
    def dim(self):
        return self.amplification * self.space.total_dim

    @property
    def unitized(self):
        return self.scalar is not None

    def concrete(self):
        """Dense matrix with any scalar part folded in."""
        if self.scalar is None:
            return self.entries
        return self.entries + np.diag(np.repeat(self.scalar, self.space.total_dim))

    def strip_scalar(self):
        """Same matrix regarded outside the unitization."""
        return FiniteOperator(self.space, self.concrete(), self.amplification)

    def with_scalar(self, scalar):
        return FiniteOperator(self.space, self.entries, self.amplification, scalar)

    def block(self, y, x):
        """The (k*d_y, k*d_x) submatrix of the concrete operator at a point pair."""
        rows = self._coords_of_point(y)
        cols = self._coords_of_point(x)
        return self.concrete()[np.ix_(rows, cols)]

    def _coords_of_point(self, i):
        D = self.space.total_dim
        off = self.space.offsets[i]
        d = self.space.internal_dims[i]
        return np.concatenate([a * D + off + np.arange(d)
                               for a in range(self.amplification)])

    # -- algebra -----------------------------------------------------------

    def _require_compatible(self, other):
        if self.space is not other.space and self.space.total_dim != other.space.total_dim:
            raise ShapeError("operators live over different spaces")
        if self.amplification != other.amplification:
            raise ShapeError("amplification mismatch")

    def __add__(self, other):
        self._require_compatible(other)
        scalar = None
        if self.scalar is not None or other.scalar is not None:
            a = self.scalar if self.scalar is not None else 0
            b = other.scalar if other.scalar is not None else 0
            scalar = np.atleast_1d(a + b) * np.ones(self.amplification)
        return FiniteOperator(self.space, self.entries + other.entries,
                              self.amplification, scalar)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        scalar = None if self.scalar is None else c * self.scalar
        return FiniteOperator(self.space, c * self.entries, self.amplification, scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __matmul__(self, other):
        self._require_compatible(other)
        if self.scalar is None and other.scalar is None:
            return FiniteOperator(self.space, self.entries @ other.entries,
                                  self.amplification)
        sa = self.scalar if self.scalar is not None else np.zeros(self.amplification)
        sb = other.scalar if other.scalar is not None else np.zeros(other.amplification)
        prod = self.concrete() @ other.concrete()
        scalar = sa * sb
        entries = prod - np.diag(np.repeat(scalar, self.space.total_dim))
        return FiniteOperator(self.space, entries, self.amplification, scalar)

    def adjoint(self):
        scalar = None if self.scalar is None else np.conj(self.scalar)
        return FiniteOperator(self.space, self.entries.conj().T,
                              self.amplification, scalar)

    H = property(adjoint)


def _nearly_hermitian(m, tol=1e-13):
    return np.linalg.norm(m - m.conj().T) <= tol * max(1.0, np.linalg.norm(m))


def opnorm(op):
    """Operator (spectral) norm; accepts a FiniteOperator or a matrix."""
    m = op.concrete() if isinstance(op, FiniteOperator) else np.asarray(op)
    if m.size == 0:
        return 0.0
    if _nearly_hermitian(m):
        return float(np.abs(np.linalg.eigvalsh(m)).max())
    gram = m.conj().T @ m
    top = np.linalg.eigvalsh(gram)[-1]
    return float(np.sqrt(max(top, 0.0)))


def herm_defect(op):
    """Distance to the self-adjoint operators, ||T - T*||."""
    m = op.concrete() if isinstance(op, FiniteOperator) else np.asarray(op)
    diff = m - m.conj().T
    # Frobenius upper bound suffices for all-but-borderline checks
    frob = float(np.linalg.norm(diff))
    if frob <= 1e-13:
        return frob
    return opnorm(diff)


def _point_major(space, k):
    pidx = np.tile(space.point_of_coord, k)
    order = np.argsort(pidx, kind="stable")
    starts = np.concatenate([[0], np.cumsum(space.internal_dims * k)])[:-1]
    return order, starts


def block_abs_max(op):
    """(N, N) matrix of per-(point, point) max entry modulus of the concrete op."""
    a = np.abs(op.concrete())
    order, starts = _point_major(op.space, op.amplification)
    p = a[np.ix_(order, order)]
    rows = np.maximum.reduceat(p, starts, axis=0)
    return np.maximum.reduceat(rows, starts, axis=1)


def support(op, tau=DEFAULT_TAU):
    """Boolean (N, N) support matrix: entry (y, x) iff block (y, x) has an
    entry of modulus above ``tau``."""
    if tau < 0:
        raise DomainError("support threshold must be nonnegative")
    return block_abs_max(op) > tau


def support_pairs(op, tau=DEFAULT_TAU):
    m = support(op, tau)
    return {(int(y), int(x)) for y, x in np.argwhere(m)}


def propagation(op, tau=DEFAULT_TAU):
    """Largest distance over the support; 0 for empty support, inf across
    components."""
    mask = support(op, tau)
    if not mask.any():
        return 0.0
    return float(op.space.dist[mask].max())


def product_tau(s, t, tau=DEFAULT_TAU):
    """Entry threshold for a product, scaled by the factors' norms."""
    return tau * max(1.0, opnorm(s) * opnorm(t))


def expand_point_mask(space, amplification, point_mask_matrix):
    """Lift an (N, N) boolean point-pair mask to coordinate level."""
    row = np.tile(np.repeat(point_mask_matrix, space.internal_dims, axis=0),
                  (amplification, 1))
    full = np.tile(np.repeat(row, space.internal_dims, axis=1),
                   (1, amplification))
    return full.astype(bool)


def coordinate_mask(space, amplification, point_mask):
    """Boolean vector over coordinates selecting the masked points."""
    return np.tile(np.repeat(np.asarray(point_mask, dtype=bool),
                             space.internal_dims), amplification)


def restrict(op, rows, cols):
    """Zero every block outside rows x cols (compression by indicator
    functions); the full-mask restriction is the operator itself."""
    rows = np.asarray(rows, dtype=bool)
    cols = np.asarray(cols, dtype=bool)
    if rows.all() and cols.all():
        return op
    rmask = coordinate_mask(op.space, op.amplification, rows)
    cmask = coordinate_mask(op.space, op.amplification, cols)
    cut = op.concrete() * np.outer(rmask, cmask)
    return FiniteOperator(op.space, cut, op.amplification)


def compress(op, keep_points, keep_dims=None):
    """Q T Q for the projection onto kept points and leading fiber
    coordinates; the result lives on the corresponding sub-space."""
    keep_points = np.asarray(keep_points, dtype=bool)
    dims = op.space.internal_dims if keep_dims is None \
        else np.asarray(keep_dims, dtype=int)
    if (dims > op.space.internal_dims).any():
        raise DomainError("keep_dims exceeds a fiber dimension")
    if (dims[keep_points] < 1).any():
        raise DomainError("kept points need at least one fiber coordinate")
    if keep_points.all() and (dims == op.space.internal_dims).all():
        return op
    sub, idx = op.space.subspace(keep_points, internal_dims=dims[keep_points])
    D = op.space.total_dim
    coords = np.concatenate([
        a * D + op.space.offsets[i] + np.arange(dims[i])
        for a in range(op.amplification) for i in idx]) \
        if len(idx) else np.empty(0, dtype=int)
    cut = op.entries[np.ix_(coords, coords)]
    return FiniteOperator(sub, cut, op.amplification, op.scalar)


def fiber_projection(space, amplification, keep_points, keep_dims=None):
    """Concrete 0/1 diagonal of the compression projection Q on the big space."""
    keep_points = np.asarray(keep_points, dtype=bool)
    dims = space.internal_dims if keep_dims is None \
        else np.asarray(keep_dims, dtype=int)
    diag = np.zeros(space.total_dim)
    for i in np.flatnonzero(keep_points):
        off = space.offsets[i]
        diag[off:off + dims[i]] = 1.0
    return np.diag(np.tile(diag, amplification)).astype(complex)


def direct_sum(ops):
    """Block-diagonal direct sum over a common space; amplifications add."""
    if not ops:
        raise ShapeError("empty direct sum")
    space = ops[0].space
    for o in ops:
        if o.space.total_dim != space.total_dim:
            raise ShapeError("direct sum over mismatched spaces")
    k = sum(o.amplification for o in ops)
    n = space.total_dim * k
    out = np.zeros((n, n), dtype=complex)
    pos = 0
    scalars = []
    unitized = any(o.scalar is not None for o in ops)
    for o in ops:
        d = o.dim
        out[pos:pos + d, pos:pos + d] = o.entries
        scalars.append(o.scalar if o.scalar is not None
                       else np.zeros(o.amplification, dtype=complex))
        pos += d
    scalar = np.concatenate(scalars) if unitized else None
    return FiniteOperator(space, out, k, scalar)


def amplify_scalar_matrix(space, amplification, matrix):
    """Lift a (k, k) scalar matrix to an operator mixing the module copies."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (amplification, amplification):
        raise ShapeError("scalar matrix shape must match the amplification")
    lifted = np.kron(matrix, np.eye(space.total_dim))
    return FiniteOperator(space, lifted, amplification)
