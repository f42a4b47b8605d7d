"""Finite simplicial complexes with the round per-simplex metric, and their
discretizations into finite metric sample sets.

Each k-simplex is identified with the closed positive orthant of the unit
k-sphere: a point with barycentric coordinates ``b`` maps to ``b / |b|_2``,
and the distance between two points sharing a simplex is the arc
``arccos <v, w>`` of the normalized coordinate vectors.  An edge therefore
has length pi/2 and the center of an edge sits at pi/4 from either vertex.
Global distances are shortest paths in the graph whose edges join any two
samples lying on a common simplex, weighted by the exact arc distance;
samples in different connected components are at distance ``inf``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (
    DomainError,
    MalformedInputError,
    UnknownSimplexError,
    UnsupportedDecompositionError,
)

EDGE_LENGTH = math.pi / 2.0

# Decomposition thresholds: closed conditions on the distance to the simplex
# center, deliberately overlapping on [0.45, 0.55].
INNER_THRESHOLD = (1 + 1 / 10) / 2  # 0.55
OUTER_THRESHOLD = (1 - 1 / 10) / 2  # 0.45


class SimplicialComplex:
    """A finite abstract simplicial complex, closed under faces."""

    def __init__(self, simplices):
        simps = {tuple(sorted(s)) for s in simplices}
        for s in simps:
            if len(set(s)) != len(s):
                raise MalformedInputError(f"duplicate vertex in simplex {s}")
        if not simps:
            raise MalformedInputError("empty complex")
        self.simplices = sorted(simps, key=lambda s: (len(s), s))
        self.vertices = sorted({v for s in self.simplices for v in s})
        self.dimension = max(len(s) for s in self.simplices) - 1
        self._simplex_set = set(self.simplices)

    def __contains__(self, simplex):
        return tuple(sorted(simplex)) in self._simplex_set

    def faces_closed(self):
        """True iff every subset of a listed simplex is listed."""
        for s in self.simplices:
            for k in range(1, len(s)):
                for f in itertools.combinations(s, k):
                    if f not in self._simplex_set:
                        return False
        return True

    def maximal_simplices(self):
        out = []
        for s in self.simplices:
            sset = set(s)
            if not any(sset < set(t) for t in self.simplices if len(t) > len(s)):
                out.append(s)
        return out

    def top_simplices(self):
        """Simplices of maximal dimension."""
        return [s for s in self.simplices if len(s) - 1 == self.dimension]

    def __repr__(self):
        return (f"SimplicialComplex({len(self.vertices)} vertices, "
                f"{len(self.simplices)} simplices, dim {self.dimension})")


def build_complex(maximal_simplices):
    """Generate the face closure of the given maximal simplices.

    Vertex ids must be distinct within each simplex; the returned complex
    lists every face of every input simplex.
    """
    closure = set()
    for s in maximal_simplices:
        s = tuple(sorted(s))
        if len(set(s)) != len(s):
            raise MalformedInputError(f"duplicate vertex in simplex {s}")
        for k in range(1, len(s) + 1):
            closure.update(itertools.combinations(s, k))
    return SimplicialComplex(closure)


def cycle_complex(k):
    """Boundary of a k-gon: k vertices joined in a cycle (k >= 3)."""
    if k < 3:
        raise MalformedInputError("a cycle needs at least 3 vertices")
    return build_complex([(i, (i + 1) % k) for i in range(k)])


@dataclass(frozen=True)
class SamplePoint:
    """A point of the geometric realization, tagged by the face that carries
    it (the minimal simplex containing it) and its barycentric coordinates
    on that face."""

    carrier: tuple
    coords: tuple

    @property
    def dim(self):
        return len(self.carrier) - 1

    def embed(self, simplex):
        """Barycentric coordinate vector of this point on a containing simplex."""
        v = np.zeros(len(simplex))
        pos = {vid: i for i, vid in enumerate(simplex)}
        for vid, c in zip(self.carrier, self.coords):
            v[pos[vid]] = c
        return v


def sphere_arc(b1, b2):
    """Arc distance between two barycentric vectors on a common simplex."""
    v1 = np.asarray(b1, dtype=float)
    v2 = np.asarray(b2, dtype=float)
    ip = float(v1 @ v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    return math.acos(min(1.0, max(-1.0, ip)))


class SampledSpace:
    """A finite metric-measure stand-in for the realization of a complex.

    points        list of SamplePoint
    dist          (N, N) symmetric matrix, inf between components
    internal_dims per-point fiber dimension of the module
    mesh          discretization parameter used (None for raw spaces)
    """

    def __init__(self, points, dist, internal_dims, mesh=None):
        self.points = list(points)
        dist = np.asarray(dist, dtype=float)
        n = len(self.points)
        if dist.shape != (n, n):
            raise MalformedInputError("distance matrix shape mismatch")
        if not np.allclose(dist, dist.T, atol=1e-12, equal_nan=True):
            raise MalformedInputError("distance matrix not symmetric")
        dims = np.asarray(internal_dims, dtype=int)
        if dims.shape != (n,) or (dims < 1).any():
            raise MalformedInputError("internal_dims must be positive per point")
        self.dist = dist
        self.dist.flags.writeable = False
        self.internal_dims = dims
        self.internal_dims.flags.writeable = False
        self.mesh = mesh
        self.offsets = np.concatenate([[0], np.cumsum(dims)])
        self.total_dim = int(self.offsets[-1])
        # point id of each module coordinate
        self.point_of_coord = np.repeat(np.arange(n), dims)

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_distance_matrix(cls, dist, internal_dims=None, mesh=None):
        """Raw metric space: points get synthetic one-vertex carriers."""
        dist = np.asarray(dist, dtype=float)
        n = dist.shape[0]
        if internal_dims is None:
            internal_dims = np.ones(n, dtype=int)
        points = [SamplePoint((i,), (1.0,)) for i in range(n)]
        return cls(points, dist, internal_dims, mesh=mesh)

    def validate(self, tol=1e-9):
        """Check metric axioms; triangle inequality on every finite triple."""
        d = self.dist
        if np.abs(np.diag(d)).max(initial=0.0) > tol:
            raise MalformedInputError("nonzero diagonal")
        n = len(self)
        for k in range(n):
            via = d[:, k, None] + d[None, k, :]
            bad = d > via + tol
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise MalformedInputError(
                    f"triangle inequality fails: d({i},{j})={d[i, j]} "
                    f"> d({i},{k})+d({k},{j})={via[i, j]}")
        return True

    def subspace(self, mask, internal_dims=None):
        """Restriction to the masked points (optionally shrinking fibers)."""
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        dims = self.internal_dims[idx] if internal_dims is None \
            else np.asarray(internal_dims, dtype=int)
        pts = [self.points[i] for i in idx]
        return SampledSpace(pts, self.dist[np.ix_(idx, idx)], dims, mesh=self.mesh), idx

    def __repr__(self):
        return (f"SampledSpace({len(self)} points, total fiber dim "
                f"{self.total_dim}, mesh {self.mesh})")


def _lattice_subdivisions(mesh, dim):
    # Arc distance is sqrt(k+1)-Lipschitz in the l2 barycentric metric and the
    # step-1/m lattice covers a k-simplex to l2 radius sqrt(2)/m, so this step
    # count keeps every point within `mesh` of a sample.
    return max(1, math.ceil(math.sqrt(2.0 * (dim + 1)) / mesh))


def _support_face(simplex, coords):
    face = tuple(v for v, c in zip(simplex, coords) if c != 0)
    vals = tuple(c for c in coords if c != 0)
    return face, vals


def discretize(complex_, mesh, fiber_dim=1):
    """Sample the realization of ``complex_`` at resolution ``mesh``.

    Samples are the barycentric lattices of step 1/m on every simplex
    (deduplicated across shared faces) together with every simplex center;
    all vertices are lattice corners.  Distances are shortest paths over
    exact per-simplex arcs.  All fibers get dimension ``fiber_dim``.
    """
    if mesh <= 0:
        raise DomainError("mesh must be positive")
    if fiber_dim < 1:
        raise DomainError("fiber_dim must be >= 1")
    m = _lattice_subdivisions(mesh, complex_.dimension)

    seen = {}
    points = []

    def add_point(face, vals):
        key = (face, vals)
        if key not in seen:
            seen[key] = len(points)
            points.append(SamplePoint(face, tuple(float(v) for v in vals)))
        return seen[key]

    for simplex in complex_.simplices:
        k = len(simplex)
        for comp in _compositions(m, k):
            face, vals = _support_face(simplex, [Fraction(c, m) for c in comp])
            add_point(face, vals)
        add_point(simplex, tuple(Fraction(1, k) for _ in simplex))

    n = len(points)
    w = np.full((n, n), np.inf)
    np.fill_diagonal(w, 0.0)
    by_simplex = {}
    for i, p in enumerate(points):
        for s in complex_.maximal_simplices():
            if set(p.carrier) <= set(s):
                by_simplex.setdefault(s, []).append(i)
    for s, idxs in by_simplex.items():
        vecs = np.array([points[i].embed(s) for i in idxs])
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        gram = np.clip(vecs @ vecs.T, -1.0, 1.0)
        arcs = np.arccos(gram)
        sub = np.ix_(idxs, idxs)
        w[sub] = np.minimum(w[sub], arcs)

    dist = _graph_metric(w)
    dims = np.full(n, fiber_dim, dtype=int)
    return SampledSpace(points, dist, dims, mesh=mesh)


def _compositions(total, parts):
    """All tuples of `parts` nonnegative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def _graph_metric(weights):
    n = weights.shape[0]
    ii, jj = np.nonzero(np.isfinite(weights) & (weights > 0))
    graph = coo_matrix((weights[ii, jj], (ii, jj)), shape=(n, n))
    d = shortest_path(graph.tocsr(), method="D", directed=False)
    np.fill_diagonal(d, 0.0)
    return np.minimum(d, d.T)


def neighborhood(space, mask, r):
    """Closed r-neighborhood { x : d(x, A) <= r } of the masked set."""
    if r < 0:
        raise DomainError("radius must be nonnegative")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    dmin = space.dist[:, mask].min(axis=1)
    return dmin <= r


def simplex_center(complex_, simplex):
    """The equal-coordinates point of a simplex of the complex."""
    key = tuple(sorted(simplex))
    if key not in complex_:
        raise UnknownSimplexError(f"{simplex} not in complex")
    k = len(key)
    return SamplePoint(key, tuple(1.0 / k for _ in key))


def center_sample_index(space, complex_, simplex):
    """Index of the sample sitting at a simplex center (discretize adds one)."""
    c = simplex_center(complex_, simplex)
    for i, p in enumerate(space.points):
        if p.carrier == c.carrier and np.allclose(p.coords, c.coords, atol=1e-12):
            return i
    raise UnknownSimplexError(f"no sample at center of {simplex}")


def center_distances(space, complex_, simplex):
    """Distance from every sample lying on ``simplex`` to its center.

    Exact per-simplex arcs; samples not on the closed simplex get inf.
    """
    s = tuple(sorted(simplex))
    center = np.full(len(s), 1.0 / len(s))
    center /= np.linalg.norm(center)
    out = np.full(len(space), np.inf)
    sset = set(s)
    for i, p in enumerate(space.points):
        if set(p.carrier) <= sset:
            v = p.embed(s)
            v /= np.linalg.norm(v)
            out[i] = math.acos(min(1.0, max(-1.0, float(v @ center))))
    return out


def decompose(space, complex_):
    """Split samples into the two closed pieces used for two-set coverings.

    X1 collects, over every top-dimensional simplex, the samples within
    0.55 of its center; X2 collects samples at center distance >= 0.45
    together with everything carried by lower-dimensional faces.  The two
    masks cover the space and overlap exactly in the [0.45, 0.55] band.
    """
    n = complex_.dimension
    if n < 1:
        raise UnsupportedDecompositionError(
            "dimension-0 complexes have no two-piece decomposition")
    x1 = np.zeros(len(space), dtype=bool)
    x2 = np.array([p.dim < n for p in space.points])
    for simplex in complex_.top_simplices():
        d = center_distances(space, complex_, simplex)
        x1 |= d <= INNER_THRESHOLD
        x2 |= np.isfinite(d) & (d >= OUTER_THRESHOLD)
    return x1, x2


def retract_onto_pieces(space, complex_, mask, kind):
    """Target sample per masked sample for the two piece retractions.

    ``cluster-to-centers`` sends a sample to the center sample of its
    nearest top simplex.  ``collapse-to-skeleton`` projects radially away
    from that center onto the boundary and snaps to the nearest sample
    carried by a proper face; samples already on the skeleton stay put.
    Entries outside the mask are -1.
    """
    if kind not in ("cluster-to-centers", "collapse-to-skeleton"):
        raise DomainError(f"unknown retraction kind {kind!r}")
    mask = np.asarray(mask, dtype=bool)
    n = complex_.dimension
    tops = complex_.top_simplices()
    cdists = {s: center_distances(space, complex_, s) for s in tops}
    centers = {s: center_sample_index(space, complex_, s) for s in tops}
    skeleton = np.array([p.dim < n for p in space.points])

    out = np.full(len(space), -1, dtype=int)
    for i in np.flatnonzero(mask):
        by_center = sorted(tops, key=lambda s: (cdists[s][i], s))
        home = by_center[0]
        if not math.isfinite(cdists[home][i]):
            raise DomainError(f"sample {i} lies on no top simplex")
        if kind == "cluster-to-centers":
            out[i] = centers[home]
            continue
        p = space.points[i]
        if p.dim < n:
            out[i] = i
            continue
        out[i] = _radial_boundary_snap(space, i, home, skeleton)
    return out


def _radial_boundary_snap(space, i, simplex, skeleton):
    p = space.points[i]
    b = p.embed(simplex)
    k = len(simplex)
    c = np.full(k, 1.0 / k)
    if np.allclose(b, c, atol=1e-12):
        raise DomainError("center sample has no radial direction")
    ray = b - c
    with np.errstate(divide="ignore"):
        ts = np.where(ray < 0, c / -ray, np.inf)
    t_star = ts.min()
    boundary = c + t_star * ray
    boundary = np.clip(boundary, 0.0, None)
    boundary /= boundary.sum()
    # nearest skeleton sample on this simplex to the exit point
    best, best_d = -1, np.inf
    sset = set(simplex)
    for j in np.flatnonzero(skeleton):
        q = space.points[j]
        if set(q.carrier) <= sset:
            d = sphere_arc(boundary, q.embed(simplex))
            if d < best_d - 1e-15 or (abs(d - best_d) <= 1e-15 and j < best):
                best, best_d = j, d
    if best < 0:
        raise DomainError("no skeleton sample available on the carrier simplex")
    return best


def cyclic_order(space, complex_):
    """Sample indices of a discretized cycle ordered once around the circle.

    Requires a 1-dimensional complex whose edges form a single cycle.
    """
    if complex_.dimension != 1:
        raise DomainError("cyclic order needs a 1-dimensional complex")
    edges = [s for s in complex_.simplices if len(s) == 2]
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    if any(len(v) != 2 for v in adj.values()):
        raise DomainError("complex is not a single cycle")
    start = min(adj)
    loop = [start, min(adj[start])]
    while True:
        nxt = [v for v in adj[loop[-1]] if v != loop[-2]][0]
        if nxt == start:
            break
        loop.append(nxt)
    if len(loop) != len(adj):
        raise DomainError("complex is not a single cycle")

    vert_idx = {}
    edge_idx = {}
    for i, p in enumerate(space.points):
        if p.dim == 0:
            vert_idx[p.carrier[0]] = i
        else:
            edge_idx.setdefault(p.carrier, []).append(i)
    order = []
    for a, b in zip(loop, loop[1:] + [loop[0]]):
        order.append(vert_idx[a])
        edge = tuple(sorted((a, b)))
        interior = edge_idx.get(edge, [])
        pos_along = []
        for i in interior:
            p = space.points[i]
            t = p.coords[p.carrier.index(b)]
            pos_along.append((t, i))
        order.extend(i for _, i in sorted(pos_along))
    return np.array(order, dtype=int)


def circle_space(k, mesh=2.0, fiber_dim=1):
    """Convenience builder: k-gon circle, its discretization, cyclic order."""
    cx = cycle_complex(k)
    space = discretize(cx, mesh, fiber_dim=fiber_dim)
    return cx, space, cyclic_order(space, cx)


def uniform_edge_space(n, fiber_dim=1):
    """The edge {0, 1} sampled at n points equally spaced in arc length.

    Unlike the barycentric lattice, consecutive distances are all equal
    (pi/2 divided by n-1), which keeps snapped slides exactly 2-Lipschitz;
    points are listed in order from vertex 0 to vertex 1.
    """
    if n < 2:
        raise DomainError("need at least the two vertices")
    thetas = np.linspace(0.0, EDGE_LENGTH, n)
    points = [SamplePoint((0,), (1.0,))]
    for th in thetas[1:-1]:
        # invert the radial identification: the point at angle th has
        # normalized vector (cos th, sin th)
        a = math.cos(th) / (math.cos(th) + math.sin(th))
        points.append(SamplePoint((0, 1), (a, 1 - a)))
    points.append(SamplePoint((1,), (1.0,)))
    dist = np.abs(np.subtract.outer(thetas, thetas))
    dims = np.full(n, fiber_dim, dtype=int)
    return SampledSpace(points, dist, dims, mesh=float(thetas[1]))
