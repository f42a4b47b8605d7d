"""Quasi-projections and quasi-unitaries, their comparison maps to exact
projections/unitaries, class representatives, homotopy certificates, and
the (lambda, h) parameter bookkeeping.

A self-adjoint p with ||p^2 - p|| < eps and propagation < r is an
(eps, r)-quasi-projection; u with ||u*u - 1|| < eps, ||uu* - 1|| < eps and
propagation < r is an (eps, r)-quasi-unitary.  Homotopies are represented
only by verifiable certificates: sampled paths whose per-step norm gaps,
combined with the linear perturbation bound

    ||p'^2 - p'|| <= eps + 5 ||p - p'||,

keep every linear interpolant inside the ambient quasi-regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CertificateError,
    DomainError,
    PropagationError,
    SpectralGapError,
    VerificationFailure,
)
from .operator import (
    DEFAULT_TAU,
    FiniteOperator,
    direct_sum,
    herm_defect,
    opnorm,
    propagation,
)

HERM_TOL = 1e-12


@dataclass(frozen=True)
class QuasiParams:
    """An (eps, r) control level with eps in (0, 1/4) and r > 0."""

    eps: float
    r: float

    def __post_init__(self):
        if not 0 < self.eps < 0.25:
            raise DomainError(f"eps={self.eps} outside (0, 1/4)")
        if self.r <= 0:
            raise DomainError("r must be positive")

    def scaled(self, eps_factor=1.0, r_factor=1.0):
        return QuasiParams(self.eps * eps_factor, self.r * r_factor)


def projection_defect(op):
    """||p^2 - p|| of the concrete matrix."""
    m = op.concrete() if isinstance(op, FiniteOperator) else np.asarray(op)
    if np.linalg.norm(m - m.conj().T) <= 1e-13 * max(1.0, np.linalg.norm(m)):
        lam = np.linalg.eigvalsh(m)
        return float(np.abs(lam * lam - lam).max(initial=0.0))
    return opnorm(m @ m - m)


def unitary_defects(op):
    """(||u*u - 1||, ||uu* - 1||) of the concrete matrix."""
    m = op.concrete() if isinstance(op, FiniteOperator) else np.asarray(op)
    eye = np.eye(m.shape[0])
    return opnorm(m.conj().T @ m - eye), opnorm(m @ m.conj().T - eye)


def is_quasi_projection(p, params, tau=DEFAULT_TAU):
    """Quasi-projection test; returns (verdict, witness norms)."""
    herm = herm_defect(p)
    defect = projection_defect(p)
    prop = propagation(p, tau)
    ok = herm <= HERM_TOL and defect < params.eps and prop < params.r
    return ok, {"herm_defect": herm, "projection_defect": defect,
                "propagation": prop, "eps": params.eps, "r": params.r}


def is_quasi_unitary(u, params, tau=DEFAULT_TAU):
    """Quasi-unitary test; returns (verdict, witness norms)."""
    left, right = unitary_defects(u)
    prop = propagation(u, tau)
    ok = left < params.eps and right < params.eps and prop < params.r
    return ok, {"left_defect": left, "right_defect": right,
                "propagation": prop, "eps": params.eps, "r": params.r}


def quasi_defect(op, parity):
    if parity == "even":
        return projection_defect(op)
    return max(unitary_defects(op))


def perturb_bound(p, p_prime, params, tau=DEFAULT_TAU, t_samples=9):
    """Degraded parameters (eps + 5 delta, r) after replacing p by p_prime.

    Requires p to be an (eps, r)-quasi-projection, p_prime self-adjoint with
    propagation below r, and delta = ||p - p_prime|| < 1/4.  Asserts the
    bound on p_prime and on sampled linear interpolants before returning.
    """
    ok, wit = is_quasi_projection(p, params, tau)
    if not ok:
        raise DomainError(f"base operator fails its quasi-test: {wit}")
    if herm_defect(p_prime) > HERM_TOL:
        raise DomainError("perturbed operator is not self-adjoint")
    if propagation(p_prime, tau) >= params.r:
        raise PropagationError("perturbed operator exceeds the propagation bound")
    delta = opnorm(p - p_prime)
    if delta >= 0.25:
        raise DomainError(f"||p - p'|| = {delta} >= 1/4")
    bound = params.eps + 5 * delta
    for t in np.linspace(0.0, 1.0, t_samples):
        pt = t * p + (1 - t) * p_prime
        if projection_defect(pt) > bound + 1e-9:
            raise VerificationFailure(
                f"interpolant at t={t} violates the perturbation bound")
    if bound >= 0.25:
        raise DomainError("degraded eps leaves the quasi-projection regime")
    return QuasiParams(bound, params.r)


def spectral_band_radius(eps):
    """Half-width a of the admissible eigenvalue clusters [-a, a] and
    [1 - a, 1 + a]."""
    return (math.sqrt(1 + 4 * eps) - 1) / 2


def forbidden_band(eps):
    """Open interval around 1/2 that a quasi-projection spectrum avoids."""
    if not 0 < eps < 0.25:
        raise DomainError("eps outside (0, 1/4)")
    half = math.sqrt(1 - 4 * eps) / 2
    return 0.5 - half, 0.5 + half


def kappa_even(p, eps=None, band_tol=1e-9):
    """Spectral projection chi_[1/2, inf)(p) of a quasi-projection.

    Verifies self-adjointness, ||p^2 - p|| < 1/4, and that no eigenvalue
    falls inside the forbidden band (beyond ``band_tol``) before projecting.
    """
    if herm_defect(p) > HERM_TOL:
        raise DomainError("kappa_even needs a self-adjoint operator")
    m = p.concrete()
    m = (m + m.conj().T) / 2
    lam, q = np.linalg.eigh(m)
    defect = float(np.abs(lam * lam - lam).max(initial=0.0))
    if defect >= 0.25:
        raise DomainError(f"||p^2 - p|| = {defect} >= 1/4")
    lo, hi = forbidden_band(eps if eps is not None else max(defect, 1e-15))
    inside = (lam > lo + band_tol) & (lam < hi - band_tol)
    if inside.any():
        raise SpectralGapError(
            f"eigenvalue {lam[inside][0]} inside the forbidden band ({lo}, {hi})")
    proj = (q * (lam > 0.5)) @ q.conj().T
    proj = (proj + proj.conj().T) / 2
    if p.scalar is not None:
        scalar = (np.real(p.scalar) >= 0.5).astype(complex)
        entries = proj - np.diag(np.repeat(scalar, p.space.total_dim))
        return FiniteOperator(p.space, entries, p.amplification, scalar)
    return FiniteOperator(p.space, proj, p.amplification)


def kappa_odd(u):
    """Exact unitary u (u*u)^{-1/2} from a quasi-unitary."""
    left, right = unitary_defects(u)
    if left >= 0.25 or right >= 0.25:
        raise DomainError(f"unitary defects ({left}, {right}) not below 1/4")
    m = u.concrete()
    gram = m.conj().T @ m
    lam, q = np.linalg.eigh((gram + gram.conj().T) / 2)
    if lam[0] <= 1e-12:
        raise SpectralGapError("u*u is numerically singular")
    inv_sqrt = (q / np.sqrt(lam)) @ q.conj().T
    out = m @ inv_sqrt
    if max(unitary_defects(out)) > 1e-12:
        raise VerificationFailure("polar factor is not unitary to 1e-12")
    if u.scalar is not None:
        scalar = u.scalar / np.abs(u.scalar)
        entries = out - np.diag(np.repeat(scalar, u.space.total_dim))
        return FiniteOperator(u.space, entries, u.amplification, scalar)
    return FiniteOperator(u.space, out, u.amplification)


def chi_rank(p):
    """Rank of the spectral projection above 1/2."""
    m = p.concrete() if isinstance(p, FiniteOperator) else np.asarray(p)
    lam = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return int((lam > 0.5).sum())


def scalar_rank(op):
    """Number of unitization copies whose scalar lies above 1/2."""
    if op.scalar is None:
        return 0
    return int((np.real(op.scalar) >= 0.5).sum())


# -- class representatives ------------------------------------------------


@dataclass
class KClassRep:
    """A stabilized quasi-projection (even) or quasi-unitary (odd) together
    with its (eps, r) level and, for even parity, the scalar-rank tag."""

    parity: str
    rep: FiniteOperator
    params: QuasiParams
    ell: int = 0

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise DomainError("parity must be 'even' or 'odd'")

    def check(self, tau=DEFAULT_TAU):
        if self.parity == "even":
            ok, wit = is_quasi_projection(self.rep, self.params, tau)
            tagged = scalar_rank(self.rep)
            if tagged != self.ell:
                ok = False
            wit["scalar_rank"] = tagged
            wit["ell"] = self.ell
        else:
            ok, wit = is_quasi_unitary(self.rep, self.params, tau)
        return ok, wit


def stabilize(x, k):
    """diag(rep, I_k); even parity tags the added scalar rank onto ell."""
    if k < 0:
        raise DomainError("cannot remove stabilization summands")
    if k == 0:
        return x
    pad = FiniteOperator.identity(x.rep.space, k, unitized=True)
    rep = direct_sum([x.rep, pad])
    ell = x.ell + k if x.parity == "even" else x.ell
    return KClassRep(x.parity, rep, x.params, ell)


def k0_points(p, params, tau=DEFAULT_TAU, ell=None, r0=None):
    """Per-point class vector of a quasi-projection over a 0-dimensional space.

    Every pairwise distance must be at least the declared separation (or
    infinite) and the propagation bound must sit below it, so the operator
    is necessarily block-diagonal over points; the value at point j is
    rank chi(p_j) minus the scalar contribution ell * d_j.
    """
    space = p.space
    n = len(space)
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        separation = float(space.dist[off].min())
        if r0 is not None and separation < r0:
            raise DomainError(f"point separation {separation} below declared {r0}")
        if params.r >= separation:
            raise DomainError(
                f"r={params.r} not below the point separation {separation}")
    ok, wit = is_quasi_projection(p, params, tau)
    if not ok:
        raise DomainError(f"operator fails its quasi-test: {wit}")
    if ell is None:
        ell = scalar_rank(p)
    m = p.concrete()
    classes = np.zeros(n, dtype=int)
    for j in range(n):
        coords = p._coords_of_point(j)
        others = np.setdiff1d(np.arange(p.dim), coords)
        if others.size and np.abs(m[np.ix_(coords, others)]).max(initial=0.0) > tau:
            raise PropagationError(
                f"off-diagonal block at point {j} above tau; r too large or p invalid")
        block = m[np.ix_(coords, coords)]
        lam = np.linalg.eigvalsh((block + block.conj().T) / 2)
        if np.abs(lam * lam - lam).max(initial=0.0) >= 0.25:
            raise SpectralGapError(f"block at point {j} has no spectral gap")
        classes[j] = int((lam > 0.5).sum()) - ell * int(space.internal_dims[j])
    return classes


# -- homotopy certificates -------------------------------------------------


@dataclass
class HomotopyCertificate:
    """A sampled operator path plus the step bounds that make every linear
    interpolant provably stay inside the ambient quasi-regime."""

    parity: str
    samples: list
    params: QuasiParams
    step_bounds: list = field(default_factory=list)

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise DomainError("parity must be 'even' or 'odd'")
        if len(self.samples) < 1:
            raise CertificateError("certificate needs at least one sample")
        if len(self.step_bounds) != len(self.samples) - 1:
            raise CertificateError("need one step bound per consecutive pair")

    def __len__(self):
        return len(self.samples)

    def endpoints(self):
        return self.samples[0], self.samples[-1]


def interpolation_certificate(p, p_prime, ambient, parity="even", tau=DEFAULT_TAU):
    """Two-sample certificate for the straight line between nearby elements.

    Valid when 5 ||p - p'|| + max of the measured defects stays below the
    ambient eps and both endpoints respect the ambient propagation bound.
    """
    delta = opnorm(p - p_prime)
    defects = (quasi_defect(p, parity), quasi_defect(p_prime, parity))
    if 5 * delta + max(defects) >= ambient.eps:
        raise CertificateError(
            f"gap too large: 5*{delta} + {max(defects)} >= {ambient.eps}; subdivide")
    for op in (p, p_prime):
        if propagation(op, tau) >= ambient.r:
            raise CertificateError("endpoint exceeds the ambient propagation bound")
        if parity == "even" and herm_defect(op) > HERM_TOL:
            raise CertificateError("even certificates need self-adjoint samples")
    return HomotopyCertificate(parity, [p, p_prime], ambient, [delta])


def resample_certificate(path, eps, r=None, parity="even", replacements=None,
                         tau=DEFAULT_TAU):
    """Piecewise-linear certificate through (2 eps, r)-quasi-elements.

    Consecutive input samples must be within eps/15 in norm; optional
    replacements (propagation-trimmed substitutes) must sit within eps/20
    of the samples they replace.  The output is re-verified; a step that
    cannot meet the perturbation margin raises with its index.
    """
    if not path:
        raise CertificateError("empty path")
    if not 0 < 2 * eps < 0.25:
        raise DomainError("eps must lie in (0, 1/8) so the doubled level is valid")
    samples = list(path)
    if replacements is not None:
        if len(replacements) != len(path):
            raise CertificateError("one replacement per sample required")
        for i, (orig, rep) in enumerate(zip(path, replacements)):
            d = opnorm(orig - rep)
            if d > eps / 20:
                raise CertificateError(
                    f"replacement {i} is {d} away; needs <= eps/20 = {eps / 20}")
        samples = list(replacements)
    gaps = []
    for i in range(len(path) - 1):
        d = opnorm(path[i + 1] - path[i])
        if d > eps / 15:
            raise CertificateError(
                f"step {i} too coarse: {d} > eps/15 = {eps / 15}; refine there")
        gaps.append(d)
    if r is None:
        r = max(propagation(s, tau) for s in samples) * (1 + 1e-9) + 1e-15
    steps = [opnorm(b - a) for a, b in zip(samples, samples[1:])]
    cert = HomotopyCertificate(parity, samples, QuasiParams(2 * eps, r), steps)
    ok, report = verify_certificate(cert, tau)
    if not ok:
        raise CertificateError(
            f"resampled path fails verification at {report['failures'][0]}")
    return cert


def verify_certificate(cert, tau=DEFAULT_TAU):
    """Check every sample and every step margin; returns (verdict, report).

    For a linear step p_t = (1-t) p0 + t p1 of size d the defect obeys the
    exact identity p_t^2 - p_t = (1-t)(p0^2-p0) + t(p1^2-p1) - t(1-t)(p0-p1)^2
    (and its unitary analogue), so a step is admissible when
    max(e0, e1) + d^2/4 stays within the ambient eps.
    """
    failures = []
    defects, props = [], []
    for i, s in enumerate(cert.samples):
        d = quasi_defect(s, cert.parity)
        p = propagation(s, tau)
        defects.append(d)
        props.append(p)
        if cert.parity == "even" and herm_defect(s) > HERM_TOL:
            failures.append((i, "sample not self-adjoint"))
        if d >= cert.params.eps:
            failures.append((i, f"sample defect {d} >= eps {cert.params.eps}"))
        if p >= cert.params.r:
            failures.append((i, f"sample propagation {p} >= r {cert.params.r}"))
    margins = []
    for i, bound in enumerate(cert.step_bounds):
        actual = opnorm(cert.samples[i + 1] - cert.samples[i])
        if actual > bound + 1e-12:
            failures.append((i, f"recorded step bound {bound} below actual {actual}"))
        margin = cert.params.eps - (max(defects[i], defects[i + 1])
                                    + bound * bound / 4)
        margins.append(margin)
        if margin < -1e-12:
            failures.append((i, f"step margin violated by {-margin}"))
    report = {
        "samples": len(cert.samples),
        "parity": cert.parity,
        "eps": cert.params.eps,
        "r": cert.params.r,
        "worst_defect": max(defects),
        "worst_propagation": max(props),
        "worst_step_margin": min(margins) if margins else math.inf,
        "failures": failures,
    }
    return not failures, report


def certificate_rank_profile(cert):
    """chi-rank at every sample; constant along any verified even certificate."""
    return [chi_rank(s) for s in cert.samples]


def equivalence_level(parity, params):
    """The ambient level at which representatives of a class are compared:
    even classes at their own (eps, r), odd ones at (3 eps, 2 r)."""
    if parity == "even":
        return params
    return QuasiParams(3 * params.eps, 2 * params.r)


# -- control pairs ---------------------------------------------------------


class ControlPair:
    """A degradation bookkeeping pair (lambda, h) with lambda > 1 and h a
    tabulated function on (0, 1/(4 lambda)) taking values above 1.

    Composition is evaluated lazily through the stored interpolants so that
    nested compositions agree with sequential application to rounding.
    """

    GRID = 64

    def __init__(self, lam, evaluator, floor, label="h"):
        if lam <= 1:
            raise DomainError("lambda must exceed 1")
        self.lam = float(lam)
        self._eval = evaluator
        self.floor = float(floor)
        self.label = label
        if self.floor >= self.domain_sup:
            raise DomainError("empty evaluation domain")

    @property
    def domain_sup(self):
        return 1.0 / (4.0 * self.lam)

    @classmethod
    def from_table(cls, lam, eps_grid, values, label="h"):
        eps_grid = np.asarray(eps_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if eps_grid.ndim != 1 or eps_grid.shape != values.shape:
            raise DomainError("grid and values must be matching vectors")
        if (np.diff(eps_grid) <= 0).any():
            raise DomainError("grid must be strictly increasing")
        if eps_grid[0] <= 0 or eps_grid[-1] >= 1 / (4 * lam):
            raise DomainError("grid must lie inside (0, 1/(4 lambda))")
        if (values <= 1).any():
            raise DomainError("h must take values above 1")
        logx, logy = np.log(eps_grid), np.log(values)

        def evaluate(eps):
            return float(np.exp(np.interp(math.log(eps), logx, logy)))

        return cls(lam, evaluate, eps_grid[0], label)

    @classmethod
    def from_function(cls, lam, fn, label="h", grid=None):
        n = grid or cls.GRID
        hi = 1 / (4 * lam)
        eps_grid = np.geomspace(hi * 1e-6, hi * (1 - 1e-9), n)
        return cls.from_table(lam, eps_grid, [fn(e) for e in eps_grid], label)

    @classmethod
    def constant(cls, lam, value, label=None):
        return cls.from_function(lam, lambda _: value,
                                 label or f"const {value}")

    def __call__(self, eps):
        if not 0 < eps < self.domain_sup:
            raise DomainError(
                f"eps={eps} outside the control-pair domain (0, {self.domain_sup})")
        return self._eval(max(eps, self.floor))

    def table(self, n=None):
        n = n or self.GRID
        lo = max(self.floor, self.domain_sup * 1e-6)
        grid = np.geomspace(lo, self.domain_sup * (1 - 1e-9), n)
        return grid, np.array([self(e) for e in grid])

    def __repr__(self):
        return f"ControlPair(lambda={self.lam}, {self.label})"


def compose_control_pairs(a, b):
    """(lambda lambda', eps -> h(lambda' eps) h'(eps)), evaluated lazily."""
    lam = a.lam * b.lam
    floor = max(b.floor, a.floor / b.lam)
    if floor >= 1 / (4 * lam):
        raise DomainError("composed domain collapses below the tabulation floor")

    def evaluate(eps):
        return a._eval(max(b.lam * eps, a.floor)) * b._eval(max(eps, b.floor))

    return ControlPair(lam, evaluate, floor, label=f"({a.label})*({b.label})")


def apply_control_pair(cp, params):
    """Degrade (eps, r) to (lambda eps, h(eps) r)."""
    if params.eps >= cp.domain_sup:
        raise DomainError(
            f"eps={params.eps} outside the domain (0, {cp.domain_sup})")
    return QuasiParams(cp.lam * params.eps, cp(params.eps) * params.r)


def relaxed_params(relax, morphism, params):
    """Parameter degradation of a morphism acting on a relaxed group.

    With relax = (alpha, k) and morphism = (lambda, h) the degraded radius
    follows h'(eps) = h(alpha eps) k(eps) / k(lambda eps).
    """
    alpha, k = relax.lam, relax
    lam, h = morphism.lam, morphism
    eps = params.eps
    if alpha * eps >= h.domain_sup:
        raise DomainError("alpha * eps outside the domain of h")
    if eps >= k.domain_sup or lam * eps >= k.domain_sup:
        raise DomainError("eps or lambda * eps outside the domain of k")
    h_prime = h(alpha * eps) * k(eps) / k(lam * eps)
    return QuasiParams(lam * eps, h_prime * params.r)
