"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from coarsek.cli import main as cli_main
from coarsek.coarse import (
    CoarseMap,
    LipschitzHomotopy,
    ad,
    delta_cover,
    expansion_function,
    homotopy_invariance_certificate,
    rotation_homotopy,
)
from coarsek.controlled import (
    ControlPair,
    QuasiParams,
    apply_control_pair,
    compose_control_pairs,
    k0_points,
    projection_defect,
    relaxed_params,
    spectral_band_radius,
    verify_certificate,
)
from coarsek.generators import (
    phase_unitary,
    random_banded,
    random_blockdiag_quasi_projection,
    random_quasi_projection,
    random_region_supported,
    shift_unitary,
    trial_rngs,
)
from coarsek.geometry import (
    SampledSpace,
    build_complex,
    circle_space,
    decompose,
    discretize,
    neighborhood,
    uniform_edge_space,
)
from coarsek.mv import (
    MvPair,
    cia_midpoint,
    circle_cut,
    coercive_split,
    local_index,
    split_masks,
    verify_weak_mv_pair,
)
from coarsek.operator import FiniteOperator, opnorm, propagation


@contextmanager
def criterion(number, label, budget_seconds):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"criterion {number} ({label}): FAIL")
        raise
    elapsed = time.monotonic() - start
    assert elapsed < budget_seconds, \
        f"criterion {number} exceeded its {budget_seconds}s budget: {elapsed:.1f}s"
    print(f"criterion {number} ({label}): PASS in {elapsed:.1f}s")


def small_spaces():
    """A pool of metric spaces with module dimension at most 64."""
    line8 = SampledSpace.from_distance_matrix(
        np.abs(np.subtract.outer(np.arange(8.0), np.arange(8.0))) * 0.2,
        internal_dims=np.full(8, 2))
    line5 = SampledSpace.from_distance_matrix(
        np.abs(np.subtract.outer(np.arange(5.0), np.arange(5.0))) * 0.3,
        internal_dims=[1, 3, 2, 1, 2])
    blob = SampledSpace.from_distance_matrix(np.zeros((1, 1)),
                                             internal_dims=[48])
    return [line8, line5, blob]


def test_criterion_1_and_7_perturbation_and_spectral_band():
    spaces = small_spaces()
    trials_per_eps = 340
    with criterion(1, "perturbation bound over the randomized suite", 60):
        for eps in (0.01, 0.05, 0.1):
            band = spectral_band_radius(eps)
            params = QuasiParams(eps, 0.45)
            for k, rng in enumerate(trial_rngs(int(eps * 1000), trials_per_eps)):
                space = spaces[k % len(spaces)]
                p, _ = random_quasi_projection(space, params, rng)
                assert p.dim <= 64
                # criterion 7: accepted quasi-projections keep their spectrum
                # in the two clusters of radius (sqrt(1+4 eps) - 1)/2
                lam = np.linalg.eigvalsh(p.entries)
                ok = (np.abs(lam) <= band + 1e-9) | (np.abs(lam - 1) <= band + 1e-9)
                assert ok.all()
                # criterion 1: perturb within the band by delta <= 0.02
                delta = rng.uniform(0.002, 0.02)
                bump = random_banded(space, params.r * 0.999, rng,
                                     selfadjoint=True, norm=delta)
                p2 = FiniteOperator(space, p.entries + bump.entries)
                measured = projection_defect(p2)
                gap = opnorm(p - p2)
                assert measured <= 5 * gap + eps + 1e-9
    assert trials_per_eps * 3 >= 1000
    print("criterion 7 (spectral band): PASS across the criterion-1 suite")


def test_criterion_2_base_case_points():
    dist = np.full((5, 5), 1.0)
    np.fill_diagonal(dist, 0.0)
    space = SampledSpace.from_distance_matrix(dist,
                                              internal_dims=[2, 3, 1, 2, 4])
    r0 = 1.0
    with criterion(2, "dimension-0 base case", 30):
        for k, rng in enumerate(trial_rngs(202, 100)):
            ranks = np.array([rng.integers(0, d + 1)
                              for d in space.internal_dims])
            p = random_blockdiag_quasi_projection(space, rng, ranks,
                                                  noise=0.02)
            params = QuasiParams(0.15, rng.uniform(0.05, 0.95) * r0)
            got = k0_points(p, params, ell=0)
            assert (got == ranks).all()
            # stabilization leaves the class vector unchanged
            from coarsek.controlled import KClassRep, stabilize
            rep = KClassRep("even", p.with_scalar(0.0), params, 0)
            lifted = stabilize(rep, 1 + k % 3)
            again = k0_points(lifted.rep, params, ell=lifted.ell)
            assert (again == ranks).all()


def test_criterion_3_coercive_split_and_cia():
    jobs = []
    circle_cx, circle, _ = circle_space(3, mesh=0.019)
    jobs.append((circle_cx, circle, 150))
    tri_cx = build_complex([(0, 1, 2)])
    tri = discretize(tri_cx, 0.35, fiber_dim=2)
    jobs.append((tri_cx, tri, 350))
    r = 1 / 50
    with criterion(3, "coercive split and midpoint axioms", 120):
        for cx, space, trials in jobs:
            x1, x2 = decompose(space, cx)
            pim = split_masks(x1, x2)
            sig = split_masks(neighborhood(space, x1, 1 / 10 + r),
                              neighborhood(space, x2, 1 / 10 + r))
            for rng in trial_rngs(int(len(space)), trials):
                x = random_banded(space, r, rng, norm=1.0)
                a, b = coercive_split(x, pim)
                assert np.abs((a + b - x).concrete()).max() <= 1e-14
                nx = opnorm(x)
                assert opnorm(a) <= 4 * nx + 1e-12
                assert opnorm(b) <= 4 * nx + 1e-12
                core = random_region_supported(space, sig[1], rng, norm=1.0)
                xa = core + 0.04 * random_region_supported(
                    space, sig[0] | sig[1], rng, norm=1.0)
                ya = core + 0.04 * random_region_supported(
                    space, sig[1] | sig[2], rng, norm=1.0)
                eps = opnorm(xa - ya) * (1 + 1e-9) + 1e-12
                z = cia_midpoint(xa, ya, sig, eps)
                assert opnorm(xa - z) <= 4 * eps + 1e-9
                assert opnorm(ya - z) <= 4 * eps + 1e-9


def test_criterion_4_rotation_homotopy():
    thin = discretize(build_complex([(0, 1)]), 0.4)
    fat = discretize(build_complex([(0, 1)]), 0.4, fiber_dim=2)
    maps = [CoarseMap(thin, fat, np.arange(len(thin)))]
    rng0 = np.random.default_rng(404)
    maps.append(CoarseMap(thin, fat, rng0.permutation(len(thin))))
    params = QuasiParams(0.1, 0.3)
    delta = 0.3
    with criterion(4, "rotation homotopy certificates", 120):
        for k, rng in enumerate(trial_rngs(44, 50)):
            f = maps[k % len(maps)]
            v1 = delta_cover(f, delta)
            v2 = delta_cover(f, delta, bias="pack-high")
            p, _ = random_quasi_projection(thin, params, rng)
            cert = rotation_homotopy(v1, v2, p, params)
            ok, rep = verify_certificate(cert)
            assert ok, rep["failures"]
            from coarsek.controlled import certificate_rank_profile
            assert len(set(certificate_rank_profile(cert))) == 1
            omega = expansion_function(f, params.r)
            base_defect = projection_defect(p)
            for s in cert.samples:
                assert projection_defect(s) < params.eps
                assert propagation(s) < omega * (1 + 1e-12) + 1e-12 + 8 * delta
            start, end = cert.endpoints()
            n = fat.total_dim
            a1 = ad(v1, p).concrete()
            a2 = ad(v2, p).concrete()
            expect_start = np.zeros((4 * n, 4 * n), complex)
            expect_start[:n, :n] = a1
            expect_end = np.zeros((4 * n, 4 * n), complex)
            expect_end[n:2 * n, n:2 * n] = a2
            assert np.allclose(start.concrete(), expect_start, atol=1e-12)
            assert np.allclose(end.concrete(), expect_end, atol=1e-12)


def test_criterion_5_homotopy_invariance_pipeline():
    delta = 0.05
    n = 34  # spacing just below delta
    base = uniform_edge_space(n)
    dims = np.ones(n, dtype=int)
    dims[n - 1] = 2
    space = SampledSpace(base.points, base.dist, dims, mesh=base.mesh)
    assert space.mesh < delta
    frames = [CoarseMap.identity(space),
              CoarseMap(space, space, np.minimum(np.arange(n) + 1, n - 1))]
    hom = LipschitzHomotopy(frames, lipschitz_bound=2.0)
    assert hom.measured_lipschitz <= 2.0 + 1e-9
    rng = np.random.default_rng(55)
    angles = np.linspace(0.0, 1.2, n)
    base_u = phase_unitary(space, angles)
    noise = rng.standard_normal(space.total_dim)
    noise = np.diag(0.002 * noise / np.abs(noise).max())
    u = FiniteOperator(space, base_u.entries + noise, 1, base_u.scalar)
    params = QuasiParams(0.01, 0.2)
    with criterion(5, "homotopy invariance pipeline", 300):
        cert, report = homotopy_invariance_certificate(hom, u, params, delta)
        c = hom.lipschitz_bound
        assert report["achieved_eps"] <= 21 * params.eps + 1e-9
        assert report["achieved_r"] <= 5 * (c * params.r + 4 * delta) + 1e-9
        ok, _ = verify_certificate(cert)
        assert ok


def test_criterion_6_circle_index_detector():
    with criterion(6, "circle index detector", 120):
        base_sign = None
        for mesh in (2.0, 1.0):  # 32 samples, then the 64-sample refinement
            _, space, order = circle_space(16, mesh=mesh)
            assert len(space) in (32, 64)
            phi, reg0, _ = circle_cut(space, order)
            s1 = shift_unitary(space, order)
            s2 = shift_unitary(space, order, power=2)
            one = FiniteOperator.identity(space, unitized=False)
            i1 = local_index(s1, phi, reg0)
            i2 = local_index(s2, phi, reg0)
            assert abs(i1) == 1
            assert i2 == 2 * i1
            assert local_index(one, phi, reg0) == 0
            if base_sign is None:
                base_sign = i1
            assert i1 == base_sign
            # 5% norm perturbation of u leaves the detector unchanged
            for rng in trial_rngs(66, 3):
                bump = random_banded(space, 0.9, rng, norm=0.05)
                noisy = FiniteOperator(space, s1.entries + bump.entries)
                assert local_index(noisy, phi, reg0) == base_sign


def test_criterion_8_control_pair_algebra():
    with criterion(8, "control pair algebra", 60):
        a = ControlPair.from_function(1.6, lambda e: 1.5 + 12 * e)
        b = ControlPair.from_function(2.2, lambda e: 2.0 + math.exp(-3 * e))
        c = ControlPair.from_function(1.3, lambda e: 1.1 + 1 / (1 + e))
        comp = compose_control_pairs(a, b)
        grid, _ = comp.table(64)
        assert len(grid) == 64
        for eps in grid:
            q = QuasiParams(eps, 1.0)
            lhs = apply_control_pair(comp, q)
            rhs = apply_control_pair(a, apply_control_pair(b, q))
            assert abs(lhs.eps - rhs.eps) <= 1e-12 * abs(rhs.eps)
            assert abs(lhs.r - rhs.r) <= 1e-12 * abs(rhs.r)
        left = compose_control_pairs(compose_control_pairs(a, b), c)
        right = compose_control_pairs(a, compose_control_pairs(b, c))
        lgrid, lv = left.table(64)
        _, rv = right.table(64)
        assert np.allclose(lv, rv, rtol=1e-12, atol=0)
        # relaxed-morphism degradation: h'(e) = h(alpha e) k(e) / k(lambda e)
        h, k = a, c
        for eps in np.geomspace(1e-4, 0.03, 16):
            q = QuasiParams(eps, 2.0)
            out = relaxed_params(k, h, q)
            expect = h(k.lam * eps) * k(eps) / k(h.lam * eps) * q.r
            assert abs(out.r - expect) <= 1e-12 * expect
            assert out.eps == pytest.approx(h.lam * eps, rel=1e-12)


def test_criterion_9_cli_determinism(tmp_path):
    circle = tmp_path / "circle.txt"
    circle.write_text("0 1\n1 2\n2 0\n", encoding="utf-8")
    _, space, order = circle_space(16)
    from coarsek.serialize import dumps_operator, dumps_space
    sf = tmp_path / "space.txt"
    sf.write_text(dumps_space(space), encoding="utf-8")
    u = shift_unitary(space, order)
    uf = tmp_path / "u.txt"
    uf.write_text(dumps_operator(u), encoding="utf-8")
    phi, reg0, _ = circle_cut(space, order)
    cf = tmp_path / "cut.txt"
    cf.write_text("\n".join(f"{v:.17g}" for v in phi.values), encoding="utf-8")
    rf = tmp_path / "region.txt"
    rf.write_text("\n".join(str(int(x)) for x in reg0), encoding="utf-8")

    runs = [
        (["mv-verify", str(circle), "--mesh", "0.05", "--r", "0.02",
          "--trials", "8", "--seed", "9"], "mv-verify"),
        (["quasi-check", str(sf), str(uf), "--parity", "odd",
          "--epsilon", "0.1", "--r", "1.0"], "quasi-check"),
        (["clutching-index", str(sf), str(uf), str(cf), str(rf)],
         "clutching-index"),
        (["op-prop", str(sf), str(uf)], "op-prop"),
    ]
    with criterion(9, "CLI determinism", 120):
        for argv, name in runs:
            blobs = []
            for attempt in ("first", "second"):
                out = str(tmp_path / f"{name}-{attempt}")
                code = cli_main(argv + ["--out", out])
                assert code == 0
                with open(os.path.join(out, f"{name}.report.txt"), "rb") as fh:
                    blobs.append(fh.read())
            assert blobs[0] == blobs[1], f"{name} reports differ between runs"
