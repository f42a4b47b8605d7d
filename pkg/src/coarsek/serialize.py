"""Deterministic text formats for complexes, spaces, operators, class
representatives, certificates, coarse maps, paths, and reports.

Floats are written with 17 significant digits so every round trip is exact;
infinite distances appear as the literal token ``inf``.  Files are written
atomically (temp file + rename) and every format starts with a tagged
version line.  Operators reference their space by a content hash and can
only be loaded against a space with the same hash.
"""

from __future__ import annotations

import hashlib
import os
import tempfile

import numpy as np

from .controlled import HomotopyCertificate, KClassRep, QuasiParams
from .errors import MalformedInputError
from .geometry import SamplePoint, SampledSpace, build_complex
from .operator import FiniteOperator

_F = "{:.17g}"


def _fmt(x):
    return _F.format(float(x))


def _fmt_complex(z):
    return f"{_fmt(z.real)} {_fmt(z.imag)}"


def atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".coarsek-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path_or_text):
    s = os.fspath(path_or_text) if not isinstance(path_or_text, str) \
        else path_or_text
    if isinstance(s, str) and "\n" not in s and os.path.exists(s):
        with open(s, encoding="utf-8") as fh:
            return fh.read()
    return s


def _expect(line, tag):
    if line.strip() != tag:
        raise MalformedInputError(f"expected {tag!r}, found {line.strip()!r}")


# -- complexes ---------------------------------------------------------------


def dumps_complex(complex_):
    lines = [" ".join(str(v) for v in s) for s in complex_.maximal_simplices()]
    return "\n".join(lines) + "\n"


def loads_complex(text):
    """One maximal simplex per line, whitespace-separated vertex ids."""
    simplices = []
    for ln, line in enumerate(_read(text).splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            simplices.append([int(tok) for tok in line.split()])
        except ValueError as exc:
            raise MalformedInputError(f"line {ln}: {exc}") from exc
    if not simplices:
        raise MalformedInputError("no simplices in complex file")
    return build_complex(simplices)


# -- spaces ------------------------------------------------------------------


def dumps_space(space):
    out = ["coarsek-space v1",
           f"mesh: {'none' if space.mesh is None else _fmt(space.mesh)}",
           f"points: {len(space)}"]
    for i, p in enumerate(space.points):
        carrier = ",".join(str(v) for v in p.carrier)
        coords = ",".join(_fmt(c) for c in p.coords)
        out.append(f"{i} {carrier} {coords} {space.internal_dims[i]}")
    out.append("dist:")
    for row in space.dist:
        out.append(" ".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def loads_space(text):
    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-space v1")
    mesh_tok = lines[1].split(":", 1)[1].strip()
    mesh = None if mesh_tok == "none" else float(mesh_tok)
    n = int(lines[2].split(":", 1)[1])
    points, dims = [], []
    for i in range(n):
        _, carrier, coords, d = lines[3 + i].split()
        points.append(SamplePoint(tuple(int(v) for v in carrier.split(",")),
                                  tuple(float(c) for c in coords.split(","))))
        dims.append(int(d))
    _expect(lines[3 + n], "dist:")
    dist = np.array([[float(tok) for tok in lines[4 + n + i].split()]
                     for i in range(n)])
    return SampledSpace(points, dist, dims, mesh=mesh)


def space_hash(space):
    digest = hashlib.sha256(dumps_space(space).encode("utf-8")).hexdigest()
    return digest[:16]


# -- operators ---------------------------------------------------------------


def dumps_operator(op):
    out = ["coarsek-operator v1",
           f"space: {space_hash(op.space)}",
           f"amplification: {op.amplification}"]
    if op.scalar is None:
        out.append("scalar: none")
    else:
        out.append("scalar: " + " ".join(_fmt_complex(z) for z in op.scalar))
    out.append(f"dim: {op.dim}")
    out.append("entries:")
    for row in op.entries:
        out.append(" ".join(_fmt_complex(z) for z in row))
    return "\n".join(out) + "\n"


def loads_operator(text, space):
    lines = _read(text).splitlines()
    return _parse_operator(lines, 0, space)[0]


def _parse_operator(lines, at, space):
    _expect(lines[at], "coarsek-operator v1")
    ref = lines[at + 1].split(":", 1)[1].strip()
    have = space_hash(space)
    if ref != have:
        raise MalformedInputError(
            f"operator references space {ref}, supplied space hashes to {have}")
    k = int(lines[at + 2].split(":", 1)[1])
    scal_tok = lines[at + 3].split(":", 1)[1].strip()
    if scal_tok == "none":
        scalar = None
    else:
        vals = [float(t) for t in scal_tok.split()]
        scalar = np.array([complex(a, b) for a, b in zip(vals[::2], vals[1::2])])
    n = int(lines[at + 4].split(":", 1)[1])
    _expect(lines[at + 5], "entries:")
    rows = []
    for i in range(n):
        vals = [float(t) for t in lines[at + 6 + i].split()]
        rows.append([complex(a, b) for a, b in zip(vals[::2], vals[1::2])])
    op = FiniteOperator(space, np.array(rows, dtype=complex), k, scalar)
    return op, at + 6 + n


# -- class representatives and certificates ----------------------------------


def dumps_kclass(rep):
    head = ["coarsek-kclass v1",
            f"parity: {rep.parity}",
            f"epsilon: {_fmt(rep.params.eps)}",
            f"r: {_fmt(rep.params.r)}",
            f"ell: {rep.ell}",
            "operator:"]
    return "\n".join(head) + "\n" + dumps_operator(rep.rep)


def loads_kclass(text, space):
    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-kclass v1")
    parity = lines[1].split(":", 1)[1].strip()
    eps = float(lines[2].split(":", 1)[1])
    r = float(lines[3].split(":", 1)[1])
    ell = int(lines[4].split(":", 1)[1])
    _expect(lines[5], "operator:")
    op, _ = _parse_operator(lines, 6, space)
    return KClassRep(parity, op, QuasiParams(eps, r), ell)


def dumps_certificate(cert):
    out = ["coarsek-certificate v1",
           f"parity: {cert.parity}",
           f"epsilon: {_fmt(cert.params.eps)}",
           f"r: {_fmt(cert.params.r)}",
           f"samples: {len(cert.samples)}",
           "step_bounds: " + " ".join(_fmt(b) for b in cert.step_bounds)]
    for i, s in enumerate(cert.samples):
        out.append(f"--- sample {i} ---")
        out.append(dumps_operator(s).rstrip("\n"))
    return "\n".join(out) + "\n"


def loads_certificate(text, space):
    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-certificate v1")
    parity = lines[1].split(":", 1)[1].strip()
    eps = float(lines[2].split(":", 1)[1])
    r = float(lines[3].split(":", 1)[1])
    count = int(lines[4].split(":", 1)[1])
    toks = lines[5].split(":", 1)[1].split()
    bounds = [float(t) for t in toks]
    samples = []
    at = 6
    for i in range(count):
        _expect(lines[at], f"--- sample {i} ---")
        op, at = _parse_operator(lines, at + 1, space)
        samples.append(op)
    return HomotopyCertificate(parity, samples, QuasiParams(eps, r), bounds)


# -- coarse maps and paths ----------------------------------------------------


def dumps_coarse_map(f):
    out = ["coarsek-map v1",
           f"source: {space_hash(f.source)}",
           f"target: {space_hash(f.target)}",
           f"points: {len(f.source)}"]
    out.extend(f"{i} {f.assignment[i]}" for i in range(len(f.source)))
    return "\n".join(out) + "\n"


def loads_coarse_map(text, source, target):
    from .coarse import CoarseMap

    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-map v1")
    for label, space, ln in (("source", source, 1), ("target", target, 2)):
        ref = lines[ln].split(":", 1)[1].strip()
        if ref != space_hash(space):
            raise MalformedInputError(f"{label} space hash mismatch")
    n = int(lines[3].split(":", 1)[1])
    assignment = np.zeros(n, dtype=int)
    for i in range(n):
        a, b = lines[4 + i].split()
        assignment[int(a)] = int(b)
    return CoarseMap(source, target, assignment)


def dumps_homotopy(hom):
    out = ["coarsek-homotopy v1",
           f"lipschitz: {_fmt(hom.lipschitz_bound)}",
           "displacements: " + " ".join(_fmt(d) for d in hom.displacement_table),
           f"frames: {len(hom.frames)}"]
    for i, f in enumerate(hom.frames):
        out.append(f"--- frame {i} ---")
        out.append(dumps_coarse_map(f).rstrip("\n"))
    return "\n".join(out) + "\n"


def loads_homotopy(text, source, target):
    from .coarse import LipschitzHomotopy

    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-homotopy v1")
    lipschitz = float(lines[1].split(":", 1)[1])
    count = int(lines[3].split(":", 1)[1])
    frames = []
    at = 4
    for i in range(count):
        _expect(lines[at], f"--- frame {i} ---")
        block_len = 4 + len(source)
        frames.append(loads_coarse_map(
            "\n".join(lines[at + 1:at + 1 + block_len]), source, target))
        at += 1 + block_len
    return LipschitzHomotopy(frames, lipschitz_bound=lipschitz)


def dumps_path(path):
    out = ["coarsek-path v1",
           "times: " + " ".join(_fmt(t) for t in path.times),
           f"modulus: {_fmt(path.modulus)}",
           f"horizon: {_fmt(path.horizon)}"]
    for i, v in enumerate(path.values):
        out.append(f"--- sample {i} ---")
        out.append(dumps_operator(v).rstrip("\n"))
    return "\n".join(out) + "\n"


def loads_path(text, space):
    from .paths import PathOperator

    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-path v1")
    times = [float(t) for t in lines[1].split(":", 1)[1].split()]
    modulus = float(lines[2].split(":", 1)[1])
    values = []
    at = 4
    for i in range(len(times)):
        _expect(lines[at], f"--- sample {i} ---")
        op, at = _parse_operator(lines, at + 1, space)
        values.append(op)
    return PathOperator(np.array(times), values, modulus)


# -- reports -------------------------------------------------------------------


def dumps_report(fields, table=None):
    """key: value lines plus an optional plot-ready table."""
    out = ["coarsek-report v1"]
    for k, v in fields.items():
        if isinstance(v, float):
            v = _fmt(v)
        out.append(f"{k}: {v}")
    if table:
        out.append("[table]")
        out.append("quantity\tvalue\tbound\tmargin")
        for row in table:
            out.append("\t".join(_fmt(v) if isinstance(v, float) else str(v)
                                 for v in row[:4]))
    return "\n".join(out) + "\n"


def loads_report(text):
    lines = _read(text).splitlines()
    _expect(lines[0], "coarsek-report v1")
    fields = {}
    table = []
    in_table = False
    for line in lines[1:]:
        if line.strip() == "[table]":
            in_table = True
            continue
        if in_table:
            if line.strip() and not line.startswith("quantity"):
                table.append(line.split("\t"))
        elif line.strip():
            k, v = line.split(":", 1)
            fields[k.strip()] = v.strip()
    return fields, table
