"""Kontsevich graphs: enumeration, operator assembly, angle-form weights.

Vertices of the first type are 1..n; ground vertices are stored as -1..-m
and printed as "g1".."gm".  Edges are kept grouped by source in ascending
order, preserving the per-vertex order e_k^1, e_k^2, ... which fixes the
orientation of the weight form.
"""

from __future__ import annotations

import cmath
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np

from .algebra_core import Poly, pack
from .deformation import StarProduct
from .polydiff import PoissonStructure, PolyDiffOp, PolyVector, apply_op, jacobi_check


# ---------------------------------------------------------------------------
# graphs


def _label(v: int) -> str:
    return f"g{-v}" if v < 0 else str(v)


def _parse_label(s) -> int:
    s = str(s)
    if s.startswith("g"):
        return -int(s[1:])
    return int(s)


@dataclass(frozen=True)
class KGraph:
    n: int
    m: int
    edges: tuple  # ((source, target), ...)

    def __post_init__(self):
        edges = tuple((int(s), int(t)) for s, t in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != 2 * self.n + self.m - 2:
            raise ValueError(f"graph needs {2 * self.n + self.m - 2} edges, has {len(edges)}")
        seen = set()
        last = 0
        for s, t in edges:
            if not 1 <= s <= self.n:
                raise ValueError(f"edge source {_label(s)} is not a first-type vertex")
            if s < last:
                raise ValueError("edges must be grouped by source in ascending order")
            last = s
            if not (1 <= t <= self.n or -self.m <= t <= -1):
                raise ValueError(f"edge target {_label(t)} out of range")
            if s == t:
                raise ValueError("loops are not admissible")
            if (s, t) in seen:
                raise ValueError("parallel edges are not admissible")
            seen.add((s, t))
        if self.m == 2 and any(sum(1 for e in edges if e[0] == k) != 2 for k in range(1, self.n + 1)):
            raise ValueError("graphs in G_{n,2} have exactly two edges per aerial vertex")

    def star(self, k: int) -> list:
        return [e for e in self.edges if e[0] == k]

    def valence(self, k: int) -> int:
        return len(self.star(k))

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "edges": [[_label(s), _label(t)] for s, t in self.edges]}

    @classmethod
    def from_json(cls, doc: dict) -> "KGraph":
        return cls(doc["n"], doc["m"], tuple((_parse_label(s), _parse_label(t)) for s, t in doc["edges"]))

    def __str__(self):
        return "[" + ", ".join(f"{_label(s)}->{_label(t)}" for s, t in self.edges) + "]"


def _target_key(n: int):
    # aerial vertices first, then ground vertices in order
    return lambda t: t if t > 0 else n - t


def enumerate_graphs(n: int, m: int = 2) -> list[KGraph]:
    """All admissible graphs with n aerial and m ground vertices, lexicographic order."""
    total = 2 * n + m - 2
    if total < 0:
        raise ValueError("2n + m - 2 must be non-negative")
    key = _target_key(n)
    targets = {k: sorted([v for v in range(1, n + 1) if v != k] + [-j for j in range(1, m + 1)], key=key)
               for k in range(1, n + 1)}
    if n == 0:
        return [KGraph(0, m, ())] if total == 0 else []
    out = []
    # star-product graphs (m = 2) carry exactly two edges per aerial vertex
    dists = [(2,) * n] if m == 2 else _compositions(total, n, max_part=n - 1 + m)
    for vals in dists:
        choices = [list(itertools.permutations(targets[k + 1], vals[k])) for k in range(n)]
        for combo in itertools.product(*choices):
            edges = tuple((k + 1, t) for k in range(n) for t in combo[k])
            out.append(KGraph(n, m, edges))
    out.sort(key=lambda g: (tuple(g.valence(k) for k in range(1, n + 1)), tuple((s, key(t)) for s, t in g.edges)))
    return out


def enumerate_star_graphs(n: int) -> list[KGraph]:
    return enumerate_graphs(n, 2)


def _compositions(total: int, parts: int, max_part: int):
    if parts == 1:
        if total <= max_part:
            yield (total,)
        return
    for first in range(min(total, max_part), -1, -1):
        for rest in _compositions(total - first, parts - 1, max_part):
            yield (first,) + rest


def count_star_graphs(n: int) -> int:
    """(n(n+1))^n computed by enumeration-free counting of ordered target pairs."""
    return (n * (n + 1)) ** n


# ---------------------------------------------------------------------------
# operators


def graph_polydiff_general(graph: KGraph, tensors: Sequence[PolyVector]) -> PolyDiffOp:
    """Polydifferential operator of arity m from per-vertex polyvectors.

    Vertex k carries the antisymmetric tensor of ``tensors[k-1]`` whose degree
    must equal the number of edges leaving k; each edge differentiates its target.
    """
    n, m = graph.n, graph.m
    if len(tensors) != n:
        raise ValueError("one polyvector per aerial vertex is required")
    names = tensors[0].names if tensors else None
    if names is None:
        raise ValueError("graphs without aerial vertices have no coordinate ring here")
    for k, t in enumerate(tensors, start=1):
        if t.degree != graph.valence(k):
            raise ValueError(f"vertex {k} has {graph.valence(k)} edges but its polyvector has degree {t.degree}")
        if t.names != names:
            raise ValueError("polyvectors over different coordinate rings")
    d = len(names)
    E = len(graph.edges)
    acc: dict = {}
    cache: dict = {}
    for I in itertools.product(range(d), repeat=E):
        coeff = None
        # collect derivative multi-indices per target
        into = {}
        for (s, t), i in zip(graph.edges, I):
            into.setdefault(t, [0] * d)[i] += 1
        ok = True
        pos = 0
        for k in range(1, n + 1):
            val = graph.valence(k)
            idx = I[pos:pos + val]
            pos += val
            dk = tuple(into.get(k, [0] * d))
            ck = (k, idx, dk)
            c = cache.get(ck)
            if c is None:
                c = tensors[k - 1].component(idx).partial(dk)
                cache[ck] = c
            if c.is_zero():
                ok = False
                break
            coeff = c if coeff is None else coeff * c
            if coeff.is_zero():
                ok = False
                break
        if not ok:
            continue
        sig = tuple(pack(into.get(-j, [0] * d)) for j in range(1, m + 1))
        acc[sig] = acc[sig] + coeff if sig in acc else coeff
    return PolyDiffOp(names, m, acc)


def graph_polydiff(graph: KGraph, alpha: PoissonStructure) -> PolyDiffOp:
    if graph.m != 2:
        raise ValueError("use graph_polydiff_general for m != 2")
    if any(graph.valence(k) != 2 for k in range(1, graph.n + 1)):
        raise ValueError("star-product graphs carry two edges per aerial vertex")
    if graph.n == 0:
        return PolyDiffOp.multiplication(alpha.names)
    return graph_polydiff_general(graph, [alpha.bivector] * graph.n)


def graph_operator(graph: KGraph, alpha: PoissonStructure, f: Poly, g: Poly) -> Poly:
    return apply_op(graph_polydiff(graph, alpha), [f, g])


def graph_operator_general(graph: KGraph, tensors: Sequence[PolyVector], fs: Sequence[Poly]) -> Poly:
    if len(fs) != graph.m:
        raise ValueError("one function per ground vertex is required")
    return apply_op(graph_polydiff_general(graph, tensors), list(fs))


# ---------------------------------------------------------------------------
# angle function and weights


def angle(z1: complex, z2: complex) -> float:
    """Hyperbolic angle at z1 between the geodesic to infinity and the geodesic to z2, in [0, 2pi)."""
    if z1 == z2:
        raise ValueError("coincident points")
    if z1.imag < 0 or z2.imag < 0:
        raise ValueError("points must lie in the closed upper half-plane")
    phi = cmath.phase(z2 - z1) - cmath.phase(z2 - z1.conjugate())
    return phi % (2 * math.pi)


def angle_log_form(z1: complex, z2: complex) -> complex:
    """(1/2i) Log of the cross-ratio; equals ``angle`` modulo pi."""
    w = ((z2 - z1) * (z2.conjugate() - z1)) / ((z2 - z1.conjugate()) * (z2.conjugate() - z1.conjugate()))
    return cmath.log(w) / 2j


GROUND = {-1: 0.0, -2: 1.0}


def _edge_gradients(z: np.ndarray, s: int, t: int, n: int):
    """d(phi_e) with respect to (x_1, y_1, ..., x_n, y_n), vectorized over samples."""
    N = z.shape[0]
    row = np.zeros((N, 2 * n))
    zs = z[:, s - 1]
    zt = z[:, t - 1] if t > 0 else np.full(N, GROUND[t], dtype=complex)
    r1 = 1.0 / (zt - zs)
    r2 = 1.0 / (zt - np.conj(zs))
    row[:, 2 * (s - 1)] = -r1.imag + r2.imag
    row[:, 2 * (s - 1) + 1] = -r1.real - r2.real
    if t > 0:
        row[:, 2 * (t - 1)] = r1.imag - r2.imag
        row[:, 2 * (t - 1) + 1] = r1.real - r2.real
    return row


def weight_integrand(graph: KGraph, u: np.ndarray) -> np.ndarray:
    """Integrand on the unit cube [0,1)^{2n} including the change of variables."""
    n = graph.n
    x = np.tan(np.pi * (u[:, 0::2] - 0.5))
    v = u[:, 1::2]
    y = v / (1.0 - v)
    jac = np.prod(np.pi * (1.0 + x * x) * (1.0 + y) ** 2, axis=1)
    z = x + 1j * y
    J = np.stack([_edge_gradients(z, s, t, n) for s, t in graph.edges], axis=1)
    det = np.linalg.det(J)
    return det * jac / (factorial(n) * (2 * np.pi) ** (2 * n))


@dataclass(frozen=True)
class MCConfig:
    samples: int = 1_000_000
    seed: int = 0
    chunk: int = 1 << 16
    workers: int = 1

    @classmethod
    def from_env(cls, seed: int, samples: int | None = None, **kw) -> "MCConfig":
        if samples is None:
            samples = int(os.environ.get("DQ_MC_SAMPLES", cls.samples))
        return cls(samples=samples, seed=seed, **kw)


@dataclass(frozen=True)
class WeightEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def _chunk_sums(args):
    graph, seed, graph_index, chunk_index, size = args
    ss = np.random.SeedSequence(seed, spawn_key=(graph_index, chunk_index))
    rng = np.random.default_rng(ss)
    u = rng.random((size, 2 * graph.n))
    vals = weight_integrand(graph, u)
    return float(vals.sum()), float((vals * vals).sum())


def graph_index(graph: KGraph) -> int:
    """Position of the graph in the enumeration order; keys the seed derivation."""
    return _index_table(graph.n, graph.m)[graph.edges]


@lru_cache(maxsize=None)
def _index_table(n: int, m: int) -> dict:
    return {g.edges: i for i, g in enumerate(enumerate_graphs(n, m))}


def weight_estimate(graph: KGraph, samples: int, seed: int, chunk: int = 1 << 16, workers: int = 1) -> WeightEstimate:
    """Monte-Carlo estimate of the graph weight; bitwise reproducible per seed.

    Chunk c of graph i draws from SeedSequence(seed, spawn_key=(i, c)); chunk
    sums are reduced in chunk order, so the result does not depend on ``workers``.
    """
    if graph.m != 2:
        raise ValueError("weights are computed for m = 2 only")
    if graph.n > 2 or graph.n < 1:
        raise ValueError("weights are supported for n = 1, 2")
    if samples < 2:
        raise ValueError("need at least two samples")
    gi = graph_index(graph)
    jobs = []
    left = samples
    c = 0
    while left > 0:
        size = min(chunk, left)
        jobs.append((graph, seed, gi, c, size))
        left -= size
        c += 1
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_chunk_sums, jobs))
    else:
        parts = [_chunk_sums(j) for j in jobs]
    s = 0.0
    s2 = 0.0
    for a, b in parts:
        s += a
        s2 += b
    mean = s / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return WeightEstimate(mean, math.sqrt(var / samples), samples, seed)


# ---------------------------------------------------------------------------
# order-2 data


def _alpha_entries(alpha: PoissonStructure):
    d = alpha.dim
    return [[alpha.matrix[i][j] for j in range(d)] for i in range(d)]


def _unit(d, *idx):
    e = [0] * d
    for i in idx:
        e[i] += 1
    return pack(e)


def c2_terms(alpha) -> dict:
    """The three order-2 operator families, with the middle one split by slot.

    T1  = a^{i1j1} a^{i2j2} d_{i1 i2} f d_{j1 j2} g
    T2a = a^{i1j1} d_{i1} a^{i2j2} d_{j1 j2} f d_{i2} g
    T2b = a^{i1j1} d_{i1} a^{i2j2} d_{i2} f d_{j1 j2} g
    T3  = d_{j2} a^{i1j1} d_{j1} a^{i2j2} d_{i1} f d_{i2} g
    """
    A = alpha.matrix() if callable(alpha.matrix) else alpha.matrix
    names = alpha.names
    d = len(names)
    terms = {k: {} for k in ("T1", "T2a", "T2b", "T3")}

    def add(T, sig, c):
        if c.is_zero():
            return
        T[sig] = T[sig] + c if sig in T else c

    dA = [[[A[i][j].diff(k) for k in range(d)] for j in range(d)] for i in range(d)]
    for i1, j1, i2, j2 in itertools.product(range(d), repeat=4):
        a1 = A[i1][j1]
        if not a1.is_zero():
            a2 = A[i2][j2]
            if not a2.is_zero():
                add(terms["T1"], (_unit(d, i1, i2), _unit(d, j1, j2)), a1 * a2)
            c = dA[i2][j2][i1]
            if not c.is_zero():
                add(terms["T2a"], (_unit(d, j1, j2), _unit(d, i2)), a1 * c)
                add(terms["T2b"], (_unit(d, i2), _unit(d, j1, j2)), a1 * c)
        c1 = dA[i1][j1][j2]
        c2 = dA[i2][j2][j1]
        if not c1.is_zero() and not c2.is_zero():
            add(terms["T3"], (_unit(d, i1), _unit(d, i2)), c1 * c2)
    return {k: PolyDiffOp(names, 2, v) for k, v in terms.items()}


C2_COEFFS = {"T1": Fraction(1, 2), "T2a": Fraction(1, 3), "T2b": Fraction(1, 3), "T3": Fraction(-1, 6)}


def c2_operator(alpha: PoissonStructure) -> PolyDiffOp:
    T = c2_terms(alpha)
    out = PolyDiffOp.zero(alpha.names, 2)
    for k, c in C2_COEFFS.items():
        out = out + T[k].scale(c)
    return out


def c2_formula(alpha: PoissonStructure, f: Poly, g: Poly) -> Poly:
    return apply_op(c2_operator(alpha), [f, g])


def _generic_bivector() -> PolyVector:
    """A non-Poisson bivector on R^3 whose coefficients separate all order-2 graph operators."""
    names = ("x1", "x2", "x3")
    x = [Poly.var(names, i) for i in range(3)]
    one = Poly.const(names, 1)
    a12 = x[0] * x[0] * x[1] + x[2] + one.scale(2)
    a13 = x[1] * x[2] * x[2] - x[0] * x[1] + one.scale(3)
    a23 = x[0] * x[1] * x[2] + x[0] * x[0] * x[0] - x[2] * x[2] + one.scale(5)
    return PolyVector(names, 2, {(0, 1): a12, (0, 2): a13, (1, 2): a23})


class _Generic:
    """Minimal stand-in exposing names/matrix for the generic bivector."""

    def __init__(self, bv: PolyVector):
        self.names = bv.names
        self.bivector = bv
        self.matrix = bv.matrix()
        self.dim = len(self.names)


@lru_cache(maxsize=None)
def order2_classification() -> dict:
    """Map each G_{2,2} graph to (term, sign) with B_graph = sign * T_term.

    Graphs whose aerial vertices both point at the same ground vertex and at
    each other fall in classes Z1 / Z2 (no term in the order-2 formula).
    """
    gen = _Generic(_generic_bivector())
    T = c2_terms(gen)
    graphs = enumerate_star_graphs(2)
    ops = {g.edges: graph_polydiff_general(g, [gen.bivector] * 2) for g in graphs}
    out = {}
    reps: dict = {}
    for g in graphs:
        B = ops[g.edges]
        found = None
        for name, Tn in T.items():
            if B == Tn:
                found = (name, 1)
            elif B == -Tn:
                found = (name, -1)
            if found:
                break
        if found is None:
            for name, R in reps.items():
                if B == R:
                    found = (name, 1)
                elif B == -R:
                    found = (name, -1)
                if found:
                    break
        if found is None:
            name = f"Z{len(reps) + 1}"
            reps[name] = B
            found = (name, 1)
        out[g.edges] = found
    return out


def order2_class_sizes() -> dict:
    sizes: dict = {}
    for name, _ in order2_classification().values():
        sizes[name] = sizes.get(name, 0) + 1
    return sizes


def exact_weight(graph: KGraph) -> Fraction:
    """Exact weights for n = 1, 2 (the n = 2 values follow from the order-2 coefficients)."""
    if graph.m != 2:
        raise ValueError("exact weights are tabulated for m = 2")
    if graph.n == 0:
        return Fraction(1)
    if graph.n == 1:
        return Fraction(1, 2) if graph.edges == ((1, -1), (1, -2)) else Fraction(-1, 2)
    if graph.n == 2:
        name, sign = order2_classification()[graph.edges]
        size = order2_class_sizes()[name]
        return sign * C2_COEFFS.get(name, Fraction(0)) / size
    raise ValueError("no exact weights beyond n = 2")


def c2_from_graphs(alpha: PoissonStructure) -> PolyDiffOp:
    out = PolyDiffOp.zero(alpha.names, 2)
    for g in enumerate_star_graphs(2):
        w = exact_weight(g)
        if w:
            out = out + graph_polydiff(g, alpha).scale(w)
    return out


def c1_from_graphs(alpha: PoissonStructure) -> PolyDiffOp:
    out = PolyDiffOp.zero(alpha.names, 2)
    for g in enumerate_star_graphs(1):
        out = out + graph_polydiff(g, alpha).scale(exact_weight(g))
    return out


def combine_order2(estimates: dict) -> dict:
    """Sum sign * weight per class: estimates maps graph edges -> (mean, std_error)."""
    cls = order2_classification()
    acc: dict = {}
    for edges, (mean, err) in estimates.items():
        name, sign = cls[edges]
        m, v = acc.get(name, (0.0, 0.0))
        acc[name] = (m + sign * mean, v + err * err)
    return {k: (m, math.sqrt(v)) for k, (m, v) in acc.items()}


def kontsevich_star_order2(alpha: PoissonStructure) -> StarProduct:
    res = jacobi_check(alpha.bivector)
    if not res.ok:
        raise ValueError(f"Jacobi identity fails; defect {res.defect}")
    names = alpha.names
    return StarProduct(names, 2, [PolyDiffOp.multiplication(names), alpha.operator(), c2_operator(alpha)],
                       True, alpha, "kontsevich")
