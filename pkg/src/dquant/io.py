"""JSON interchange documents, all tagged {"schema": "dq/1", "kind": ...}.

Writers return plain dicts; ``dumps`` fixes key order and formatting so that
equal inputs give byte-identical output.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .algebra_core import LambdaSeries, Poly, parse_expression
from .deformation import StarProduct
from .kontsevich import KGraph, WeightEstimate
from .polydiff import PoissonStructure, PolyDiffOp

SCHEMA = "dq/1"


class DocumentError(ValueError):
    pass


def document(kind: str, **payload) -> dict:
    return {"schema": SCHEMA, "kind": kind, **payload}


def dumps(doc: Mapping) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def loads(text: str, kind: str | None = None) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    if "schema" in doc and doc["schema"] != SCHEMA:
        raise DocumentError(f"unsupported schema {doc['schema']!r}")
    if kind is not None and doc.get("kind", kind) != kind:
        raise DocumentError(f"expected a {kind!r} document, got {doc.get('kind')!r}")
    return doc


def read_file(path: str, kind: str | None = None) -> dict:
    with open(path) as fh:
        return loads(fh.read(), kind)


# -- series and operators ----------------------------------------------------


def series_doc(s: LambdaSeries) -> dict:
    coeffs = {str(k): str(c) for k, c in s.items()}
    return document("series", names=list(s.names), var=s.var, trunc_order=s.trunc_order, coeffs=coeffs)


def series_from_doc(doc: Mapping) -> LambdaSeries:
    names = tuple(doc["names"])
    d = {int(k): parse_expression(v, names) for k, v in doc["coeffs"].items()}
    return LambdaSeries.from_dict(names, doc["trunc_order"], d, var=doc.get("var", "L"))


def operator_doc(D: PolyDiffOp) -> dict:
    return document("operator", **D.to_records())


def operator_from_doc(doc: Mapping) -> PolyDiffOp:
    return PolyDiffOp.from_records(doc)


def star_product_doc(S: StarProduct) -> dict:
    return document("star_product", label=S.label, **S.to_json())


def star_product_from_doc(doc: Mapping) -> StarProduct:
    S = StarProduct.from_json(doc)
    S.label = doc.get("label", "")
    return S


# -- graphs and weights ------------------------------------------------------


def graph_doc(g: KGraph) -> dict:
    return document("graph", **g.to_json())


def graph_from_doc(doc: Mapping) -> KGraph:
    return KGraph.from_json(doc)


def weight_doc(g: KGraph, est: WeightEstimate) -> dict:
    return document("weight", graph=g.to_json(), **est.to_json())


def weight_from_doc(doc: Mapping) -> tuple[KGraph, WeightEstimate]:
    return KGraph.from_json(doc["graph"]), WeightEstimate(doc["mean"], doc["std_error"], doc["samples"], doc["seed"])


# -- polynomial matrices -----------------------------------------------------


def _poly_entry(x, names) -> Poly:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        if isinstance(x, float) and not x.is_integer():
            raise DocumentError("non-integer numbers must be given as text, e.g. \"1/2\"")
        return Poly.const(names, int(x))
    if isinstance(x, str):
        return parse_expression(x, names)
    raise DocumentError(f"cannot read polynomial entry {x!r}")


def matrix_from_doc(doc: Mapping, key: str = "matrix") -> tuple[tuple, list[list[Poly]]]:
    """{"names": [...], key: [[text, ...], ...]} -> (names, matrix)."""
    if key not in doc:
        raise DocumentError(f"missing field {key!r}")
    rows = doc[key]
    n = len(rows)
    names = tuple(doc.get("names") or [f"x{i + 1}" for i in range(n)])
    if any(len(r) != len(names) for r in rows) or n != len(names):
        raise DocumentError(f"{key} must be {len(names)}x{len(names)}")
    return names, [[_poly_entry(x, names) for x in r] for r in rows]


def matrix_doc(kind: str, names: Sequence[str], M, key: str = "matrix") -> dict:
    return document(kind, names=list(names), **{key: [[str(c) for c in r] for r in M]})


def poisson_from_doc(doc: Mapping, check_jacobi: bool = True) -> PoissonStructure:
    names, M = matrix_from_doc(doc)
    return PoissonStructure(names, M, check_jacobi=check_jacobi)


def christoffel_from_doc(doc: Mapping, names: Sequence[str]) -> list:
    """{"christoffel": G} with G[k][i][j] = Gamma^k_{ij}, or a sparse
    {"symbols": [{"k":..,"i":..,"j":.., "value": text}, ...]} list (0-based)."""
    names = tuple(names)
    n = len(names)
    if doc.get("names") and tuple(doc["names"]) != names:
        raise DocumentError("connection names differ from omega names")
    if "christoffel" in doc:
        G = doc["christoffel"]
        if len(G) != n or any(len(m) != n or any(len(r) != n for r in m) for m in G):
            raise DocumentError(f"christoffel must be {n}x{n}x{n}")
        return [[[_poly_entry(x, names) for x in r] for r in m] for m in G]
    G = [[[Poly(names) for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for s in doc.get("symbols", []):
        k, i, j = s["k"], s["i"], s["j"]
        G[k][i][j] = _poly_entry(s["value"], names)
    return G


def spectrum_doc(spec) -> dict:
    levels = [
        {"n": lv.n, "energy": _frac(lv.energy), "certified": lv.certified, "trace": str(lv.trace)}
        for lv in spec.levels
    ]
    return document("spectrum", dof=spec.dof, unit="h", levels=levels)


def _frac(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dump_json(obj: Any) -> str:
    """Fallback used by the CLI for small ad-hoc result tables."""
    return dumps(obj if isinstance(obj, dict) else {"schema": SCHEMA, "value": obj})
