"""Exact arithmetic substrate: Gaussian-rational scalars, sparse multivariate
polynomials and truncated series in the deformation parameter.

Polynomials store their monomials as packed integers (16 bits per variable) so
that monomial multiplication is a single integer addition.  Real and imaginary
parts are kept in separate dictionaries; almost everything in practice is real
and then the imaginary dictionary stays empty.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

SHIFT = 16
MASK = (1 << SHIFT) - 1

__all__ = [
    "Scalar",
    "Poly",
    "LambdaSeries",
    "ParseError",
    "parse_expression",
    "substitute_hbar",
    "pack",
    "unpack",
    "default_names",
]


def pack(exps: Sequence[int]) -> int:
    key = 0
    for i, e in enumerate(exps):
        if e < 0 or e > MASK:
            raise ValueError(f"exponent out of range: {e}")
        key |= e << (SHIFT * i)
    return key


def unpack(key: int, dim: int) -> tuple[int, ...]:
    return tuple((key >> (SHIFT * i)) & MASK for i in range(dim))


def key_degree(key: int) -> int:
    d = 0
    while key:
        d += key & MASK
        key >>= SHIFT
    return d


@lru_cache(maxsize=None)
def falling(n: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= n - j
    return out


def default_names(dim: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(dim))


def _q(x) -> mpq:
    if isinstance(x, int) or type(x) is type(mpq(0)):
        return mpq(x)
    if isinstance(x, Fraction):
        # Fraction(mpq) carries mpz parts, which mpq() rejects
        return mpq(int(x.numerator), int(x.denominator))
    if isinstance(x, str):
        return mpq(Fraction(x))
    raise TypeError(f"cannot convert {x!r} to an exact rational")


class Scalar:
    """Gaussian rational ``re + im*i`` with exact rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _q(re)
        self.im = _q(im)

    @classmethod
    def coerce(cls, x) -> "Scalar":
        if isinstance(x, Scalar):
            return x
        if isinstance(x, complex):
            raise TypeError("floating complex numbers are not exact")
        return cls(x)

    I: "Scalar"

    @property
    def re_num(self) -> int:
        return int(self.re.numerator)

    @property
    def re_den(self) -> int:
        return int(self.re.denominator)

    @property
    def im_num(self) -> int:
        return int(self.im.numerator)

    @property
    def im_den(self) -> int:
        return int(self.im.denominator)

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = Scalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __add__(self, other):
        o = Scalar.coerce(other)
        return Scalar(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.re, -self.im)

    def __sub__(self, other):
        o = Scalar.coerce(other)
        return Scalar(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return Scalar.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Poly):
            return other * self
        o = Scalar.coerce(other)
        return Scalar(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im)

    def inverse(self) -> "Scalar":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of zero scalar")
        return Scalar(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * Scalar.coerce(other).inverse()

    def __rtruediv__(self, other):
        return Scalar.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = Scalar(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __repr__(self):
        return f"Scalar({self})"

    def __str__(self):
        return format_scalar(self.re, self.im)


Scalar.I = Scalar(0, 1)


def _fmt_q(x: mpq) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def format_scalar(re_, im_) -> str:
    if im_ == 0:
        return _fmt_q(re_)
    if im_ == 1:
        ipart = "i"
    elif im_ == -1:
        ipart = "-i"
    else:
        ipart = f"{_fmt_q(im_)}*i"
    if re_ == 0:
        return ipart
    sign = " - " if ipart.startswith("-") else " + "
    return f"({_fmt_q(re_)}{sign}{ipart.lstrip('-')})"


def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if v}


def _add_into(out: dict, src: Mapping, factor=1):
    get = out.get
    if factor == 1:
        for k, v in src.items():
            out[k] = get(k, 0) + v
    else:
        for k, v in src.items():
            out[k] = get(k, 0) + factor * v


def _mul_real(a: Mapping, b: Mapping) -> dict:
    if len(a) < len(b):
        a, b = b, a
    out: dict = {}
    get = out.get
    bi = list(b.items())
    for ka, ca in a.items():
        for kb, cb in bi:
            k = ka + kb
            out[k] = get(k, 0) + ca * cb
    return out


class Poly:
    """Sparse polynomial with Gaussian-rational coefficients.

    ``names`` fixes the variable order; two polynomials combine only if their
    name tuples agree.  A variable called ``h`` plays the role of hbar when a
    caller wants it as a polynomial symbol.
    """

    __slots__ = ("names", "re", "im")

    def __init__(self, names: Sequence[str], re: dict | None = None, im: dict | None = None):
        self.names = tuple(names)
        self.re = re if re is not None else {}
        self.im = im if im is not None else {}

    # -- construction -------------------------------------------------------
    @classmethod
    def zero(cls, names) -> "Poly":
        return cls(names)

    @classmethod
    def const(cls, names, c=1) -> "Poly":
        c = Scalar.coerce(c)
        return cls(names, {0: c.re} if c.re else {}, {0: c.im} if c.im else {})

    @classmethod
    def var(cls, names, i: int | str) -> "Poly":
        names = tuple(names)
        if isinstance(i, str):
            i = names.index(i)
        if not 0 <= i < len(names):
            raise IndexError(f"variable index {i} out of range for {len(names)} variables")
        return cls(names, {1 << (SHIFT * i): mpq(1)})

    @classmethod
    def monomial(cls, names, exps: Sequence[int], c=1) -> "Poly":
        names = tuple(names)
        if len(exps) != len(names):
            raise ValueError("exponent vector length does not match variable count")
        c = Scalar.coerce(c)
        k = pack(exps)
        return cls(names, {k: c.re} if c.re else {}, {k: c.im} if c.im else {})

    @classmethod
    def from_terms(cls, names, terms: Mapping[Sequence[int], object]) -> "Poly":
        out = cls(tuple(names))
        for exps, c in terms.items():
            out = out + cls.monomial(names, exps, c)
        return out

    # -- inspection ---------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.names)

    def keys(self) -> set[int]:
        return set(self.re) | set(self.im)

    def terms(self) -> dict[tuple[int, ...], Scalar]:
        d = self.dim
        return {unpack(k, d): self.coeff_key(k) for k in sorted(self.keys())}

    def coeff_key(self, key: int) -> Scalar:
        return Scalar(self.re.get(key, 0), self.im.get(key, 0))

    def coeff(self, exps: Sequence[int]) -> Scalar:
        return self.coeff_key(pack(exps))

    def constant_term(self) -> Scalar:
        return self.coeff_key(0)

    def is_zero(self) -> bool:
        return not self.re and not self.im

    def is_real(self) -> bool:
        return not self.im

    def is_constant(self) -> bool:
        return all(k == 0 for k in self.re) and all(k == 0 for k in self.im)

    def degree(self) -> int:
        ks = self.keys()
        return max((key_degree(k) for k in ks), default=-1)

    def degree_in(self, i: int) -> int:
        s = SHIFT * i
        return max(((k >> s) & MASK for k in self.keys()), default=-1)

    def __len__(self):
        return len(self.keys())

    def __bool__(self):
        return not self.is_zero()

    def _check(self, other: "Poly"):
        if other.names != self.names:
            raise ValueError(f"dimension mismatch: {self.names} vs {other.names}")

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        return Poly.const(self.names, other)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        o = self._lift(other)
        re_ = dict(self.re)
        _add_into(re_, o.re)
        im_ = dict(self.im)
        if o.im:
            _add_into(im_, o.im)
        return Poly(self.names, _clean(re_), _clean(im_) if im_ else im_)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.names, {k: -v for k, v in self.re.items()}, {k: -v for k, v in self.im.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c) -> "Poly":
        c = Scalar.coerce(c)
        if not c:
            return Poly(self.names)
        if c.im == 0:
            r = c.re
            if r == 1:
                return self
            return Poly(self.names, {k: r * v for k, v in self.re.items()}, {k: r * v for k, v in self.im.items()})
        re_ = {k: c.re * v for k, v in self.re.items()}
        _add_into(re_, self.im, -c.im)
        im_ = {k: c.im * v for k, v in self.re.items()}
        _add_into(im_, self.im, c.re)
        return Poly(self.names, _clean(re_), _clean(im_))

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        if not self.im and not other.im:
            return Poly(self.names, _clean(_mul_real(self.re, other.re)))
        rr = _mul_real(self.re, other.re)
        ii = _mul_real(self.im, other.im)
        _add_into(rr, ii, -1)
        ri = _mul_real(self.re, other.im)
        _add_into(ri, _mul_real(self.im, other.re))
        return Poly(self.names, _clean(rr), _clean(ri))

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, other):
        return self.scale(Scalar.coerce(other).inverse())

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power of a polynomial")
        out = Poly.const(self.names, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.names == other.names and self.re == other.re and self.im == other.im
        try:
            return self == Poly.const(self.names, other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.names, frozenset(self.re.items()), frozenset(self.im.items())))

    def conjugate(self) -> "Poly":
        return Poly(self.names, dict(self.re), {k: -v for k, v in self.im.items()})

    # -- calculus -----------------------------------------------------------
    def diff(self, var: int, order: int = 1) -> "Poly":
        """Iterated partial derivative in variable ``var`` (0-based)."""
        if not 0 <= var < self.dim:
            raise IndexError(f"variable index {var} out of range")
        if order == 0:
            return self
        s = SHIFT * var
        step = order << s

        def d(src):
            out = {}
            for k, v in src.items():
                e = (k >> s) & MASK
                if e >= order:
                    out[k - step] = v * falling(e, order)
            return out

        return Poly(self.names, d(self.re), d(self.im) if self.im else {})

    def diff_key(self, mkey: int) -> "Poly":
        """Apply the mixed derivative whose multi-index is packed in ``mkey``."""
        if mkey == 0:
            return self
        orders = unpack(mkey, self.dim)

        def d(src):
            out = {}
            for k, v in src.items():
                c = v
                for i, o in enumerate(orders):
                    if o:
                        e = (k >> (SHIFT * i)) & MASK
                        if e < o:
                            c = 0
                            break
                        c = c * falling(e, o)
                if c:
                    out[k - mkey] = c
            return out

        return Poly(self.names, d(self.re), d(self.im) if self.im else {})

    def partial(self, orders: Sequence[int]) -> "Poly":
        return self.diff_key(pack(orders))

    def evaluate(self, point: Mapping[int, object]) -> "Poly":
        """Substitute scalars for some variables (by index); others remain."""
        out = Poly(self.names)
        for exps, c in self.terms().items():
            term = Poly.const(self.names, c)
            rest = list(exps)
            for i, val in point.items():
                term = term.scale(Scalar.coerce(val) ** exps[i])
                rest[i] = 0
            out = out + term * Poly.monomial(self.names, rest)
        return out

    def substitute(self, images: Sequence["Poly"]) -> "Poly":
        """Compose with a polynomial map: variable j is replaced by images[j]."""
        if len(images) != self.dim:
            raise ValueError("need one image per variable")
        target = images[0].names if images else self.names
        out = Poly(target)
        for exps, c in self.terms().items():
            term = Poly.const(target, c)
            for j, e in enumerate(exps):
                if e:
                    term = term * images[j] ** e
            out = out + term
        return out

    def rename(self, names: Sequence[str]) -> "Poly":
        if len(names) != self.dim:
            raise ValueError("rename must keep the variable count")
        return Poly(tuple(names), dict(self.re), dict(self.im))

    def embed(self, names: Sequence[str], positions: Sequence[int]) -> "Poly":
        """Re-express in a larger ring; variable j goes to ``positions[j]``."""
        names = tuple(names)

        def remap(src):
            out = {}
            for k, v in src.items():
                nk = 0
                for j, e in enumerate(unpack(k, self.dim)):
                    nk |= e << (SHIFT * positions[j])
                out[nk] = v
            return out

        return Poly(names, remap(self.re), remap(self.im))

    # -- printing -----------------------------------------------------------
    def _sorted_keys(self):
        d = self.dim
        return sorted(self.keys(), key=lambda k: (-key_degree(k), tuple(-e for e in unpack(k, d))))

    def monomial_str(self, key: int) -> str:
        parts = []
        for name, e in zip(self.names, unpack(key, self.dim)):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "*".join(parts)

    def __str__(self):
        if self.is_zero():
            return "0"
        out = []
        for k in self._sorted_keys():
            c = self.coeff_key(k)
            mono = self.monomial_str(k)
            cs = str(c)
            if not mono:
                t = cs
            elif cs == "1":
                t = mono
            elif cs == "-1":
                t = "-" + mono
            else:
                t = f"{cs}*{mono}"
            out.append(t)
        s = out[0]
        for t in out[1:]:
            s += " - " + t[1:] if t.startswith("-") else " + " + t
        return s

    def __repr__(self):
        return f"Poly({self})"


# ---------------------------------------------------------------------------
# expression parsing


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def _tokenize(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            toks.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            toks.append(("name", m.group(2), start))
        else:
            if m.group(3) not in "+-*/^()":
                raise ParseError(f"unexpected character {m.group(3)!r}", start)
            toks.append(("op", m.group(3), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


def _infer_names(text: str) -> tuple[str, ...]:
    idx = [int(m) for m in re.findall(r"\bx(\d+)\b", text)]
    names = list(default_names(max(idx, default=0)))
    if re.search(r"\bh\b", text):
        names.append("h")
    return tuple(names)


def parse_expression(text: str, names: Sequence[str] | None = None) -> Poly:
    """Parse the polynomial text grammar into a :class:`Poly`.

    Names ``x1..xd`` always refer to the first d variables of ``names``;
    ``i`` is the imaginary unit.  Division is only allowed by nonzero
    constants, which covers rationals written as ``a/b``.
    """
    names = tuple(names) if names is not None else _infer_names(text)
    toks = _tokenize(text)
    p = 0

    def peek():
        return toks[p]

    def take():
        nonlocal p
        t = toks[p]
        p += 1
        return t

    def expr():
        left = term()
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            right = term()
            left = left + right if op == "+" else left - right
        return left

    def term():
        left = unary()
        while peek()[0] == "op" and peek()[1] in "*/":
            op, _, pos = take()[1], None, toks[p - 1][2]
            right = unary()
            if op == "*":
                left = left * right
            else:
                if not right.is_constant() or right.is_zero():
                    raise ParseError("division by a non-constant or zero", pos)
                left = left / right.constant_term()
        return left

    def unary():
        if peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            v = unary()
            return -v if op == "-" else v
        return power()

    def power():
        base = atom()
        if peek()[0] == "op" and peek()[1] == "^":
            take()
            neg = False
            if peek()[0] == "op" and peek()[1] == "-":
                take()
                neg = True
            kind, val, pos = take()
            if kind != "num":
                raise ParseError("expected integer exponent", pos)
            if neg:
                raise ParseError("negative exponent", pos)
            return base ** int(val)
        return base

    def atom():
        kind, val, pos = take()
        if kind == "num":
            return Poly.const(names, int(val))
        if kind == "name":
            if val == "i":
                return Poly.const(names, Scalar.I)
            if val in names:
                return Poly.var(names, names.index(val))
            m = re.fullmatch(r"x(\d+)", val)
            if m and 1 <= int(m.group(1)) <= len(names):
                return Poly.var(names, int(m.group(1)) - 1)
            raise ParseError(f"unknown symbol {val!r}", pos)
        if kind == "op" and val == "(":
            v = expr()
            k2, v2, pos2 = take()
            if (k2, v2) != ("op", ")"):
                raise ParseError("expected ')'", pos2)
            return v
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)

    out = expr()
    kind, val, pos = peek()
    if kind != "end":
        raise ParseError(f"unexpected token {val!r}", pos)
    return out


# ---------------------------------------------------------------------------
# truncated series in the deformation parameter


class LambdaSeries:
    """Truncated series ``sum_k c_k L^k`` with an optional finite negative part.

    ``coeffs[k]`` is the coefficient of ``L^k`` for ``0 <= k <= trunc_order``
    and ``neg[k-1]`` the coefficient of ``L^-k``.  Everything beyond
    ``trunc_order`` is unknown, not zero.
    """

    __slots__ = ("names", "trunc_order", "coeffs", "neg", "var")

    def __init__(self, names, trunc_order: int, coeffs=None, neg=None, var: str = "L"):
        if trunc_order < 0:
            raise ValueError("truncation order must be non-negative")
        self.names = tuple(names)
        self.trunc_order = trunc_order
        coeffs = list(coeffs or [])
        if len(coeffs) > trunc_order + 1:
            coeffs = coeffs[: trunc_order + 1]
        coeffs += [Poly(self.names)] * (trunc_order + 1 - len(coeffs))
        self.coeffs = coeffs
        neg = list(neg or [])
        while neg and neg[-1].is_zero():
            neg.pop()
        self.neg = neg
        self.var = var

    @classmethod
    def from_poly(cls, p: Poly, trunc_order: int, var="L") -> "LambdaSeries":
        return cls(p.names, trunc_order, [p], var=var)

    @classmethod
    def from_dict(cls, names, trunc_order: int, d: Mapping[int, Poly], var="L") -> "LambdaSeries":
        lo = min((k for k, v in d.items() if not v.is_zero()), default=0)
        neg = [d.get(-k, Poly(names)) for k in range(1, -lo + 1)] if lo < 0 else []
        coeffs = [d.get(k, Poly(names)) for k in range(trunc_order + 1)]
        return cls(names, trunc_order, coeffs, neg, var=var)

    def coeff(self, k: int) -> Poly:
        if k < 0:
            return self.neg[-k - 1] if -k <= len(self.neg) else Poly(self.names)
        if k > self.trunc_order:
            raise IndexError(f"coefficient L^{k} is beyond the truncation order {self.trunc_order}")
        return self.coeffs[k]

    def items(self):
        """Nonzero (power, coefficient) pairs in ascending power."""
        for k in range(len(self.neg), 0, -1):
            if not self.neg[k - 1].is_zero():
                yield -k, self.neg[k - 1]
        for k, c in enumerate(self.coeffs):
            if not c.is_zero():
                yield k, c

    def as_dict(self) -> dict[int, Poly]:
        return dict(self.items())

    def lowest_power(self) -> int:
        return next((k for k, _ in self.items()), 0)

    def is_zero(self) -> bool:
        return next(self.items(), None) is None

    def _check(self, other: "LambdaSeries"):
        if other.names != self.names:
            raise ValueError("series over different polynomial rings")
        if other.var != self.var:
            raise ValueError(f"series in different parameters: {self.var} vs {other.var}")

    def _lift(self, other) -> "LambdaSeries":
        if isinstance(other, LambdaSeries):
            self._check(other)
            return other
        if isinstance(other, Poly):
            return LambdaSeries.from_poly(other, self.trunc_order, self.var)
        return LambdaSeries.from_poly(Poly.const(self.names, other), self.trunc_order, self.var)

    def __add__(self, other):
        o = self._lift(other)
        n = min(self.trunc_order, o.trunc_order)
        d = {}
        for s in (self, o):
            for k, c in s.items():
                if k <= n:
                    d[k] = d[k] + c if k in d else c
        return LambdaSeries.from_dict(self.names, n, d, self.var)

    __radd__ = __add__

    def __neg__(self):
        return LambdaSeries(self.names, self.trunc_order, [-c for c in self.coeffs], [-c for c in self.neg], self.var)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c) -> "LambdaSeries":
        return LambdaSeries(self.names, self.trunc_order, [x.scale(c) for x in self.coeffs],
                            [x.scale(c) for x in self.neg], self.var)

    def __mul__(self, other):
        if not isinstance(other, LambdaSeries):
            if isinstance(other, Poly):
                return LambdaSeries(self.names, self.trunc_order, [x * other for x in self.coeffs],
                                    [x * other for x in self.neg], self.var)
            return self.scale(other)
        self._check(other)
        # negative powers in one factor pull unknown high-order terms of the other down
        lo_s = min(self.lowest_power(), 0)
        lo_o = min(other.lowest_power(), 0)
        n = min(self.trunc_order + lo_o, other.trunc_order + lo_s)
        if n < 0:
            raise ValueError("product has no reliable coefficients: negative powers exceed truncation")
        d: dict[int, Poly] = {}
        b_items = list(other.items())
        for ka, ca in self.items():
            for kb, cb in b_items:
                k = ka + kb
                if k > n:
                    continue
                t = ca * cb
                d[k] = d[k] + t if k in d else t
        return LambdaSeries.from_dict(self.names, n, d, self.var)

    def __rmul__(self, other):
        return self * other

    def shift(self, k: int) -> "LambdaSeries":
        """Multiply by ``var^k``; the truncation order moves with it."""
        d = {p + k: c for p, c in self.items()}
        n = self.trunc_order + k
        if n < 0:
            raise ValueError("shift leaves no reliable coefficients")
        return LambdaSeries.from_dict(self.names, n, d, self.var)

    def truncate(self, m: int) -> "LambdaSeries":
        if m > self.trunc_order:
            raise ValueError(f"cannot extend truncation order {self.trunc_order} to {m}")
        return LambdaSeries(self.names, m, self.coeffs[: m + 1], self.neg, self.var)

    def map(self, fn) -> "LambdaSeries":
        return LambdaSeries(self.names, self.trunc_order, [fn(c) for c in self.coeffs],
                            [fn(c) for c in self.neg], self.var)

    def __eq__(self, other):
        if not isinstance(other, LambdaSeries):
            return NotImplemented
        return (self.names == other.names and self.var == other.var
                and self.trunc_order == other.trunc_order and self.as_dict() == other.as_dict())

    def agrees_with(self, other: "LambdaSeries", upto: int | None = None) -> bool:
        """Equality of all coefficients known to both series (up to ``upto``)."""
        self._check(other)
        n = min(self.trunc_order, other.trunc_order)
        if upto is not None:
            n = min(n, upto)
        lo = min(self.lowest_power(), other.lowest_power(), 0)
        return all(self.coeff(k) == other.coeff(k) for k in range(lo, n + 1))

    def __str__(self):
        parts = []
        for k, c in self.items():
            if k == 0:
                parts.append(str(c))
            else:
                pw = self.var if k == 1 else f"{self.var}^{k}"
                parts.append(f"({c})*{pw}")
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"LambdaSeries[{self.var}, N={self.trunc_order}]({self})"


def substitute_hbar(s: LambdaSeries, allow_negative: bool = False) -> LambdaSeries:
    """Rewrite a series in ``L`` as a series in hbar using ``L = (i/2) hbar``."""
    if s.var != "L":
        raise ValueError("series is not in the deformation parameter L")
    if s.neg and not allow_negative:
        raise ValueError("negative powers of L present; pass allow_negative=True to invert hbar")
    half_i = Scalar(0, Fraction(1, 2))
    d = {k: c.scale(half_i ** k) for k, c in s.items()}
    return LambdaSeries.from_dict(s.names, s.trunc_order, d, var="h")
