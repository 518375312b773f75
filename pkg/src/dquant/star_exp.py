"""Star exponentials of quadratic Hamiltonians and spectral data.

Time series are written in X = H/(i hbar): the t^n coefficient of the
closed form is a polynomial in X whose coefficients only depend on the
frequency square  d = alpha*gamma - beta^2/4  of H = alpha p^2 + beta pq + gamma q^2.
Both sides are turned into series in hbar with polynomial coefficients in (q, p)
so that the comparison is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Sequence

from .algebra_core import LambdaSeries, Poly, Scalar, substitute_hbar
from .moyal import FlatSymplectic, p_power


# ---------------------------------------------------------------------------
# Q(sqrt D) arithmetic for irrational frequencies


@dataclass(frozen=True)
class QuadExt:
    """a + b*delta with delta^2 = D (D a positive rational)."""

    a: Fraction
    b: Fraction
    D: Fraction

    @classmethod
    def rational(cls, x, D) -> "QuadExt":
        return cls(Fraction(x), Fraction(0), Fraction(D))

    @classmethod
    def root(cls, D) -> "QuadExt":
        return cls(Fraction(0), Fraction(1), Fraction(D))

    def __add__(self, o):
        o = self._lift(o)
        return QuadExt(self.a + o.a, self.b + o.b, self.D)

    __radd__ = __add__

    def __neg__(self):
        return QuadExt(-self.a, -self.b, self.D)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __mul__(self, o):
        o = self._lift(o)
        return QuadExt(self.a * o.a + self.b * o.b * self.D, self.a * o.b + self.b * o.a, self.D)

    __rmul__ = __mul__

    def inverse(self) -> "QuadExt":
        n = self.a * self.a - self.b * self.b * self.D
        if n == 0:
            raise ZeroDivisionError("non-invertible element of the quadratic extension")
        return QuadExt(self.a / n, -self.b / n, self.D)

    def __truediv__(self, o):
        return self * self._lift(o).inverse()

    def _lift(self, o) -> "QuadExt":
        if isinstance(o, QuadExt):
            if o.D != self.D:
                raise ValueError("different quadratic extensions")
            return o
        return QuadExt(Fraction(o), Fraction(0), self.D)

    def is_rational(self) -> bool:
        return self.b == 0

    def __bool__(self):
        return bool(self.a) or bool(self.b)


def _series_inv(c: list, n: int) -> list:
    """1/c as a power series through t^n; c[0] must be invertible."""
    out = [c[0].inverse()]
    for k in range(1, n + 1):
        s = out[0] * 0
        for j in range(1, k + 1):
            if j < len(c):
                s = s + c[j] * out[k - j]
        out.append(-(s * out[0]))
    return out


def _series_mul(a: list, b: list, n: int) -> list:
    zero = a[0] * 0
    out = [zero] * (n + 1)
    for i, x in enumerate(a[: n + 1]):
        if not x:
            continue
        for j, y in enumerate(b[: n + 1 - i]):
            out[i + j] = out[i + j] + x * y
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadHamiltonian:
    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    dof: int = 1

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "beta", Fraction(self.beta))
        object.__setattr__(self, "gamma", Fraction(self.gamma))

    @property
    def fs(self) -> FlatSymplectic:
        return FlatSymplectic(self.dof)

    @property
    def d(self) -> Fraction:
        """Square of the frequency parameter: alpha*gamma - beta^2/4."""
        return self.alpha * self.gamma - self.beta * self.beta / 4

    @property
    def delta(self) -> Fraction | None:
        """|d|^{1/2} when rational, else None."""
        a = abs(self.d)
        n, m = _isqrt_exact(a.numerator), _isqrt_exact(a.denominator)
        if n is None or m is None:
            return None
        return Fraction(n, m)

    def poly(self) -> Poly:
        fs = self.fs
        H = Poly(fs.names)
        for k in range(self.dof):
            q, p = fs.q(k), fs.p(k)
            H = H + (p * p).scale(self.alpha) + (p * q).scale(self.beta) + (q * q).scale(self.gamma)
        return H

    @property
    def is_harmonic(self) -> bool:
        return self.alpha == self.gamma and self.beta == 0 and self.alpha == Fraction(1, 2)


def _isqrt_exact(n: int):
    from math import isqrt

    r = isqrt(n)
    return r if r * r == n else None


@dataclass
class TimeSeries:
    """sum_n t^n c_n with c_n series in hbar (coefficients polynomial in q, p)."""

    t_order: int
    coeffs: list

    def __post_init__(self):
        if len(self.coeffs) != self.t_order + 1:
            raise ValueError("coefficient count must be t_order + 1")

    def __str__(self):
        return "\n".join(f"t^{n}: {c}" for n, c in enumerate(self.coeffs))


@dataclass(frozen=True)
class MatchResult:
    ok: bool
    first_mismatch: int | None = None


def moyal_star_series(fs: FlatSymplectic, a: LambdaSeries, b: LambdaSeries, order: int) -> LambdaSeries:
    n = min(order, a.trunc_order, b.trunc_order)
    out = [Poly(fs.names) for _ in range(n + 1)]
    for i, ai in a.items():
        for j, bj in b.items():
            for r in range(n - i - j + 1):
                t = p_power(fs, r, ai, bj)
                if not t.is_zero():
                    out[i + j + r] = out[i + j + r] + t.scale(Fraction(1, factorial(r)))
    return LambdaSeries(fs.names, n, out)


def star_power(fs: FlatSymplectic, H: Poly, n: int, order: int) -> LambdaSeries:
    """(H*)^n through L^order."""
    out = LambdaSeries.from_poly(Poly.const(fs.names, 1), order)
    hs = LambdaSeries.from_poly(H, order)
    for _ in range(n):
        out = moyal_star_series(fs, hs, out, order)
    return out


def _inv_ihbar_power(s: LambdaSeries, n: int) -> LambdaSeries:
    """Multiply an hbar-series by (i hbar)^{-n} = (-i)^n hbar^{-n}."""
    return s.shift(-n).scale(Scalar(0, -1) ** n)


def star_exponential(fs: FlatSymplectic, H: Poly, t_order: int, order: int | None = None) -> TimeSeries:
    """Coefficients (1/n!)(i hbar)^{-n} (H*)^n for n <= t_order."""
    order = t_order + 2 if order is None else order
    if order < t_order:
        raise ValueError("L-order must be at least the t-order for an exact expansion")
    coeffs = []
    power = LambdaSeries.from_poly(Poly.const(fs.names, 1), order)
    hs = LambdaSeries.from_poly(H, order)
    for n in range(t_order + 1):
        if n:
            power = moyal_star_series(fs, hs, power, order)
        h = substitute_hbar(power)
        coeffs.append(_inv_ihbar_power(h, n).scale(Fraction(1, factorial(n))))
    return TimeSeries(t_order, coeffs)


def _closed_form_xcoeffs(d: Fraction, dof: int, M: int) -> list[dict]:
    """Taylor coefficients of the closed form as {k: rational} polynomials in X."""
    d = Fraction(d)
    if d == 0:
        return [{n: Fraction(1, factorial(n))} for n in range(M + 1)]
    D = abs(d)
    delta = QuadExt.root(D)
    one = QuadExt.rational(1, D)
    zero = QuadExt.rational(0, D)
    # cos/sin for d > 0, cosh/sinh for d < 0
    cosine = [zero] * (M + 2)
    sine = [zero] * (M + 2)
    dpow = one
    for k in range(M + 2):
        if k:
            dpow = dpow * delta
        c = dpow * Fraction(1, factorial(k))
        if k % 2 == 0:
            sgn = (-1) ** (k // 2) if d > 0 else 1
            cosine[k] = c * sgn
        else:
            sgn = (-1) ** (k // 2) if d > 0 else 1
            sine[k] = c * sgn
    inv_cos = _series_inv(cosine, M)
    tan = _series_mul(sine, inv_cos, M)
    Y = [x / delta for x in tan]  # tan(delta t)/delta = t + ...
    pref = one
    sec = [one] + [zero] * M
    for _ in range(dof):
        sec = _series_mul(sec, inv_cos, M)
    # exp(X Y) = sum_k X^k Y^k / k!
    out = [dict() for _ in range(M + 1)]
    Yk = [one] + [zero] * M
    for k in range(M + 1):
        if k:
            Yk = _series_mul(Yk, Y, M)
        term = _series_mul(sec, Yk, M)
        for n in range(M + 1):
            c = term[n] * Fraction(1, factorial(k))
            if c:
                if not c.is_rational():
                    raise ArithmeticError("irrational part survived in the closed form expansion")
                out[n][k] = out[n].get(k, Fraction(0)) + c.a
    return out


def quadratic_closed_form(Hq: QuadHamiltonian, t_order: int, d: Fraction | None = None, order: int | None = None) -> TimeSeries:
    """Taylor expansion of (cos dt)^{-l} exp(X tan(dt)/d) (or its d = 0, d < 0 forms).

    ``d`` may be overridden to test alternative frequency conventions.
    """
    d = Hq.d if d is None else Fraction(d)
    fs = Hq.fs
    H = Hq.poly()
    order = t_order + 2 if order is None else order
    xc = _closed_form_xcoeffs(d, Hq.dof, t_order)
    Hpows = [Poly.const(fs.names, 1)]
    for k in range(1, t_order + 1):
        Hpows.append(Hpows[-1] * H)
    coeffs = []
    for n, poly_x in enumerate(xc):
        # X^k = (-i)^k H^k hbar^{-k}
        table = {}
        for k, c in poly_x.items():
            table[-k] = Hpows[k].scale(Scalar(0, -1) ** k * c)
        coeffs.append(LambdaSeries.from_dict(fs.names, order - n, table, var="h"))
    return TimeSeries(t_order, coeffs)


def exp_matches_closed_form(Hq: QuadHamiltonian, t_order: int, d: Fraction | None = None) -> MatchResult:
    fs = Hq.fs
    lhs = star_exponential(fs, Hq.poly(), t_order)
    rhs = quadratic_closed_form(Hq, t_order, d=d)
    for n in range(t_order + 1):
        if not lhs.coeffs[n].agrees_with(rhs.coeffs[n]):
            return MatchResult(False, n)
    return MatchResult(True)


# ---------------------------------------------------------------------------
# radial functions of the harmonic oscillator


@dataclass(frozen=True)
class RadialFunction:
    """hbar^hpow * exp(s x) * g(x) with x = H/hbar and g = sum g[k] x^k."""

    s: Fraction
    g: tuple
    hpow: int = 0

    def __post_init__(self):
        g = [Scalar.coerce(c) for c in self.g]
        while g and not g[-1]:
            g.pop()
        object.__setattr__(self, "g", tuple(g))
        object.__setattr__(self, "s", Fraction(self.s))

    def is_zero(self) -> bool:
        return not self.g

    def scale(self, c) -> "RadialFunction":
        return RadialFunction(self.s, tuple(x * c for x in self.g), self.hpow)

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        if other.s != self.s or other.hpow != self.hpow:
            raise ValueError("radial functions of different classes")
        n = max(len(self.g), len(other.g))
        a = list(self.g) + [Scalar(0)] * (n - len(self.g))
        b = list(other.g) + [Scalar(0)] * (n - len(other.g))
        return RadialFunction(self.s, tuple(x + y for x, y in zip(a, b)), self.hpow)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __eq__(self, other):
        if not isinstance(other, RadialFunction):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        return (self.s, self.g, self.hpow) == (other.s, other.g, other.hpow)

    def __str__(self):
        terms = [f"({c})*x^{k}" for k, c in enumerate(self.g) if c]
        body = " + ".join(terms) if terms else "0"
        return f"h^{self.hpow}*exp({self.s}*x)*[{body}]"

    def laplace_moment(self, weight_power: int = 0) -> Scalar:
        """int_0^inf x^w exp(s x) g(x) dx for s < 0."""
        if self.s >= 0:
            raise ValueError("integral diverges unless s < 0")
        m = -self.s
        out = Scalar(0)
        for k, c in enumerate(self.g):
            n = k + weight_power
            out = out + c * Fraction(factorial(n), 1) / m ** (n + 1)
        return out

    def square(self) -> "RadialFunction":
        g = [Scalar(0)] * (2 * len(self.g) - 1) if self.g else []
        for i, a in enumerate(self.g):
            for j, b in enumerate(self.g):
                g[i + j] = g[i + j] + a * b
        return RadialFunction(2 * self.s, tuple(g), 2 * self.hpow)


def _poly_diff(g: Sequence[Scalar]) -> list:
    return [g[k] * k for k in range(1, len(g))]


def _add(*vs):
    n = max((len(v) for v in vs), default=0)
    out = [Scalar(0)] * n
    for v in vs:
        for k, c in enumerate(v):
            out[k] = out[k] + c
    return out


def _shift_up(g):
    return [Scalar(0)] + list(g)


def radial_star_H(f: RadialFunction, dof: int = 1) -> RadialFunction:
    """H * f(H) for harmonic H, via H*f = Hf - (hbar^2/4)(H f'' + l f').

    In x = H/hbar with F = exp(s x) g this is hbar * exp(s x) * [x G - (x G2 + l G1)/4]
    where G1, G2 are the polynomial parts of F' and F''.
    """
    s = f.s
    g = list(f.g)
    g1 = _poly_diff(g)
    g2 = _poly_diff(g1)
    G1 = _add([c * s for c in g], g1)  # F' = e^{sx}(s g + g')
    G2 = _add([c * (s * s) for c in g], [c * (2 * s) for c in g1], g2)
    body = _add(_shift_up(g), [c * Fraction(-1, 4) for c in _shift_up(G2)], [c * Fraction(-dof, 4) for c in G1])
    return RadialFunction(s, tuple(body), f.hpow + 1)


def star_eigen_defect(Hq: QuadHamiltonian, f: RadialFunction, E: Scalar | Fraction) -> RadialFunction:
    """H * f - E hbar f for harmonic H (E given in units of hbar)."""
    if not Hq.is_harmonic:
        raise ValueError("radial reduction is implemented for the harmonic Hamiltonian (p^2+q^2)/2")
    hf = radial_star_H(f, Hq.dof)
    ef = RadialFunction(f.s, tuple(c * Scalar.coerce(E) for c in f.g), f.hpow + 1)
    return hf - ef


def radial_to_poly(f: RadialFunction, Hq: QuadHamiltonian, order: int) -> LambdaSeries:
    """For s = 0 only: the hbar-series of f as polynomials in (q, p)."""
    if f.s != 0:
        raise ValueError("only polynomial radial functions have a finite hbar expansion")
    fs = Hq.fs
    H = Hq.poly()
    table: dict = {}
    for k, c in enumerate(f.g):
        key = f.hpow - k
        table[key] = table.get(key, Poly(fs.names)) + (H ** k).scale(c)
    return LambdaSeries.from_dict(fs.names, order, table, var="h")


def laguerre(n: int, a: int = 0) -> list[Fraction]:
    """Generalized Laguerre L_n^{(a)}(y) coefficients in y."""
    return [Fraction((-1) ** k * comb(n + a, n - k), factorial(k)) for k in range(n + 1)]


@dataclass
class Level:
    n: int
    energy: Fraction  # in units of hbar
    projector: RadialFunction
    certified: bool
    trace: Scalar
    laguerre_ratio: Scalar | None


@dataclass
class SpectralData:
    dof: int
    levels: list = field(default_factory=list)

    @property
    def eigenvalues(self) -> list[Fraction]:
        return [lv.energy for lv in self.levels]

    def __str__(self):
        return ", ".join(f"{_fmt_frac(e)}*h" for e in self.eigenvalues)


def _fmt_frac(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _radial_matrix(s: Fraction, dof: int, k: int):
    """Image of exp(s x) x^k under f -> (H*f)/hbar: returns coefficient list."""
    img = radial_star_H(RadialFunction(s, tuple([0] * k + [1])), dof)
    return list(img.g) + [Scalar(0)] * (k + 2 - len(img.g))


def harmonic_spectrum(dof: int, n_max: int) -> SpectralData:
    """Eigenvalues of (p^2+q^2)/2 from terminating exp(-2x) * polynomial solutions.

    The radial operator maps exp(-2x) x^k to A_k x^k + B_k x^{k-1}; a
    degree-n eigenfunction forces E = A_n and is then solved by back
    substitution.  Projectors are normalized by Pi*Pi = c*Pi together with
    the trace identity, c = int Pi^2 / int Pi.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    Hq = QuadHamiltonian(Fraction(1, 2), 0, Fraction(1, 2), dof)
    s = Fraction(-2)
    data = SpectralData(dof)
    for n in range(n_max + 1):
        rows = [_radial_matrix(s, dof, k) for k in range(n + 1)]
        if any(rows[k][k + 1] for k in range(n + 1)):
            raise ArithmeticError("radial operator is not triangular on the exp(-2x) class")
        E = rows[n][n]
        c = [Scalar(0)] * (n + 1)
        c[n] = Scalar(1)
        for k in range(n - 1, -1, -1):
            piv = rows[k][k] - E
            if not piv:
                raise ArithmeticError("degenerate radial recursion")
            c[k] = (rows[k + 1][k] * c[k + 1] * -1) / piv
        f = RadialFunction(s, tuple(c))
        certified = star_eigen_defect(Hq, f, E).is_zero()
        # normalization on R^{2l}: trace density (2 pi hbar)^{-l} d^{2l}x -> x^{l-1}/(l-1)! dx
        w = dof - 1
        i1 = f.laplace_moment(w)
        i2 = f.square().laplace_moment(w)
        kappa = i1 / i2
        proj = f.scale(kappa)
        trace = proj.laplace_moment(w) * Fraction(1, factorial(w))
        lag = laguerre(n, dof - 1)
        ratio = None
        scaled = [Scalar(lag[k]) * Fraction(4) ** k for k in range(n + 1)]
        r0 = proj.g[0] / scaled[0] if scaled[0] else None
        if r0 is not None and all(proj.g[k] == scaled[k] * r0 for k in range(n + 1)):
            ratio = r0
        data.levels.append(Level(n, Fraction(int(E.re.numerator), int(E.re.denominator)), proj, certified, trace, ratio))
    return data


def spectrum_formula(dof: int, n_max: int) -> list[Fraction]:
    return [Fraction(n) + Fraction(dof, 2) for n in range(n_max + 1)]


def angular_casimir(dof: int, order: int = 4) -> LambdaSeries:
    """sum_{j<k} L_jk * L_jk with L_jk = q_j p_k - q_k p_j, in hbar form."""
    fs = FlatSymplectic(dof)
    from .moyal import moyal_star

    acc = LambdaSeries(fs.names, order)
    for j in range(dof):
        for k in range(j + 1, dof):
            L = fs.q(j) * fs.p(k) - fs.q(k) * fs.p(j)
            acc = acc + moyal_star(fs, L, L, order)
    return substitute_hbar(acc)


def angular_casimir_expected(dof: int, order: int = 4) -> LambdaSeries:
    fs = FlatSymplectic(dof)
    q2 = sum((fs.q(k) * fs.q(k) for k in range(dof)), Poly(fs.names))
    p2 = sum((fs.p(k) * fs.p(k) for k in range(dof)), Poly(fs.names))
    pq = sum((fs.p(k) * fs.q(k) for k in range(dof)), Poly(fs.names))
    classical = q2 * p2 - pq * pq
    corr = Poly.const(fs.names, Fraction(-dof * (dof - 1), 4))
    return LambdaSeries.from_dict(fs.names, order, {0: classical, 2: corr}, var="h")
