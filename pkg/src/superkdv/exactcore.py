"""Exact rational arithmetic and the graded truncated-series ring.

Every symbolic computation in this package happens over `Fraction`
(arbitrary precision, always in lowest terms).  The central object is
`GradedSeries`: a sparse truncated series in the variables

    hbar (tracked by its integer power h),
    s**2 (tracked by its integer power a, possibly negative),
    t_0, t_1, ..., t_K (tracked by a sorted exponent monomial),

supporting ring arithmetic, exp/log, differentiation in t_k and
substitution t_k -> series.  `FormalPolynomial` is a small sparse
polynomial ring over Fraction in a user-chosen alphabet of symbols
(kappa classes, pi^2, translation parameters); it deliberately stays
tiny -- no general computer algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb


class ExactCoreError(ValueError):
    """Raised for domain violations in the exact-arithmetic layer."""


Rational = Fraction

TMono = tuple[tuple[int, int], ...]  # sorted ((index, exponent), ...)
Key = tuple[int, int, TMono]  # (h, a, t-monomial)


# ---------------------------------------------------------------------------
# combinatorial constants


def double_factorial(n: int) -> int:
    """n!! = n(n-2)(n-4)...; (-1)!! = 0!! = 1."""
    if n < -1:
        raise ExactCoreError(f"double_factorial undefined for n={n}")
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@lru_cache(maxsize=None)
def _bernoulli_upto(n: int) -> tuple[Fraction, ...]:
    # sum_{k=0}^{n} C(n+1,k) B_k = 0 for n >= 1, with B_0 = 1.
    b = [Fraction(1)]
    for m in range(1, n + 1):
        acc = sum((comb(m + 1, k) * b[k] for k in range(m)), Fraction(0))
        b.append(-acc / (m + 1))
    return tuple(b)


def bernoulli(n: int) -> Fraction:
    """Bernoulli number B_n for even n >= 2 (convention B_2 = 1/6)."""
    if n < 2 or n % 2:
        raise ExactCoreError(f"bernoulli requires even n >= 2, got {n}")
    return _bernoulli_upto(n)[n]


def euler_characteristic_constant(g: int) -> Fraction:
    """Orbifold Euler characteristic of the genus-g moduli space, g >= 2.

    Returns (-1)^g B_{2g} / (2g(2g-2)), which is negative for all g >= 2.
    """
    if g < 2:
        raise ExactCoreError(f"euler_characteristic_constant requires g >= 2, got {g}")
    return (-1) ** g * bernoulli(2 * g) / (2 * g * (2 * g - 2))


def chi_series_coefficient(g: int) -> Fraction:
    """Positive coefficient of hbar^(g-1) in chi(hbar), i.e. |chi(M_g)|."""
    return -euler_characteristic_constant(g)


# ---------------------------------------------------------------------------
# rational serialization


def rational_to_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def rational_from_str(s: str) -> Fraction:
    return Fraction(s)


# ---------------------------------------------------------------------------
# t-monomials


def mono_from_dict(d: dict[int, int]) -> TMono:
    return tuple(sorted((k, e) for k, e in d.items() if e))


def mono_mul(a: TMono, b: TMono) -> TMono:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for k, e in b:
        d[k] = d.get(k, 0) + e
    return mono_from_dict(d)


def mono_degree(m: TMono) -> int:
    return sum(e for _, e in m)


def mono_max_index(m: TMono) -> int:
    return max((k for k, _ in m), default=-1)


# ---------------------------------------------------------------------------
# truncation windows


@dataclass(frozen=True)
class Truncation:
    """Bounds for GradedSeries keys.

    gmax, kmax, dmax, smax are the user-facing bounds: max genus, max
    t-index, max total t-degree, max power of s (so a <= smax // 2).
    The h/a window fields default to values wide enough for free
    energies and their exponentials; intermediate computations pad them
    further via `padded`.
    """

    gmax: int
    kmax: int
    dmax: int
    smax: int
    h_lo: int | None = None
    h_hi: int | None = None
    a_lo: int | None = None
    a_hi: int | None = None

    def __post_init__(self) -> None:
        if min(self.gmax, self.kmax, self.dmax, self.smax) < 0:
            raise ExactCoreError("truncation bounds must be nonnegative")
        if self.smax % 2:
            raise ExactCoreError("smax must be even (only s**2 ever appears)")

    @property
    def hmin(self) -> int:
        return self.h_lo if self.h_lo is not None else -(self.dmax + 2)

    @property
    def hmax(self) -> int:
        return self.h_hi if self.h_hi is not None else self.gmax - 1

    @property
    def amin(self) -> int:
        return self.a_lo if self.a_lo is not None else -(self.gmax + 1)

    @property
    def amax(self) -> int:
        return self.a_hi if self.a_hi is not None else self.smax // 2

    def contains(self, h: int, a: int, t: TMono) -> bool:
        return (
            self.hmin <= h <= self.hmax
            and self.amin <= a <= self.amax
            and mono_degree(t) <= self.dmax
            and mono_max_index(t) <= self.kmax
        )

    def z_window(self) -> "Truncation":
        """Window for partition functions Z = exp(F).

        Products of positive-hbar free-energy terms push h above
        gmax - 1; each such term carries t-degree >= 1, so dmax extra
        levels suffice.  Every s-graded free-energy term satisfies
        a >= -h, an invariant products preserve, so the a window must
        reach down to -hmax or high-h vacuum powers get clipped and
        later products against hbar^{-1} factors lose exact
        cancellations.
        """
        h_hi = self.hmax + self.dmax
        return Truncation(
            self.gmax,
            self.kmax,
            self.dmax,
            self.smax,
            h_lo=self.hmin,
            h_hi=h_hi,
            a_lo=min(self.amin, -h_hi),
            a_hi=self.amax,
        )

    def padded(self, pad: int, kpad: int = 0) -> "Truncation":
        """Widen the h and a windows by `pad` and kmax by `kpad`."""
        return Truncation(
            self.gmax,
            self.kmax + kpad,
            self.dmax,
            self.smax,
            h_lo=self.hmin - pad,
            h_hi=self.hmax + pad,
            a_lo=self.amin - pad,
            a_hi=self.amax + pad,
        )

    def to_json(self) -> dict:
        return {"gmax": self.gmax, "kmax": self.kmax, "dmax": self.dmax, "smax": self.smax}

    @classmethod
    def from_json(cls, d: dict) -> "Truncation":
        return cls(d["gmax"], d["kmax"], d["dmax"], d["smax"])


# ---------------------------------------------------------------------------
# graded series


class GradedSeries:
    """Sparse truncated series in hbar, s**2 and t_0..t_K over Fraction."""

    __slots__ = ("trunc", "terms")

    def __init__(self, trunc: Truncation, terms: dict[Key, Fraction] | None = None):
        self.trunc = trunc
        self.terms: dict[Key, Fraction] = terms if terms is not None else {}

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, trunc: Truncation) -> "GradedSeries":
        return cls(trunc)

    @classmethod
    def term(
        cls,
        trunc: Truncation,
        value: Fraction | int,
        h: int = 0,
        a: int = 0,
        t: TMono = (),
    ) -> "GradedSeries":
        value = Fraction(value)
        if value == 0 or not trunc.contains(h, a, t):
            return cls(trunc)
        return cls(trunc, {(h, a, t): value})

    @classmethod
    def one(cls, trunc: Truncation) -> "GradedSeries":
        return cls.term(trunc, 1)

    # -- plumbing ----------------------------------------------------------

    def _require_same(self, other: "GradedSeries") -> None:
        if self.trunc != other.trunc:
            raise ExactCoreError("operands have mismatched truncations")

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, h: int = 0, a: int = 0, t: TMono = ()) -> Fraction:
        return self.terms.get((h, a, t), Fraction(0))

    def constant_term(self) -> Fraction:
        return self.coefficient(0, 0, ())

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, GradedSeries)
            and self.trunc == other.trunc
            and self.terms == other.terms
        )

    def __hash__(self):  # pragma: no cover - identity hashing not needed
        raise TypeError("GradedSeries is unhashable")

    def restrict(self, trunc: Truncation) -> "GradedSeries":
        """Drop every key outside `trunc` and adopt it as the new window."""
        return GradedSeries(
            trunc, {k: v for k, v in self.terms.items() if trunc.contains(*k)}
        )

    def with_window(self, trunc: Truncation) -> "GradedSeries":
        """Adopt a strictly wider window without touching any term."""
        for k in self.terms:
            if not trunc.contains(*k):
                raise ExactCoreError("with_window would drop terms; use restrict")
        return GradedSeries(trunc, dict(self.terms))

    # -- linear ops --------------------------------------------------------

    def __add__(self, other: "GradedSeries") -> "GradedSeries":
        self._require_same(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            w = out.get(k, Fraction(0)) + v
            if w:
                out[k] = w
            else:
                out.pop(k, None)
        return GradedSeries(self.trunc, out)

    def __neg__(self) -> "GradedSeries":
        return GradedSeries(self.trunc, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "GradedSeries") -> "GradedSeries":
        return self + (-other)

    def scale(self, c: Fraction | int) -> "GradedSeries":
        c = Fraction(c)
        if c == 0:
            return GradedSeries(self.trunc)
        return GradedSeries(self.trunc, {k: c * v for k, v in self.terms.items()})

    def shift(self, dh: int = 0, da: int = 0) -> "GradedSeries":
        """Multiply by hbar^dh * (s**2)^da."""
        tr = self.trunc
        out = {}
        for (h, a, t), v in self.terms.items():
            if tr.contains(h + dh, a + da, t):
                out[(h + dh, a + da, t)] = v
        return GradedSeries(tr, out)

    # -- multiplicative ops ------------------------------------------------

    def __mul__(self, other: "GradedSeries") -> "GradedSeries":
        self._require_same(other)
        tr = self.trunc
        out: dict[Key, Fraction] = {}
        # iterate the smaller factor outermost
        left, right = (self.terms, other.terms)
        if len(left) > len(right):
            left, right = right, left
        ritems = list(right.items())
        for (h1, a1, t1), v1 in left.items():
            d1 = mono_degree(t1)
            for (h2, a2, t2), v2 in ritems:
                if d1 + mono_degree(t2) > tr.dmax:
                    continue
                h = h1 + h2
                if not (tr.hmin <= h <= tr.hmax):
                    continue
                a = a1 + a2
                if not (tr.amin <= a <= tr.amax):
                    continue
                key = (h, a, mono_mul(t1, t2))
                w = out.get(key, Fraction(0)) + v1 * v2
                if w:
                    out[key] = w
                else:
                    del out[key]
        return GradedSeries(tr, out)

    def derive(self, k: int) -> "GradedSeries":
        """d/dt_k."""
        out: dict[Key, Fraction] = {}
        for (h, a, t), v in self.terms.items():
            d = dict(t)
            e = d.get(k)
            if not e:
                continue
            d[k] = e - 1
            out[(h, a, mono_from_dict(d))] = v * e
        return GradedSeries(self.trunc, out)

    def times_t(self, k: int, power: int = 1) -> "GradedSeries":
        """Multiply by t_k**power."""
        tr = self.trunc
        out = {}
        for (h, a, t), v in self.terms.items():
            t2 = mono_mul(t, ((k, power),))
            if tr.contains(h, a, t2):
                out[(h, a, t2)] = v
        return GradedSeries(tr, out)

    def _exp_pad(self) -> int:
        # Partial products inside exp/log/substitute can leave the h/a
        # window and re-enter it: an hbar^{-1} factor carries t-degree
        # >= 1, so at most dmax of them act, and each t-free factor has
        # h >= 1 or a >= 1 bounded by the window.  A pad linear in dmax
        # covers every excursion that can return.
        tr = self.trunc
        return tr.dmax * max(tr.gmax - 1, 1) + 2

    def exp(self) -> "GradedSeries":
        """exp of a series with no (hbar^0 s^0 t-free) constant term.

        Termination needs each term to be nilpotent under truncation:
        positive t-degree, positive hbar-power or positive s**2-power.
        """
        for (h, a, t) in self.terms:
            if mono_degree(t) == 0 and h <= 0 and a <= 0:
                raise ExactCoreError(
                    "exp requires every t-free term to carry a positive power "
                    f"of hbar or s**2; offending key {(h, a, t)}"
                )
        base = self.trunc
        work = base.padded(self._exp_pad())
        x = self.with_window(work)
        result = GradedSeries.one(work)
        power = GradedSeries.one(work)
        for p in range(1, 10_000):
            power = (power * x).scale(Fraction(1, p))
            if power.is_zero():
                break
            result = result + power
        else:  # pragma: no cover - bounded by truncation nilpotency
            raise ExactCoreError("exp failed to terminate")
        return result.restrict(base)

    def log(self) -> "GradedSeries":
        """log of a series with constant term exactly 1."""
        if self.constant_term() != 1:
            raise ExactCoreError("log requires constant term 1")
        base = self.trunc
        work = base.padded(self._exp_pad())
        u = self.with_window(work) - GradedSeries.one(work)
        result = GradedSeries.zero(work)
        power = GradedSeries.one(work)
        for p in range(1, 10_000):
            power = power * u
            if power.is_zero():
                break
            result = result + power.scale(Fraction((-1) ** (p + 1), p))
        else:  # pragma: no cover
            raise ExactCoreError("log failed to terminate")
        return result.restrict(base)

    def substitute(self, images: dict[int, "GradedSeries"]) -> "GradedSeries":
        """Replace t_k by images[k] (indices absent from the map are fixed).

        Images with a bare constant part (t-free, hbar^0, s^0) are only
        admitted for k >= 2: such shifts are the dimension-weighted
        translations, whose insertion sums terminate; a bare constant at
        t_0 or t_1 would not.
        """
        for k, img in images.items():
            self._require_same(img)
            if k < 2:
                for (h, a, t) in img.terms:
                    if mono_degree(t) == 0 and h <= 0 and a <= 0:
                        raise ExactCoreError(
                            f"substitution into t_{k} has a weightless constant "
                            "term; insertion sums would not terminate"
                        )
        base = self.trunc
        work = base.padded(self._exp_pad())
        cache: dict[tuple[int, int], GradedSeries] = {}

        def image_power(k: int, e: int) -> GradedSeries:
            got = cache.get((k, e))
            if got is None:
                if e == 1:
                    got = images[k].with_window(work)
                else:
                    got = image_power(k, e - 1) * image_power(k, 1)
                cache[(k, e)] = got
            return got

        out = GradedSeries.zero(work)
        for (h, a, t), v in self.terms.items():
            piece = GradedSeries.term(work, v, h, a)
            for k, e in t:
                if k in images:
                    piece = piece * image_power(k, e)
                else:
                    piece = piece.times_t(k, e)
            out = out + piece
        return out.restrict(base)

    # -- serialization -----------------------------------------------------

    def to_entries(self) -> list[dict]:
        rows = []
        for (h, a, t) in sorted(self.terms):
            rows.append(
                {
                    "h": h,
                    "s2": a,
                    "t": [[k, e] for k, e in t],
                    "v": rational_to_str(self.terms[(h, a, t)]),
                }
            )
        return rows

    @classmethod
    def from_entries(cls, trunc: Truncation, rows: list[dict]) -> "GradedSeries":
        terms = {}
        for row in rows:
            key = (row["h"], row["s2"], tuple((k, e) for k, e in row["t"]))
            terms[key] = rational_from_str(row["v"])
        return cls(trunc, terms)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"GradedSeries({len(self.terms)} terms, trunc={self.trunc})"


# ---------------------------------------------------------------------------
# formal polynomials (kappa classes, pi^2, translation parameters)

PMono = tuple[tuple[str, int], ...]


class FormalPolynomial:
    """Sparse polynomial over Fraction in named formal symbols."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[PMono, Fraction] | None = None):
        self.terms: dict[PMono, Fraction] = terms or {}

    @classmethod
    def const(cls, v: Fraction | int) -> "FormalPolynomial":
        v = Fraction(v)
        return cls({(): v} if v else {})

    @classmethod
    def symbol(cls, name: str, power: int = 1) -> "FormalPolynomial":
        return cls({((name, power),): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = FormalPolynomial.const(other)
        return isinstance(other, FormalPolynomial) and self.terms == other.terms

    def __hash__(self):  # pragma: no cover
        raise TypeError("FormalPolynomial is unhashable")

    def __add__(self, other: "FormalPolynomial") -> "FormalPolynomial":
        out = dict(self.terms)
        for m, v in other.terms.items():
            w = out.get(m, Fraction(0)) + v
            if w:
                out[m] = w
            else:
                del out[m]
        return FormalPolynomial(out)

    def __neg__(self) -> "FormalPolynomial":
        return FormalPolynomial({m: -v for m, v in self.terms.items()})

    def __sub__(self, other: "FormalPolynomial") -> "FormalPolynomial":
        return self + (-other)

    def __mul__(self, other: "FormalPolynomial") -> "FormalPolynomial":
        out: dict[PMono, Fraction] = {}
        for m1, v1 in self.terms.items():
            for m2, v2 in other.terms.items():
                d = dict(m1)
                for s, e in m2:
                    d[s] = d.get(s, 0) + e
                m = tuple(sorted(d.items()))
                w = out.get(m, Fraction(0)) + v1 * v2
                if w:
                    out[m] = w
                else:
                    del out[m]
        return FormalPolynomial(out)

    def scale(self, c: Fraction | int) -> "FormalPolynomial":
        c = Fraction(c)
        if c == 0:
            return FormalPolynomial()
        return FormalPolynomial({m: c * v for m, v in self.terms.items()})

    def __pow__(self, n: int) -> "FormalPolynomial":
        out = FormalPolynomial.const(1)
        for _ in range(n):
            out = out * self
        return out

    def coefficient(self, mono: PMono) -> Fraction:
        return self.terms.get(tuple(sorted(mono)), Fraction(0))

    def constant(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def evaluate(self, values: dict[str, object]):
        """Substitute numbers (Fraction, float, mpf...) for every symbol."""
        total = 0
        for m, v in self.terms.items():
            x = v
            for s, e in m:
                x = x * values[s] ** e
            total = total + x
        return total

    def __repr__(self) -> str:  # pragma: no cover
        if not self.terms:
            return "0"
        bits = []
        for m in sorted(self.terms):
            mono = "*".join(f"{s}^{e}" if e > 1 else s for s, e in m) or "1"
            bits.append(f"{rational_to_str(self.terms[m])}*{mono}")
        return " + ".join(bits)


# ---------------------------------------------------------------------------
# univariate truncated series helpers (generic coefficient ring)


def useries_exp_poly(a: list[FormalPolynomial], order: int) -> list[FormalPolynomial]:
    """exp of a FormalPolynomial-coefficient series with a[0] == 0.

    Uses the derivative recurrence m*e_m = sum_j j*a_j*e_{m-j}.
    """
    if a and not a[0].is_zero():
        raise ExactCoreError("useries_exp_poly requires zero constant term")
    e = [FormalPolynomial.const(1)] + [FormalPolynomial() for _ in range(order)]
    for m in range(1, order + 1):
        acc = FormalPolynomial()
        for j in range(1, m + 1):
            if j < len(a):
                acc = acc + (a[j] * e[m - j]).scale(j)
        e[m] = acc.scale(Fraction(1, m))
    return e


def useries_log(a: list, order: int) -> list[Fraction]:
    """log of a Fraction-coefficient series with a[0] == 1."""
    if a[0] != 1:
        raise ExactCoreError("useries_log requires unit constant term")
    l = [Fraction(0) for _ in range(order + 1)]
    for m in range(1, order + 1):
        am = a[m] if m < len(a) else Fraction(0)
        acc = Fraction(0)
        for j in range(1, m):
            acc += j * l[j] * (a[m - j] if m - j < len(a) else Fraction(0))
        l[m] = am - acc / m
    return l
