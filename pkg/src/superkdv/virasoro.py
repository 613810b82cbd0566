"""Virasoro-constraint solver for the KW and generalized BGW hierarchies.

Both models satisfy constraints of the shape

    (2m + 2c + 1)!! d/dt_{m+c} Z = (L_m + shift) Z,

with c = 1 for KW (m >= -1) and c = 0 for the generalized BGW model
(m >= 0, shift = s**2/(2 hbar) at m = 0), where

    L_m = (hbar/2) sum_{i+j=m-1} (2i+1)!!(2j+1)!! d2/dt_i dt_j
        + sum_i ((2i+2m+1)!!/(2i-1)!!) t_i d/dt_{i+m}
        + (1/8) delta_{m,0} + (t_0**2 / (2 hbar)) delta_{m,-1}.

The solver works at free-energy level: dividing the constraint by
Z = exp F turns the quadratic operator into d2F + dF*dF, and the
coefficient of each (hbar^{g-1}, monomial) is solved level by level in
l = 2g - 2 + n.  For BGW the one-point entries sit at level -1, so the
dF*dF term couples a target to entries of its own level; those pairs
always involve a one-point factor and a lexicographically smaller
monomial, which the solver handles with an exact same-level correction
and a descending-lex processing order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .exactcore import (
    ExactCoreError,
    GradedSeries,
    Truncation,
    double_factorial,
    mono_from_dict,
)
from .tables import CorrelatorTable

MODELS = ("KW", "gBGW")


@dataclass(frozen=True)
class VirasoroSpec:
    """Constraint family for one model; coefficients of L_m in closed form."""

    model: str

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ExactCoreError(f"unknown model {self.model!r}")

    @property
    def offset(self) -> int:
        """c in the constrained derivative d/dt_{m+c}."""
        return 1 if self.model == "KW" else 0

    @property
    def mmin(self) -> int:
        return -1 if self.model == "KW" else 0

    def quadratic_coefficient(self, i: int, j: int) -> int:
        return double_factorial(2 * i + 1) * double_factorial(2 * j + 1)

    def linear_coefficient(self, i: int, m: int) -> Fraction:
        return Fraction(double_factorial(2 * i + 2 * m + 1), double_factorial(2 * i - 1))

    def lhs_coefficient(self, m: int) -> int:
        return double_factorial(2 * m + 2 * self.offset + 1)


# ---------------------------------------------------------------------------
# solve windows


def solve_truncation(model: str, trunc: Truncation) -> Truncation:
    """Internal window wide enough that every referenced entry is solved.

    The equation for a target at (g, n) references entries at genus g-1
    and degree n+1, so degrees are padded by 2 per missing genus.  The
    index bound comes from gradings: KW entries vanish unless
    sum k = 3g-3+n, BGW entries unless 0 <= 2-2g+2|k| <= smax.
    """
    dmax_int = trunc.dmax + 2 * trunc.gmax + 2
    if model == "KW":
        kmax_int = 3 * trunc.gmax - 3 + dmax_int
        smax_int = 0
    else:
        kmax_int = trunc.smax // 2 + trunc.gmax - 1
        smax_int = trunc.smax
    return Truncation(trunc.gmax, max(kmax_int, 0), dmax_int, smax_int)


def _degree_window(work: Truncation, g: int) -> int:
    return work.dmax - 2 * g


def _fixed_sum_multisets(n: int, total: int, kmax: int, low: int = 0):
    """Nondecreasing index tuples of length n in [low, kmax] with given sum."""
    if n == 0:
        if total == 0:
            yield ()
        return
    if total < n * low or total > n * kmax:
        return
    for first in range(low, min(kmax, total) + 1):
        for rest in _fixed_sum_multisets(n - 1, total - first, kmax, first):
            yield (first,) + rest


def _admissible_sums(model: str, work: Truncation, g: int, n: int) -> list[int]:
    """Values of sum(k) a nonzero entry at (g, n) can carry.

    KW entries need sum k = 3g-3+n exactly (and stability); gBGW entries
    carry s-power 2-2g+2 sum(k), bounded by [0, smax]."""
    if model == "KW":
        s = 3 * g - 3 + n
        return [s] if 2 * g - 2 + n > 0 and s >= 0 else []
    return list(range(max(0, g - 1), g - 1 + work.amax + 1))


# ---------------------------------------------------------------------------
# free-energy solve
#
# The right-hand side of each constraint is extracted coefficient by
# coefficient from the already-solved entries (dict lookups over divisor
# splits of the target monomial) rather than by building whole product
# series; the two are identical because every term of L_m references
# entries of level l-1 only, except the BGW one-point pairings that the
# explicit same-level correction covers.

_Coeffs = dict  # (h, a, mono) -> Fraction


def _mono_splits(t: dict) -> list[tuple[dict, dict, int]]:
    """All splittings t = S * R, as (S, R, weighted index sum of S)."""
    items = tuple(t.items())
    out: list[tuple[dict, dict, int]] = [({}, {}, 0)]
    for idx, e in items:
        nxt = []
        for left, right, w in out:
            for el in range(e + 1):
                l2, r2 = dict(left), dict(right)
                if el:
                    l2[idx] = el
                if e - el:
                    r2[idx] = e - el
                nxt.append((l2, r2, w + idx * el))
        out = nxt
    return out


def _dget(table: _Coeffs, i: int, h: int, a: int, t: dict) -> Fraction:
    """Coefficient of d/dt_i applied to `table`, at key (h, a, t)."""
    e = t.get(i, 0) + 1
    lifted = dict(t)
    lifted[i] = e
    v = table.get((h, a, mono_from_dict(lifted)))
    return v * e if v else Fraction(0)


def _d2get(table: _Coeffs, i: int, j: int, h: int, a: int, t: dict) -> Fraction:
    """Coefficient of d2/dt_i dt_j applied to `table`, at key (h, a, t)."""
    lifted = dict(t)
    ei = lifted.get(i, 0) + 1
    lifted[i] = ei
    ej = lifted.get(j, 0) + 1
    lifted[j] = ej
    v = table.get((h, a, mono_from_dict(lifted)))
    return v * ei * ej if v else Fraction(0)


def _pair_coeff(
    left: _Coeffs,
    right: _Coeffs,
    i: int,
    j: int,
    h: int,
    a: int,
    splits: list[tuple[dict, dict, int]],
    kw: bool,
    work: Truncation,
) -> Fraction:
    """Coefficient of (d_i left)(d_j right) at (h, a, mono of the splits)."""
    total = Fraction(0)
    for s, r, ws in splits:
        for h1 in range(-1, h + 2):
            # the left factor's s-grade is forced: 0 for KW, else the
            # one-point grading a1 = -h1 + |k| of a solved BGW entry
            a1 = 0 if kw else ws + i - h1
            if a1 < 0 or a1 > work.amax:
                continue
            lv = _dget(left, i, h1, a1, s)
            if not lv:
                continue
            rv = _dget(right, j, h - h1, a - a1, r)
            if rv:
                total += lv * rv
    return total


@lru_cache(maxsize=None)
def free_energy(model: str, trunc: Truncation) -> GradedSeries:
    """log Z for the model, complete within solve_truncation(model, trunc)."""
    spec = VirasoroSpec(model)
    work = solve_truncation(model, trunc)
    kw = model == "KW"
    Fd: _Coeffs = {}
    one_point: _Coeffs = {}  # BGW level -1 slice, for corrections

    lmax = 2 * work.gmax - 2 + work.dmax
    lmin = -1 if model == "gBGW" else 1
    for level in range(lmin, lmax + 1):
        targets = []
        for g in range(0, work.gmax + 1):
            n = level + 2 - 2 * g
            if n < 1 or n > _degree_window(work, g):
                continue
            for total in _admissible_sums(model, work, g, n):
                targets.extend((g, k) for k in _fixed_sum_multisets(n, total, work.kmax))
        targets.sort(key=lambda t: (t[0], len(t[1]), tuple(sorted(t[1], reverse=True))))

        block: _Coeffs = {}  # entries solved within this level
        prior_one_point = dict(one_point)  # pre-level snapshot; intra-level
        for g, k in targets:               # pairs use the block self-term
            kstar = max(k)
            m = kstar - spec.offset
            mult = k.count(kstar)
            mono = {idx: k.count(idx) for idx in set(k)}
            tprime = dict(mono)
            tprime[kstar] -= 1
            if not tprime[kstar]:
                del tprime[kstar]
            a_t = 0 if kw else 1 - g + sum(k)
            if a_t < 0 or a_t > work.amax:
                continue

            val = Fraction(0)
            # quadratic part: (hbar/2) sum (2i+1)!!(2j+1)!! (didjF + diF djF),
            # read one hbar power down
            if m >= 1:
                splits = _mono_splits(tprime)
                for i in range(m):
                    j = m - 1 - i
                    qc = spec.quadratic_coefficient(i, j)
                    piece = _d2get(Fd, i, j, g - 2, a_t, tprime)
                    piece += _pair_coeff(Fd, Fd, i, j, g - 2, a_t, splits, kw, work)
                    val += Fraction(qc, 2) * piece
                # same-level correction: dF*dF pairs with a one-point factor
                if model == "gBGW" and (block or prior_one_point):
                    for i in range(m):
                        j = m - 1 - i
                        qc = spec.quadratic_coefficient(i, j)
                        val += qc * _pair_coeff(
                            prior_one_point, block, i, j, g - 2, a_t, splits, kw, work
                        )
                        val += Fraction(qc, 2) * _pair_coeff(
                            block, block, i, j, g - 2, a_t, splits, kw, work
                        )
            # linear part: sum_i ((2i+2m+1)!!/(2i-1)!!) t_i dF/dt_{i+m}
            for i, e in tprime.items():
                if 0 <= i + m <= work.kmax:
                    lowered = dict(tprime)
                    if e > 1:
                        lowered[i] = e - 1
                    else:
                        del lowered[i]
                    val += spec.linear_coefficient(i, m) * _dget(
                        Fd, i + m, g - 1, a_t, lowered
                    )
            # constants
            if m == 0 and not tprime:
                if g == 1 and a_t == 0:
                    val += Fraction(1, 8)
                if model == "gBGW" and g == 0 and a_t == 1:
                    val += Fraction(1, 2)
            if m == -1 and g == 0 and tprime == {0: 2}:
                val += Fraction(1, 2)

            if not val:
                continue
            coeff = val / (spec.lhs_coefficient(m) * mult)
            key = (g - 1, a_t, mono_from_dict(mono))
            block[key] = coeff
            if (g, len(k)) == (0, 1):
                one_point[key] = coeff
        Fd.update(block)
    return GradedSeries(work, Fd)


def partition_function(model: str, trunc: Truncation) -> GradedSeries:
    """Z = exp(log Z), complete within trunc.z_window()."""
    return free_energy(model, trunc).restrict(trunc.z_window()).exp()


# ---------------------------------------------------------------------------
# correlator tables


def _table_from_free_energy(engine: str, model: str, trunc: Truncation) -> CorrelatorTable:
    from math import factorial

    F = free_energy(model, trunc)
    table = CorrelatorTable(engine, trunc)
    for (h, a, t), v in F.terms.items():
        g = h + 1
        k = tuple(sorted(sum(([idx] * e for idx, e in t), [])))
        if len(k) > trunc.dmax or (k and max(k) > trunc.kmax):
            continue
        if engine == "bgw" and 2 * a > trunc.smax:
            continue
        sym = 1
        for _, e in t:
            sym *= factorial(e)
        table.set(g, k, v * sym)
    return table


def kw_correlators(trunc: Truncation) -> CorrelatorTable:
    """Psi-class intersection numbers <prod tau_{k_i}>_g."""
    return _table_from_free_energy("kw", "KW", trunc)


def bgw_correlators(trunc: Truncation) -> CorrelatorTable:
    """Generalized BGW correlators, implicit s-power 2 - 2g + 2|k|."""
    return _table_from_free_energy("bgw", "gBGW", trunc)


# ---------------------------------------------------------------------------
# direct-operator oracle and residual checks


def apply_virasoro_oracle(Z: GradedSeries, spec: VirasoroSpec, m: int) -> GradedSeries:
    """Residual ((2m+2c+1)!! d/dt_{m+c} - L_m - shift) Z, on Z's window.

    The result is exact on keys a margin away from the window edges (two
    t-degrees and m+c index steps); callers certify via a restriction.
    """
    if m < spec.mmin:
        raise ExactCoreError(f"m={m} below model minimum {spec.mmin}")
    if Z.constant_term() != 1:
        raise ExactCoreError("oracle requires Z with constant term 1")
    tr = Z.trunc
    c = spec.offset
    res = Z.derive(m + c).scale(spec.lhs_coefficient(m))
    for i in range(m):
        j = m - 1 - i
        qc = spec.quadratic_coefficient(i, j)
        res = res - Z.derive(i).derive(j).shift(dh=1).scale(Fraction(qc, 2))
    i = 0
    while i + m <= tr.kmax:
        if i + m >= 0:
            res = res - Z.derive(i + m).times_t(i).scale(spec.linear_coefficient(i, m))
        i += 1
    if m == 0:
        res = res - Z.scale(Fraction(1, 8))
        if spec.model == "gBGW":
            res = res - Z.shift(dh=-1, da=1).scale(Fraction(1, 2))
    if m == -1:
        res = res - Z.times_t(0, 2).shift(dh=-1).scale(Fraction(1, 2))
    return res


@lru_cache(maxsize=8)
def _z_and_inverse(model: str, trunc: Truncation) -> tuple[GradedSeries, GradedSeries]:
    work = solve_truncation(model, trunc)
    F = free_energy(model, trunc).with_window(work.z_window())
    return F.exp(), (-F).exp()


def virasoro_oracle_residual(model: str, trunc: Truncation, m: int) -> GradedSeries:
    """Certified-zero oracle residual for the solved Z of `model`.

    Builds Z on the (wider) solve window, applies the direct operator at
    Z level, and divides by Z again.  The quotient equals the constraint
    written out at free-energy level, an identity that holds for any
    exponentiated series, so it is certifiably complete on the requested
    truncation itself.  (The raw Z-level residual is not: the hbar^{-1}
    terms of L_m mix slots that would need genus gmax+1 data down into
    the window through the negative-hbar part of Z.)
    """
    spec = VirasoroSpec(model)
    work = solve_truncation(model, trunc)
    Z, Zinv = _z_and_inverse(model, trunc)
    res = apply_virasoro_oracle(Z, spec, m)
    # only degree <= trunc.dmax slices of either factor can reach the
    # certified keys, so cut both before the (quadratic-cost) product
    zw = Z.trunc
    cut = Truncation(
        zw.gmax, zw.kmax, trunc.dmax, zw.smax,
        h_lo=zw.hmin, h_hi=zw.hmax, a_lo=zw.amin, a_hi=zw.amax,
    )
    res = res.restrict(cut) * Zinv.restrict(cut)
    cert = Truncation(
        trunc.gmax,
        max(min(trunc.kmax, work.kmax - max(m + spec.offset, 0)), 0),
        trunc.dmax,
        trunc.smax if model == "gBGW" else 0,
    )
    return res.restrict(cert)


def check_homogeneity(Z: GradedSeries) -> GradedSeries:
    """Residual of (d/dt_0 - sum (2k+1) t_k d/dt_k) log Z - s**2/(2 hbar) - 1/8.

    Complete on keys with one t-degree of margin; restricted accordingly.
    """
    if Z.constant_term() != 1:
        raise ExactCoreError("homogeneity check requires Z with constant term 1")
    tr = Z.trunc
    F = Z.log()
    res = F.derive(0)
    for k in range(tr.kmax + 1):
        res = res - F.derive(k).times_t(k).scale(2 * k + 1)
    res = res - GradedSeries.term(tr, Fraction(1, 2), h=-1, a=1)
    res = res - GradedSeries.term(tr, Fraction(1, 8))
    cert = Truncation(tr.gmax, tr.kmax, max(tr.dmax - 1, 0), tr.smax)
    return res.restrict(cert)


def kdv_residual(Z: GradedSeries) -> tuple[GradedSeries, int]:
    """Residual of U_{t_1} - U U_{t_0} - (hbar/12) U_{t_0 t_0 t_0}.

    U = hbar d2/dt_0^2 log Z.  Returns (residual, certified t-degree):
    the residual is complete and exact for t-degrees up to dmax - 5.
    """
    tr = Z.trunc
    cert_deg = tr.dmax - 5
    if cert_deg < 0 or tr.kmax < 1:
        raise ExactCoreError("truncation too small to certify any KdV order")
    work = tr.padded(2 * tr.gmax + 2)
    F = Z.with_window(work).log()
    U = F.derive(0).derive(0).shift(dh=1)
    res = (
        U.derive(1)
        - U * U.derive(0)
        - U.derive(0).derive(0).derive(0).shift(dh=1).scale(Fraction(1, 12))
    )
    cert = Truncation(tr.gmax, tr.kmax, cert_deg, tr.smax)
    return res.restrict(cert), cert_deg
