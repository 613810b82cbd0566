"""Spin-class correlators and the assembly of the spin tau function.

The spin correlators <prod tau_{k_i}>_g average the spin class over the
Ramond points, whose number m = 2 - 2g + 2|k| is forced by homogeneity.
Stable entries coincide with the bracketed-psi kappa correlators; the
genus-0 slice is additionally pinned down by a topological recursion
relation (TRR) from two-point seeds and by a closed-form evaluation, and
all three routes are required to agree.

The tau function Z^Omega assembles the stable entries at s-power
2 - 2g + 2|k| together with the unstable genus-0 one- and two-point
series; Z^Omega(t=0) = 1.  The operator chain D maps the kappa-class
tau function to the same object:

    D Z^K = e^chi * e^{S_alpha / hbar} * e^{F02 / (2 hbar)}
            * Z^K(t_k -> sum_m (s^2/2)^m t_{k+m} / m!),

and the three-way comparison with the Virasoro-solved BGW tau function
is exposed as a report.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial

from .exactcore import (
    ExactCoreError,
    GradedSeries,
    Truncation,
    chi_series_coefficient,
    mono_from_dict,
)
from .kappa import bracket_psi_correlators, zk_partition_function
from .tables import CorrelatorTable
from .virasoro import _fixed_sum_multisets, partition_function


# ---------------------------------------------------------------------------
# genus-0 slice: seeds, TRR, closed form


def two_point_seed(k: int) -> Fraction:
    """<tau_k tau_0>_0 = 1/(2^{k+1} (k+1)!)."""
    if k < 0:
        raise ExactCoreError("index must be nonnegative")
    return Fraction(1, 2 ** (k + 1) * factorial(k + 1))


@lru_cache(maxsize=None)
def _spin_genus0(k: tuple[int, ...]) -> Fraction:
    """Genus-0 spin correlator by the TRR, on a sorted index tuple."""
    n = len(k)
    if n == 2:
        if min(k) != 0:
            raise ExactCoreError(f"two-point correlator {k} is not a seed")
        return two_point_seed(max(k))
    if n == 3 and k == (0, 0, 0):
        return Fraction(1)
    if k[-1] == 0:
        # all indices zero: remove one tau_0 by the dilaton identity,
        # <tau_0 X>_0 = (n + 2|k|) <X>_0
        return (n - 1) * _spin_genus0(k[:-1])
    # TRR on the largest index: distribute the remaining n - 3 points
    k1 = k[-1]
    k2, k3 = k[-2], k[-3]
    rest = k[:-3]
    total = Fraction(0)
    for size in range(len(rest) + 1):
        for picked in combinations(range(len(rest)), size):
            chosen = tuple(rest[i] for i in picked)
            left = tuple(i for i in range(len(rest)) if i not in picked)
            other = tuple(rest[i] for i in left)
            f1 = _spin_genus0(tuple(sorted((0, k1 - 1) + chosen)))
            f2 = _spin_genus0(tuple(sorted((0, k2, k3) + other)))
            total += f1 * f2
    return total


def genus0_spin_trr(trunc: Truncation) -> CorrelatorTable:
    """Genus-0 spin correlators for n >= 3 from the TRR and its seeds."""
    table = CorrelatorTable("spin", trunc)
    for n in range(3, trunc.dmax + 1):
        for total in range(0, n * trunc.kmax + 1):
            for k in _fixed_sum_multisets(n, total, trunc.kmax):
                table.set(0, k, _spin_genus0(k))
    return table


def genus0_closed_form(m) -> Fraction:
    """Genus-0 spin correlator in closed form, for any n >= 1.

    For n >= 3: 2^{-|m|-1} * 2 (2|m|+n-1)! / (2|m|+2)! * prod 1/m_i!.
    For n = 1 and n = 2 the values are the displayed one- and two-point
    series coefficients.
    """
    m = tuple(int(x) for x in m)
    if any(x < 0 for x in m):
        raise ExactCoreError("indices must be nonnegative")
    n = len(m)
    w = sum(m)
    if n == 0:
        raise ExactCoreError("empty index")
    if n == 1:
        return Fraction(1, 2 ** (w + 1) * (w + 1) * (2 * w + 1) * factorial(w))
    if n == 2:
        value = Fraction(1, 2 ** (w + 1) * (w + 1))
        for x in m:
            value /= factorial(x)
        return value
    value = Fraction(2 * factorial(2 * w + n - 1), 2 ** (w + 1) * factorial(2 * w + 2))
    for x in m:
        value /= factorial(x)
    return value


# ---------------------------------------------------------------------------
# all-genus table


@lru_cache(maxsize=None)
def spin_correlators(trunc: Truncation) -> CorrelatorTable:
    """Spin correlators for stable (g, n): the bracketed-kappa values.

    The genus-0 slice is verified against both the TRR route and the
    closed form; disagreement raises.
    """
    bracket = bracket_psi_correlators(trunc)
    table = CorrelatorTable("spin", trunc)
    for (g, k), v in bracket.entries.items():
        n = len(k)
        if n == 0 or 2 * g - 2 + n <= 0:
            continue
        if g == 0:
            trr = _spin_genus0(k)
            closed = genus0_closed_form(k)
            if not v == trr == closed:
                raise ExactCoreError(
                    f"genus-0 route disagreement at {k}: "
                    f"bracket {v}, TRR {trr}, closed form {closed}"
                )
        table.set(g, k, v)
    return table


# ---------------------------------------------------------------------------
# unstable genus-0 data


def f01_series(trunc: Truncation) -> GradedSeries:
    """One-point genus-0 series: sum <tau_m>_0 t_m at s^{2m+2}, h = -1."""
    terms = {}
    for m in range(trunc.kmax + 1):
        if trunc.amin <= m + 1 <= trunc.amax:
            terms[(-1, m + 1, ((m, 1),))] = genus0_closed_form((m,))
    return GradedSeries(trunc, terms)


def alpha_coefficient(m: int) -> Fraction:
    """alpha_m = (s^2/2)^{m+1} / (m+1)! as the rational prefactor."""
    return Fraction(1, 2 ** (m + 1) * factorial(m + 1))


def s_alpha_series(trunc: Truncation) -> GradedSeries:
    """S_alpha = sum alpha_m t_m / (2m+1); equal to the one-point series."""
    terms = {}
    for m in range(trunc.kmax + 1):
        if trunc.amin <= m + 1 <= trunc.amax:
            terms[(-1, m + 1, ((m, 1),))] = alpha_coefficient(m) / (2 * m + 1)
    return GradedSeries(trunc, terms)


def f02_series(trunc: Truncation) -> GradedSeries:
    """Two-point genus-0 series F02, an ordered double sum: the monomial
    t_{m1} t_{m2} carries <tau_{m1} tau_{m2}>_0 once per ordering.  It
    enters the free energy as F02/2 (the 1/n! convention)."""
    terms = {}
    for m1 in range(trunc.kmax + 1):
        for m2 in range(m1, trunc.kmax + 1):
            a = m1 + m2 + 1
            if not trunc.amin <= a <= trunc.amax:
                continue
            v = genus0_closed_form((m1, m2))
            if m1 == m2:
                terms[(-1, a, ((m1, 2),))] = v
            else:
                terms[(-1, a, ((m1, 1), (m2, 1)))] = 2 * v
    return GradedSeries(trunc, terms)


# ---------------------------------------------------------------------------
# tau-function assembly


def spin_free_energy(trunc: Truncation) -> GradedSeries:
    """log Z^Omega: stable entries at s-power 2 - 2g + 2|k| plus the
    unstable hbar^{-1} pieces (one-point plus half the two-point)."""
    table = spin_correlators(trunc)
    terms: dict = {}
    for (g, k), v in table.entries.items():
        counts = {idx: k.count(idx) for idx in set(k)}
        aut = 1
        for e in counts.values():
            aut *= factorial(e)
        a = 1 - g + sum(k)
        if not trunc.amin <= a <= trunc.amax:
            continue
        terms[(g - 1, a, mono_from_dict(counts))] = v / aut
    F = GradedSeries(trunc, terms)
    return F + f01_series(trunc) + f02_series(trunc).scale(Fraction(1, 2))


def assemble_z_omega(trunc: Truncation) -> GradedSeries:
    """Z^Omega = exp(log Z^Omega) on the z-ready window; Z^Omega(0) = 1."""
    return spin_free_energy(trunc).with_window(trunc.z_window()).exp()


# ---------------------------------------------------------------------------
# the operator chain D


def _chi_series(trunc: Truncation) -> GradedSeries:
    """chi(hbar s^{-2}) = sum |chi(M_g)| hbar^{g-1} s^{-2(g-1)}."""
    terms = {}
    for g in range(2, trunc.gmax + 1):
        if trunc.amin <= 1 - g <= trunc.amax:
            terms[(g - 1, 1 - g, ())] = chi_series_coefficient(g)
    return GradedSeries(trunc, terms)


def d_operator_apply(zk: GradedSeries, target: Truncation | None = None) -> GradedSeries:
    """Apply D = e^chi e^{S_alpha/hbar} e^{(s^2/2) L_{-1}} to Z^K.

    The input must carry the vacuum normalization zk(t=0) =
    exp(-chi(hbar s^{-2})); the shift part acts as
    t_k -> sum_m (s^2/2)^m t_{k+m} / m!, and the quadratic part of the
    conjugated shift contributes the factor e^{F02/(2 hbar)}.

    The chi factors carry negative s-powers, so coefficients of the
    result inside `target` pair factor terms against input terms ABOVE
    the target s-window.  For a faithful result the input should be
    built on a window whose a_hi exceeds the target's by the h-reach of
    the vacuum powers (gmax - 1 + dmax); `target` then selects the
    window of interest.
    """
    tr = zk.trunc
    if target is None:
        target = tr
    expected = (-_chi_series(tr)).exp()
    actual = {key: v for key, v in zk.terms.items() if not key[2]}
    if actual != dict(expected.terms):
        raise ExactCoreError("input is not normalized to exp(-chi) at t = 0")
    work = tr.padded(tr.dmax + tr.gmax + 2)
    shifts = {}
    for k in range(tr.kmax + 1):
        img = GradedSeries.zero(work)
        for m in range(tr.kmax - k + 1):
            img = img + GradedSeries.term(
                work, Fraction(1, 2**m * factorial(m)), a=m, t=((k + m, 1),)
            )
        shifts[k] = img
    shifted = zk.with_window(work).substitute(shifts)
    exponent = (
        _chi_series(tr) + s_alpha_series(tr) + f02_series(tr).scale(Fraction(1, 2))
    )
    factor = exponent.with_window(work).exp()
    return (factor * shifted).restrict(target)


# ---------------------------------------------------------------------------
# three-way comparison


def series_mismatches(a: GradedSeries, b: GradedSeries) -> list:
    """Keys where two series differ, with both values."""
    out = []
    for key in sorted(set(a.terms) | set(b.terms)):
        va = a.terms.get(key, Fraction(0))
        vb = b.terms.get(key, Fraction(0))
        if va != vb:
            out.append((key, va, vb))
    return out


def triple_route_compare(trunc: Truncation) -> dict:
    """Exact three-way comparison Z^BGW = Z^Omega = D Z^K.

    The BGW and spin assemblies exponentiate identically truncated free
    energies, so they are compared on the whole exp window.  D mixes
    hbar slots and s slots (its hbar^{-1} prefactors pull data down
    from above, its chi factors pull data in from higher s-powers), so
    the kappa tau function is built on an s-widened window and the D
    leg is compared on the genus-complete slots h <= gmax - 1.  Returns
    a report with the number of keys compared, the number of nonzero
    coefficients among them, and any mismatching keys (expected none).
    """
    z_bgw = partition_function("gBGW", trunc)
    z_omega = assemble_z_omega(trunc)
    wide = replace(trunc, a_hi=trunc.amax + trunc.gmax - 1 + trunc.dmax)
    z_k = zk_partition_function(wide, graded=True, vacuum=True)
    d_zk = d_operator_apply(z_k, target=trunc)
    cut = trunc.gmax - 1
    mism = series_mismatches(z_bgw, z_omega) + [
        item
        for item in series_mismatches(z_bgw, d_zk)
        if item[0][0] <= cut
    ]
    keys = set(z_bgw.terms) | set(z_omega.terms)
    keys |= {key for key in d_zk.terms if key[0] <= cut}
    nonzero = {key for key in keys if z_bgw.terms.get(key)}
    return {
        "trunc": trunc.to_json(),
        "compared": len(keys),
        "nonzero": len(nonzero),
        "mismatches": mism,
    }
