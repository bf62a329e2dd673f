"""Observed-vs-simulated validation: Welch t-test, two-sample K-S test and
five goodness-of-fit measures.

Distribution functions are computed here (incomplete beta continued
fraction, Kolmogorov series) rather than imported.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

REGIMES = ("low", "medium", "high")
SOURCES = ("observed", "simulated")

_EPS = 1e-15
_TINY = 1e-300


# -- special functions ---------------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 500) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` (possibly fractional) degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return betainc(0.5 * df, 0.5, df / (df + t * t))


def kolmogorov_sf(lam: float, terms: int = 100, tol: float = 1e-10) -> float:
    """Survival function of the limiting Kolmogorov distribution, Q(lam).

    The alternating series converges fast for large ``lam``; below 1 the
    theta-function form is used instead. Both stop after ``terms`` terms or
    once a term drops under ``tol``.
    """
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        # Q = 1 - sqrt(2 pi)/lam * sum exp(-(2k-1)^2 pi^2 / (8 lam^2))
        s = 0.0
        c = math.pi * math.pi / (8.0 * lam * lam)
        for k in range(1, terms + 1):
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < tol:
                break
        q = 1.0 - math.sqrt(2.0 * math.pi) / lam * s
    else:
        s = 0.0
        for k in range(1, terms + 1):
            term = math.exp(-2.0 * k * k * lam * lam)
            s += term if k % 2 else -term
            if term < tol:
                break
        q = 2.0 * s
    return min(1.0, max(0.0, q))


# -- tests ---------------------------------------------------------------------

def _mean_var(x: Sequence[float]) -> tuple[float, float]:
    n = len(x)
    m = math.fsum(x) / n
    v = math.fsum((xi - m) ** 2 for xi in x) / (n - 1)
    return m, v


@dataclass(frozen=True)
class StatResult:
    statistic: float
    pvalue: float


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Two-sided Welch (unequal variance) t-test."""
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    sa, sb = va / len(a), vb / len(b)
    se2 = sa + sb
    if se2 == 0.0:
        return StatResult(0.0, 1.0) if ma == mb else StatResult(math.copysign(math.inf, ma - mb), 0.0)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (sa * sa / (len(a) - 1) + sb * sb / (len(b) - 1))
    return StatResult(t, t_sf_two_sided(t, df))


def two_sample_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    return welch_t_test(a, b).pvalue


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Largest gap between the two empirical CDFs."""
    xa, xb = sorted(a), sorted(b)
    n, m = len(xa), len(xb)
    i = j = 0
    d = 0.0
    while i < n and j < m:
        x = min(xa[i], xb[j])
        while i < n and xa[i] == x:
            i += 1
        while j < m and xb[j] == x:
            j += 1
        d = max(d, abs(i / n - j / m))
    return d


def ks_test(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Two-sample K-S with the asymptotic Kolmogorov p-value at effective size nm/(n+m)."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    d = ks_statistic(a, b)
    en = len(a) * len(b) / (len(a) + len(b))
    return StatResult(d, kolmogorov_sf(math.sqrt(en) * d))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> float:
    return ks_test(a, b).pvalue


# -- goodness of fit -------------------------------------------------------------

@dataclass(frozen=True)
class GofReport:
    me: float
    mae: float
    rmse: float
    mape: float  # percent
    rmspe: float  # percent
    t_test_p: float | None = None
    ks_p: float | None = None


def goodness_of_fit(observed: Sequence[float], simulated: Sequence[float]) -> GofReport:
    """Paired error measures; errors are simulated minus observed."""
    if len(observed) != len(simulated):
        raise ValueError(f"length mismatch: {len(observed)} observed vs {len(simulated)} simulated")
    if len(observed) == 0:
        raise ValueError("need at least one pair")
    if any(o == 0 for o in observed):
        raise ValueError("observed values must be non-zero")
    n = len(observed)
    err = [s - o for o, s in zip(observed, simulated)]
    rel = [e / o for e, o in zip(err, observed)]
    return GofReport(
        me=math.fsum(err) / n,
        mae=math.fsum(abs(e) for e in err) / n,
        rmse=math.sqrt(math.fsum(e * e for e in err) / n),
        mape=math.fsum(abs(r) for r in rel) / n * 100.0,
        rmspe=math.sqrt(math.fsum(r * r for r in rel) / n) * 100.0,
    )


# -- travel-time files -------------------------------------------------------------

@dataclass(frozen=True)
class TravelTimeSample:
    route: str
    direction: str
    vehicle_type: str
    regime: str
    value: float  # minutes
    source: str = "observed"

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"travel time must be positive, got {self.value}")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def cell(self) -> tuple[str, str, str, str]:
        return (self.route, self.direction, self.vehicle_type, self.regime)


SAMPLE_FIELDS = ("route", "direction", "vehicle_type", "regime", "value_min")


def read_samples(path: str | Path, source: str = "observed") -> list[TravelTimeSample]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(SAMPLE_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(TravelTimeSample(row["route"], row["direction"], row["vehicle_type"],
                                            row["regime"], float(row["value_min"]), source))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def write_samples(path: str | Path, samples: Iterable[TravelTimeSample]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_FIELDS)
        for s in samples:
            w.writerow([s.route, s.direction, s.vehicle_type, s.regime, repr(s.value)])


REPORT_FIELDS = ("route", "direction", "vehicle_type", "regime", "n_obs", "n_sim",
                 "p_t", "p_ks", "ME", "MAE", "RMSE", "MAPE", "RMSPE")


@dataclass(frozen=True)
class CellReport:
    cell: tuple[str, str, str, str]
    n_obs: int
    n_sim: int
    gof: GofReport


def compare(observed: Sequence[TravelTimeSample], simulated: Sequence[TravelTimeSample]) -> list[CellReport]:
    """One report per (route, direction, vehicle type, regime) cell present in both sets.

    Tests run unpaired on the raw samples. Error measures pair each observed
    value with the cell's mean simulated value.
    """
    obs, sim = defaultdict(list), defaultdict(list)
    for s in observed:
        obs[s.cell].append(s.value)
    for s in simulated:
        sim[s.cell].append(s.value)
    order = {r: k for k, r in enumerate(REGIMES)}
    cells = sorted(set(obs) & set(sim), key=lambda c: (c[0], c[1], c[2], order[c[3]]))
    out = []
    for c in cells:
        a, b = obs[c], sim[c]
        sim_mean = math.fsum(b) / len(b)
        g = goodness_of_fit(a, [sim_mean] * len(a))
        p_t = two_sample_t_test(a, b) if len(a) >= 2 and len(b) >= 2 else None
        g = GofReport(g.me, g.mae, g.rmse, g.mape, g.rmspe, p_t, ks_two_sample(a, b))
        out.append(CellReport(c, len(a), len(b), g))
    return out


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


def write_report(path: str | Path, reports: Sequence[CellReport]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in reports:
            g = r.gof
            w.writerow([*r.cell, r.n_obs, r.n_sim, _fmt(g.t_test_p), _fmt(g.ks_p),
                        _fmt(g.me), _fmt(g.mae), _fmt(g.rmse), _fmt(g.mape), _fmt(g.rmspe)])
