"""Statistical comparators for sampler-versus-oracle checks.

Thresholds are set at about the 0.001 level so a full acceptance run with a
few dozen comparisons rarely fails by chance.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateError, DomainError

OTHER = "OTHER"
Z_999 = NormalDist().inv_cdf(0.999)


@dataclass
class EmpiricalLaw:
    counts: dict
    total: int

    def __post_init__(self):
        s = sum(self.counts.values())
        if s != self.total:
            raise DomainError(f"counts sum to {s}, total says {self.total}")
        if self.total <= 0:
            raise DomainError("empirical law needs at least one sample")

    @classmethod
    def from_samples(cls, keys) -> "EmpiricalLaw":
        c = Counter(keys)
        return cls(dict(c), sum(c.values()))

    def probabilities(self) -> dict:
        return {k: v / self.total for k, v in self.counts.items()}

    def coarsen(self, keep) -> "EmpiricalLaw":
        """Lump every key outside ``keep`` into ``OTHER``."""
        keep = set(keep)
        out: Counter = Counter()
        for k, v in self.counts.items():
            out[k if k in keep else OTHER] += v
        return EmpiricalLaw(dict(out), self.total)


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    sample_size: int
    notes: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.statistic <= self.threshold)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "n": self.sample_size,
            "notes": self.notes,
        }
        if self.extra:
            d["extra"] = self.extra
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.statistic:.6g} <= {self.threshold:.6g} (n={self.sample_size})"


def _as_probabilities(law) -> dict:
    if isinstance(law, EmpiricalLaw):
        return law.probabilities()
    total = math.fsum(law.values())
    if total <= 0.0:
        raise DomainError("law has zero total mass")
    return {k: v / total for k, v in law.items()}


def with_remainder(exact: Mapping) -> dict:
    """Add an ``OTHER`` cell carrying ``1 - sum(exact)``."""
    out = dict(exact)
    rest = 1.0 - math.fsum(out.values())
    if rest > 1e-15:
        out[OTHER] = out.get(OTHER, 0.0) + rest
    return out


def total_variation(a, b) -> float:
    """Half the L1 distance between two laws (counts are normalised first)."""
    pa = _as_probabilities(a)
    pb = _as_probabilities(b)
    return 0.5 * math.fsum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in set(pa) | set(pb))


def chi_square_quantile(df: int, level_z: float = Z_999) -> float:
    """Upper chi-square quantile at the level whose normal quantile is ``level_z``.

    Exact for ``df <= 2``; Wilson-Hilferty otherwise (within 2% and on
    the conservative side at the 0.999 level).
    """
    if df < 1:
        raise DomainError("df must be >= 1")
    alpha = 1.0 - NormalDist().cdf(level_z)
    if df == 1:
        return NormalDist().inv_cdf(1.0 - alpha / 2.0) ** 2
    if df == 2:
        return -2.0 * math.log(alpha)
    c = 2.0 / (9.0 * df)
    return df * (1.0 - c + level_z * math.sqrt(c)) ** 3


def chi_square_statistic(empirical: EmpiricalLaw, exact: Mapping, min_expected: float = 5.0,
                         name: str = "chi-square") -> TestReport:
    probs = with_remainder(exact)
    n = empirical.total
    cells = []  # (observed, expected)
    unexpected = 0
    for k in set(probs) | set(empirical.counts):
        obs = empirical.counts.get(k, 0)
        p = probs.get(k, 0.0)
        if p <= 0.0:
            unexpected += obs
            continue
        cells.append((obs, n * p))
    big = [c for c in cells if c[1] >= min_expected]
    small = [c for c in cells if c[1] < min_expected]
    if small:
        pooled = (sum(c[0] for c in small), math.fsum(c[1] for c in small))
        if pooled[1] < min_expected and big:
            big.sort(key=lambda c: c[1])
            o, e = big.pop(0)
            pooled = (pooled[0] + o, pooled[1] + e)
        big.append(pooled)
    if len(big) < 2:
        raise DegenerateError("fewer than 2 cells after pooling")
    df = len(big) - 1
    threshold = chi_square_quantile(df)
    if unexpected:
        stat = math.inf
        notes = f"{unexpected} observations in zero-probability cells"
    else:
        stat = math.fsum((o - e) ** 2 / e for o, e in big)
        notes = f"df={df}"
    return TestReport(name, stat, threshold, n, notes, {"df": df})


def ks_statistic(samples, cdf: Callable, name: str = "ks", threshold: float | None = None) -> TestReport:
    """Kolmogorov-Smirnov distance; default threshold ``1.95/sqrt(N)`` (about the 0.001 level)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("no samples")
    if n < 100:
        raise DomainError("KS comparison needs at least 100 samples")
    try:
        F = np.asarray(cdf(x), dtype=float)
        if F.shape != x.shape:
            raise ValueError
    except (TypeError, ValueError):
        F = np.array([cdf(v) for v in x], dtype=float)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - F)), float(np.max(F - (i - 1) / n)))
    if threshold is None:
        threshold = 1.95 / math.sqrt(n)
    return TestReport(name, d, threshold, n)


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), math.inf
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def z_score(mean: float, se: float, target: float = 0.0) -> float:
    diff = mean - target
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return abs(diff) / se


def martingale_report(d, u_grid, N: int, rng=None, node_cap: int = 10**6) -> TestReport:
    """Coupled increments of ``M(u, G(u))`` along a grafted path.

    ``G(u_0)`` is sampled directly and each later state is obtained by
    grafting; the statistic is the largest ``|mean|/SE`` over grid steps.
    """
    from . import prune
    from ._rng import as_rng
    from .offspring import mean_at, prune_distribution

    grid = [float(u) for u in u_grid]
    if not grid or any(not (0.0 <= u < d.critical_horizon) for u in grid):
        raise DomainError(f"grid must lie in [0, {d.critical_horizon!r})")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("grid must be non-decreasing")
    rng = as_rng(rng)

    def M(u, batch):
        du = prune_distribution(d, u)
        return (1.0 - mean_at(d, u)) * batch.num_leaves() / du.p0

    budget = prune.SampleBudget(node_cap=node_cap)
    batch = prune.sample_gw_many(d, grid[0], N, budget, rng)
    prev = M(grid[0], batch)
    zs, means = [], []
    base_mean, base_se = mean_and_se(prev)
    for a, b in zip(grid, grid[1:]):
        batch = prune.graft_forward_many(batch, d, a, b, budget, rng)
        cur = M(b, batch)
        m, se = mean_and_se(cur - prev)
        zs.append(z_score(m, se))
        means.append(m)
        prev = cur
    stat = max(zs) if zs else 0.0
    return TestReport(
        "martingale", stat, 4.0, N,
        f"grid={grid}; E[M(u0)]={base_mean:.5f}±{base_se:.5f}",
        {"increment_means": means, "z": zs, "z_unconditional": z_score(base_mean, base_se, 1.0)},
    )
