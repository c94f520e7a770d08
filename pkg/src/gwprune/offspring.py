"""Offspring distributions and scalar functions of the pruning parameter.

Two families are supported. :class:`FiniteSupport` stores ``p_0..p_K``
explicitly; :class:`Geometric` stores the two-parameter law
``p_k = alpha * beta**(k-1)`` (``k >= 1``) whose pruning at ``u`` is again
geometric with ``beta -> u * beta``. Laws without a closed form (for instance
``p_k`` proportional to ``k**-3``) enter through :meth:`FiniteSupport.truncated`,
which folds the tail into ``p_0`` and records the cap.

The convention ``0**0 == 1`` is used throughout so unary nodes are never pruned.
"""
from __future__ import annotations

import abc
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError, NumericError, ParseError

PROB_TOL = 1e-12
# mass ignored when an infinite support is cut for sampling tables
TAIL_EPS = 1e-17
EXTINCTION_TOL = 1e-13
MAX_ITER = 10**6


class OffspringDistribution(abc.ABC):
    """A probability law on ``{0, 1, 2, ...}`` with ``p_1 < 1``."""

    truncation_cap: int | None

    @abc.abstractmethod
    def pmf_array(self, kmax: int) -> np.ndarray:
        """Probabilities ``p_0..p_kmax`` (zero padded)."""

    @abc.abstractmethod
    def pgf(self, s):
        """Generating function, vectorised over ``s``."""

    @abc.abstractmethod
    def pgf_prime(self, s):
        ...

    @abc.abstractmethod
    def pruned(self, u: float) -> "OffspringDistribution":
        """The law ``p^(u)``; no domain check beyond validity of the result."""

    @abc.abstractmethod
    def tail_cutoff(self) -> int:
        """Index ``K`` with the mass (and first moment) beyond ``K`` below ``TAIL_EPS``."""

    @abc.abstractmethod
    def literal(self) -> str:
        ...

    @property
    @abc.abstractmethod
    def p0(self) -> float:
        ...

    @property
    @abc.abstractmethod
    def mean(self) -> float:
        ...

    @property
    @abc.abstractmethod
    def max_parameter(self) -> float:
        ...

    def pmf(self, k: int) -> float:
        return float(self.pmf_array(k)[k])

    @property
    def p1(self) -> float:
        return self.pmf(1)

    def divided_difference(self, x, y):
        """``(g(x) - g(y)) / (x - y)``, equal to ``g'(x)`` on the diagonal.

        Summed term by term, so it stays accurate when ``x`` and ``y`` nearly
        coincide. Both solvers for ``F`` rely on that.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        pk = self.pmf_array(self.tail_cutoff())
        # h_k = sum_{i<k} x^i y^(k-1-i), h_1 = 1
        h = np.ones(np.broadcast(x, y).shape)
        yk = np.ones_like(h)
        out = np.zeros_like(h)
        for k in range(1, pk.size):
            if k > 1:
                yk = yk * y
                h = x * h + yk
            if pk[k] > 0.0:
                out = out + pk[k] * h
        return float(out) if out.ndim == 0 else out

    @cached_property
    def critical_horizon(self) -> float:
        """``u1 = sup{u in [0, u_bar] : mu(u) <= 1}``."""
        ubar = self.max_parameter
        if not math.isfinite(ubar):
            return math.inf
        if self.pruned(ubar).mean <= 1.0:
            return ubar
        lo, hi = 0.0, ubar
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.pruned(mid).mean <= 1.0:
                lo = mid
            else:
                hi = mid
        return lo

    def sampling_cdf(self) -> np.ndarray:
        """Cumulative table for inverse-CDF draws; last entry pinned to 1."""
        cdf = np.cumsum(self.pmf_array(self.tail_cutoff()))
        cdf[-1] = 1.0
        return cdf

    def __str__(self):
        return self.literal()


def _clean_probs(probs) -> tuple[float, ...]:
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("probabilities must be a non-empty sequence")
    if np.any(~np.isfinite(arr)) or np.any(arr < -PROB_TOL):
        raise DomainError(f"probabilities must be finite and non-negative: {probs!r}")
    arr = np.clip(arr, 0.0, None)
    last = int(np.flatnonzero(arr)[-1]) if np.any(arr > 0) else 0
    return tuple(float(x) for x in arr[: last + 1])


@dataclass(frozen=True)
class FiniteSupport(OffspringDistribution):
    probs: tuple[float, ...]
    truncation_cap: int | None = field(default=None, compare=False)

    def __post_init__(self):
        probs = _clean_probs(self.probs)
        object.__setattr__(self, "probs", probs)
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        if len(probs) > 1 and probs[1] >= 1.0:
            raise DomainError("p_1 must be < 1")

    @classmethod
    def truncated(cls, weight: Callable[[int], float], cap: int) -> "FiniteSupport":
        """``p_k = weight(k)`` for ``1 <= k <= cap``, remainder folded into ``p_0``."""
        tail = [float(weight(k)) for k in range(1, cap + 1)]
        p0 = 1.0 - math.fsum(tail)
        if p0 < -PROB_TOL:
            raise DomainError("weights exceed total mass 1")
        return cls((max(p0, 0.0), *tail), truncation_cap=cap)

    @property
    def degree(self) -> int:
        return len(self.probs) - 1

    def pmf_array(self, kmax):
        out = np.zeros(kmax + 1)
        n = min(kmax + 1, len(self.probs))
        out[:n] = self.probs[:n]
        return out

    def pgf(self, s):
        return P.polyval(s, self.probs)

    def pgf_prime(self, s):
        if self.degree == 0:
            return np.zeros_like(np.asarray(s, dtype=float)) + 0.0
        return P.polyval(s, P.polyder(self.probs))

    def pruned(self, u):
        k = np.arange(len(self.probs))
        scaled = np.power(float(u), np.maximum(k - 1, 0)) * np.asarray(self.probs)
        scaled[0] = 0.0
        p0 = 1.0 - math.fsum(scaled[1:])
        if p0 < -PROB_TOL:
            raise DomainError(f"u={u!r} exceeds the admissible range")
        scaled[0] = max(p0, 0.0)
        return FiniteSupport(tuple(scaled), truncation_cap=self.truncation_cap)

    def tail_cutoff(self):
        return self.degree

    def literal(self):
        return "finite:[" + ",".join(repr(p) for p in self.probs) + "]"

    @property
    def p0(self):
        return self.probs[0]

    @cached_property
    def mean(self):
        return math.fsum(k * p for k, p in enumerate(self.probs))

    @cached_property
    def max_parameter(self):
        probs = np.asarray(self.probs)
        if not np.any(probs[2:] > 0):
            return math.inf

        coeffs = probs[1:]

        def h(u):
            with np.errstate(over="ignore"):
                return float(P.polyval(u, coeffs)) - 1.0

        lo, hi = 1.0, 2.0
        hv = h(hi)
        while hv < 0.0:
            lo, hi = hi, 2.0 * hi
            hv = h(hi)
        if hv == 0.0:
            return hi
        if h(lo) >= 0.0:
            return lo
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            hm = h(mid)
            if hm == 0.0:
                return mid
            if hm < 0.0:
                lo = mid
            else:
                hi = mid
        return lo


@dataclass(frozen=True)
class Geometric(OffspringDistribution):
    """``p_k = alpha * beta**(k-1)`` for ``k >= 1``, ``p_0 = 1 - alpha/(1-beta)``."""

    alpha: float
    beta: float
    truncation_cap: int | None = field(default=None, compare=False)

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        if not (0.0 <= b < 1.0) or a < 0.0:
            raise DomainError(f"need alpha >= 0 and 0 <= beta < 1, got ({a}, {b})")
        if a / (1.0 - b) > 1.0 + PROB_TOL:
            raise DomainError(f"alpha/(1-beta) = {a / (1.0 - b)!r} exceeds 1")
        if a >= 1.0:
            raise DomainError("p_1 must be < 1")

    @classmethod
    def critical(cls, beta: float) -> "Geometric":
        """The critical member ``alpha = (1-beta)**2`` (so ``p_0 = beta``)."""
        beta = float(beta)
        if not 0.0 < beta < 1.0:
            raise DomainError("critical geometric needs 0 < beta < 1")
        return cls((1.0 - beta) ** 2, beta)

    def pmf_array(self, kmax):
        k = np.arange(kmax + 1)
        out = self.alpha * np.power(self.beta, np.maximum(k - 1, 0).astype(float))
        out[0] = self.p0
        return out

    def pgf(self, s):
        s = np.asarray(s, dtype=float)
        return self.p0 + self.alpha * s / (1.0 - self.beta * s)

    def pgf_prime(self, s):
        s = np.asarray(s, dtype=float)
        return self.alpha / (1.0 - self.beta * s) ** 2

    def divided_difference(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self.alpha / ((1.0 - self.beta * x) * (1.0 - self.beta * y))
        return float(out) if out.ndim == 0 else out

    def pruned(self, u):
        u = float(u)
        if u * self.beta >= 1.0:
            raise DomainError(f"u={u!r} is beyond the radius of convergence")
        return Geometric(self.alpha, u * self.beta)

    def tail_cutoff(self):
        a, b = self.alpha, self.beta
        if b == 0.0:
            return 1
        k = 1
        while a * b**k * (k + 1) / (1.0 - b) ** 2 >= TAIL_EPS:
            k += 1
        return k

    def literal(self):
        return f"geometric:{self.alpha!r},{self.beta!r}"

    @property
    def p0(self):
        return max(1.0 - self.alpha / (1.0 - self.beta), 0.0)

    @property
    def mean(self):
        return self.alpha / (1.0 - self.beta) ** 2

    @property
    def max_parameter(self):
        if self.beta == 0.0:
            return math.inf
        return (1.0 - self.alpha) / self.beta

    @cached_property
    def critical_horizon(self):
        # alpha / (1 - u beta)^2 <= 1
        if self.beta == 0.0:
            return math.inf
        return min((1.0 - math.sqrt(self.alpha)) / self.beta, self.max_parameter)


def zeta3_example(cap: int = 200) -> FiniteSupport:
    """Critical law ``p_k = (6/pi^2) k^-3`` cut at ``cap``."""
    c = 6.0 / math.pi**2
    return FiniteSupport.truncated(lambda k: c / k**3, cap)


_FINITE_RE = re.compile(r"^finite:\[(.*)\]$")
_GEOM_RE = re.compile(r"^geometric:(.+)$")


def parse_distribution(text: str) -> OffspringDistribution:
    """Parse ``finite:[p0,p1,...]``, ``geometric:beta`` or ``geometric:alpha,beta``.

    ``geometric:beta`` is the critical member of the family.
    """
    text = text.strip().replace(" ", "")
    try:
        m = _FINITE_RE.match(text)
        if m:
            items = [x for x in m.group(1).split(",") if x]
            return FiniteSupport(tuple(float(x) for x in items))
        m = _GEOM_RE.match(text)
        if m:
            parts = m.group(1).split(",")
            if len(parts) == 1:
                return Geometric.critical(float(parts[0]))
            if len(parts) == 2:
                return Geometric(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ParseError(f"bad distribution literal {text!r}: {exc}") from exc
    raise ParseError(f"bad distribution literal {text!r}")


# --- scalar functions of the pruning parameter -------------------------------


def check_parameter(d: OffspringDistribution, u: float) -> float:
    u = float(u)
    ubar = d.max_parameter
    if not (u >= 0.0 and u <= ubar * (1.0 + PROB_TOL)):
        raise DomainError(f"u={u!r} outside [0, {ubar!r}]")
    return min(u, ubar)


def prune_distribution(d: OffspringDistribution, u: float) -> OffspringDistribution:
    return d.pruned(check_parameter(d, u))


def pruned_pgf(d: OffspringDistribution, u: float, s):
    """``g_u(s) = 1 - g(u)/u + g(us)/u``.

    Evaluated as the pgf of ``p^(u)``, which is the same function written
    without the division by ``u`` (that form cancels badly for small ``u``).
    """
    u = check_parameter(d, u)
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s > 1.0)):
        raise DomainError("s must lie in [0, 1]")
    out = np.asarray(d.pruned(u).pgf(s), dtype=float)
    return float(out) if out.ndim == 0 else out


def mean_at(d: OffspringDistribution, u: float) -> float:
    mu = d.pruned(check_parameter(d, u)).mean
    if not math.isfinite(mu):
        raise NumericError(f"mean diverges at u={u!r}")
    return mu


def max_parameter(d: OffspringDistribution) -> float:
    return d.max_parameter


def extinction_probability(d: OffspringDistribution, u: float) -> float:
    """Least non-negative fixed point of ``g_u``.

    ``1`` is always a fixed point, so any other one solves
    ``(g_u(1) - g_u(s)) / (1 - s) = 1``. The left side increases in ``s``
    from ``1 - p_0^(u)`` to ``mu(u)``, and bisection on it stays
    well-conditioned as the two roots merge at criticality. Iterating ``g_u``
    directly loses about half the digits there.
    """
    du = prune_distribution(d, u)
    if du.mean <= 1.0:
        return 1.0
    if du.p0 <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if du.divided_difference(1.0, mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return lo if abs(float(du.pgf(lo)) - lo) <= abs(float(du.pgf(hi)) - hi) else hi


def extinction_probabilities(d: OffspringDistribution, us) -> np.ndarray:
    """:func:`extinction_probability` over an array of parameters.

    Same bisection in ``s``, run on all parameters at once with the pruned
    weights ``p_k u^(k-1)`` laid out as a matrix.
    """
    us = np.asarray(us, dtype=float)
    flat = us.ravel()
    ubar = d.max_parameter
    if flat.size == 0:
        return np.ones_like(us)
    if not (np.all(flat >= 0.0) and np.all(flat <= ubar * (1.0 + PROB_TOL))):
        raise DomainError(f"parameters outside [0, {ubar!r}]")
    flat = np.minimum(flat, ubar)
    K = max(d.tail_cutoff(), d.pruned(float(flat.max())).tail_cutoff())
    pk = d.pmf_array(K)[1:]
    ks = np.arange(1, pk.size + 1)
    w = pk[None, :] * np.power(flat[:, None], ks - 1)
    mean = w @ ks
    p0 = 1.0 - w.sum(axis=1)
    out = np.ones(flat.size)
    out[(mean > 1.0) & (p0 <= 0.0)] = 0.0
    rows = np.flatnonzero((mean > 1.0) & (p0 > 0.0))
    if rows.size:
        w = w[rows]
        lo = np.zeros(rows.size)
        hi = np.ones(rows.size)

        def dd(s):
            # sum_k w_k (1 + s + ... + s^(k-1))
            h = np.ones_like(s)
            sk = np.ones_like(s)
            acc = w[:, 0] * h
            for j in range(1, ks.size):
                sk = sk * s
                h = h + sk
                acc = acc + w[:, j] * h
            return acc

        for _ in range(200):
            mid = 0.5 * (lo + hi)
            active = (mid > lo) & (mid < hi)
            if not np.any(active):
                break
            left = dd(mid) < 1.0
            lo = np.where(active & left, mid, lo)
            hi = np.where(active & ~left, mid, hi)

        def resid(s):
            return np.abs(p0[rows] + (w * np.power(s[:, None], ks)).sum(axis=1) - s)

        out[rows] = np.where(resid(lo) <= resid(hi), lo, hi)
    return out.reshape(us.shape)


def extinction_probability_iterative(d: OffspringDistribution, u: float) -> float:
    """Plain monotone iteration ``s <- g_u(s)`` from ``0`` with Newton steps.

    Kept as an independent cross-check of :func:`extinction_probability`.
    It is accurate away from criticality only.
    """
    du = prune_distribution(d, u)
    if du.mean <= 1.0:
        return 1.0
    if du.p0 <= 0.0:
        return 0.0
    s = 0.0
    for it in range(MAX_ITER):
        gs = float(du.pgf(s))
        resid = gs - s
        if resid <= EXTINCTION_TOL * 1e-2:
            return s
        if it < 32:
            nxt = gs
        else:
            slope = float(du.pgf_prime(s)) - 1.0
            nxt = s - resid / slope if slope < 0.0 else gs
            if not (s < nxt <= 1.0):
                nxt = gs
        if nxt <= s:
            if abs(resid) <= EXTINCTION_TOL:
                return s
            raise NumericError(f"extinction iteration stalled at u={u!r}")
        s = nxt
    raise NumericError(f"extinction iteration did not converge at u={u!r}")


def survival(d: OffspringDistribution, u: float) -> float:
    return 1.0 - extinction_probability(d, u)


def conjugate(d: OffspringDistribution, u: float) -> float:
    """``u_hat = u F(u)``."""
    return float(u) * extinction_probability(d, u)


def _inverse_bisect(d, f, lo, hi):
    """Vectorised solution ``u`` of ``(g(u) - g(f u)) / (u - f u) = 1`` on ``[lo, hi]``.

    For ``0 <= f < 1`` this holds exactly where ``F(u) = f``, and the left
    side increases in ``u``.
    """
    f = np.asarray(f, dtype=float)
    lo = np.full_like(f, lo)
    hi = np.full_like(f, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        right = np.asarray(d.divided_difference(mid, f * mid)) < 1.0
        lo = np.where(active & right, mid, lo)
        hi = np.where(active & ~right, mid, hi)
    return 0.5 * (lo + hi)


def survival_inverse(d: OffspringDistribution, x):
    """Return ``u in [1, u_bar]`` with ``1 - F(u) = x`` (vectorised over ``x``)."""
    xs = np.asarray(x, dtype=float)
    ubar = d.max_parameter
    if not math.isfinite(ubar):
        raise DomainError("survival inverse needs a finite u_bar")
    lo_val = survival(d, 1.0)
    hi_val = survival(d, ubar)
    if np.any(xs < lo_val - PROB_TOL) or np.any(xs > hi_val + PROB_TOL):
        raise DomainError(f"x outside attainable range [{lo_val!r}, {hi_val!r}]")
    out = _inverse_bisect(d, 1.0 - np.clip(xs, 0.0, 1.0), 1.0, ubar)
    out = np.where(xs <= lo_val, 1.0, out)
    out = np.where(xs >= hi_val, ubar, out)
    return float(out) if out.ndim == 0 else out


def ascension_density(d: OffspringDistribution, u: float) -> float:
    """``-F'(u)`` from the implicit-function expression for ``F'``."""
    u = float(u)
    ubar = d.max_parameter
    if not 1.0 < u < ubar:
        raise DomainError(f"density defined on (1, {ubar!r}), got {u!r}")
    F = extinction_probability(d, u)
    gph = float(d.pgf_prime(u * F))
    denom = u * (1.0 - gph)
    if abs(1.0 - gph) < 1e-14:
        raise NumericError(f"degenerate denominator g'(u_hat) = 1 at u={u!r}")
    dF = (1.0 - float(d.pgf_prime(u)) - F * (1.0 - gph)) / denom
    return -dF


def _finite_from_array(arr: np.ndarray, cap: int | None, fold_into: int = 0) -> FiniteSupport:
    arr = np.clip(np.asarray(arr, dtype=float), 0.0, None)
    mask = np.ones(arr.size, dtype=bool)
    mask[fold_into] = False
    arr[fold_into] = max(1.0 - math.fsum(arr[mask]), 0.0)
    return FiniteSupport(tuple(arr), truncation_cap=cap)


def size_biased(d: OffspringDistribution) -> FiniteSupport:
    """``p*_k = k p_k / mu``; infinite supports are cut at :meth:`tail_cutoff`."""
    mu = d.mean
    if mu <= 0.0:
        raise DomainError("size-biasing needs a positive mean")
    K = d.tail_cutoff()
    k = np.arange(K + 1)
    arr = k * d.pmf_array(K) / mu
    cap = None if isinstance(d, FiniteSupport) and d.truncation_cap is None else K
    return _finite_from_array(arr, cap, fold_into=K)


def bridge_distribution(d: OffspringDistribution, alpha: float, beta: float) -> FiniteSupport:
    """First-generation law of the modified tree grafted between ``alpha`` and ``beta``."""
    alpha = check_parameter(d, alpha)
    beta = check_parameter(d, beta)
    if alpha > beta:
        raise DomainError("need alpha <= beta")
    pa = d.pruned(alpha).p0
    if pa <= 0.0:
        raise DomainError(f"p0 at alpha={alpha!r} is zero")
    if alpha == beta:
        return FiniteSupport((1.0,))
    db = d.pruned(beta)
    K = db.tail_cutoff()
    pb = db.pmf_array(K)
    k = np.arange(K + 1)
    factor = 1.0 - np.power(alpha / beta, np.maximum(k - 1, 0).astype(float))
    arr = factor * pb / pa
    arr[0] = pb[0] / pa
    cap = None if isinstance(db, FiniteSupport) and db.truncation_cap is None else K
    return _finite_from_array(arr, cap, fold_into=0)
