"""Valuation models, profile sampling and buyer best responses.

Dummy items (value identically 0) are a structural flag: ``None`` in a
marginals list, or a zero multiplier for separable models. They never carry
a ``Distribution``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import Distribution, DomainError, hazard_monotone_check, parse_distribution


class ValidationError(ValueError):
    pass


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_marginals(marginals):
    out = tuple(marginals)
    if not out:
        raise ValidationError("at least one item is required")
    for d in out:
        if d is None:
            continue
        if not isinstance(d, Distribution):
            raise ValidationError(f"marginal {d!r} is not a Distribution")
        ok, where = hazard_monotone_check(d, 200)
        if not ok:
            raise DomainError(f"{d} fails the MHR check near x={where}")
    return out


class ValuationModel:
    """Common interface: ``m``, ``dummy_mask`` and batched sampling."""

    kind: str = ""
    unit_demand: bool = True

    @property
    def m(self) -> int:
        raise NotImplementedError

    @property
    def dummy_mask(self) -> np.ndarray:
        raise NotImplementedError

    def sample_values(self, rng: np.random.Generator, trials: int, n: int):
        """Return ``(values, types)`` with values of shape (trials, n, m).

        ``types`` is (trials, n) for separable models and None otherwise.
        """
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class _MarginalsModel(ValuationModel):
    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", _check_marginals(self.marginals))

    @property
    def m(self):
        return len(self.marginals)

    @property
    def dummy_mask(self):
        return np.array([d is None for d in self.marginals])

    def sample_values(self, rng, trials, n):
        vals = np.zeros((trials, n, self.m))
        for j, d in enumerate(self.marginals):
            if d is not None:
                vals[:, :, j] = d.sample(rng, (trials, n))
        return vals, None

    def spec(self):
        return f"{self.kind}: [" + ", ".join("dummy" if d is None else d.spec() for d in self.marginals) + "]"


@dataclass(frozen=True)
class IndependentUnitDemand(_MarginalsModel):
    """Unit-demand buyers with independent per-item values."""

    kind = "independent"
    unit_demand = True


@dataclass(frozen=True)
class AdditiveIndependent(_MarginalsModel):
    """Additive buyers: v_i(S) is the sum of independent per-item values."""

    kind = "additive"
    unit_demand = False


@dataclass(frozen=True)
class Separable(ValuationModel):
    """v_ij = alpha_j * t_i with a scalar type t_i drawn from ``type_dist``."""

    alphas: tuple
    type_dist: Distribution

    kind = "separable"
    unit_demand = True

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        if not a:
            raise ValidationError("at least one item is required")
        if any(x < 0 or not math.isfinite(x) for x in a):
            raise ValidationError(f"alphas must be finite and non-negative: {a}")
        if any(a[j] < a[j + 1] for j in range(len(a) - 1)):
            raise ValidationError(f"alphas must be non-increasing: {a}")
        _check_marginals([self.type_dist])
        object.__setattr__(self, "alphas", a)

    @property
    def m(self):
        return len(self.alphas)

    @property
    def dummy_mask(self):
        return np.asarray(self.alphas) == 0.0

    @property
    def marginals(self):
        """Per-item marginals are scaled copies of the type law; only used for
        display, since scaling a family is not closed in general."""
        return tuple(None if a == 0 else self.type_dist for a in self.alphas)

    def sample_values(self, rng, trials, n):
        types = self.type_dist.sample(rng, (trials, n))
        vals = types[:, :, None] * np.asarray(self.alphas)[None, None, :]
        return vals, types

    def spec(self):
        return f"separable: alphas=[{', '.join(f'{a:g}' for a in self.alphas)}], type={self.type_dist.spec()}"


@dataclass(frozen=True)
class ValuationProfile:
    values: np.ndarray = field(repr=False)
    model: ValuationModel
    types: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PurchaseDecision:
    buyer: int
    bundle: tuple
    paid: float
    value: float

    @property
    def utility(self) -> float:
        return self.value - self.paid


def sample_profile(model: ValuationModel, n: int, rng) -> ValuationProfile:
    """Draw n i.i.d. buyers; deterministic given (model, n, seed)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    vals, types = model.sample_values(as_generator(rng), 1, n)
    return ValuationProfile(vals[0], model, None if types is None else types[0])


def best_response(model: ValuationModel, buyer_values, prices, buyer: int = 0) -> PurchaseDecision:
    """Utility-maximising purchase at the posted prices.

    ``prices`` may hold +inf for items that are not available. Unit-demand
    buyers take the first index among maximal utilities when that utility is
    strictly positive; additive buyers take every item with v_j > p_j.
    """
    v = np.asarray(buyer_values, dtype=float)
    p = np.asarray(prices, dtype=float)
    if v.shape != p.shape:
        raise ValidationError(f"values {v.shape} and prices {p.shape} differ in length")
    if np.isnan(v).any() or np.isnan(p).any():
        raise ValidationError("NaN in values or prices")
    util = v - p
    if model.unit_demand:
        j = int(np.argmax(util))
        if util[j] > 0:
            return PurchaseDecision(buyer, (j,), float(p[j]), float(v[j]))
        return PurchaseDecision(buyer, (), 0.0, 0.0)
    bundle = np.flatnonzero(util > 0)
    return PurchaseDecision(buyer, tuple(int(j) for j in bundle), float(p[bundle].sum()), float(v[bundle].sum()))


def choose_unit_demand(values: np.ndarray, prices: np.ndarray) -> np.ndarray:
    """Batched unit-demand choice: item index per row, -1 for no purchase."""
    util = values - prices
    j = np.argmax(util, axis=1)
    best = np.take_along_axis(util, j[:, None], axis=1)[:, 0]
    return np.where(best > 0, j, -1)


def pad_to_square(model: ValuationModel, n: int) -> ValuationModel:
    """Add dummy items (or drop surplus separable items) so that m == n."""
    m = model.m
    if m == n:
        return model
    if isinstance(model, Separable):
        if m > n:
            return Separable(model.alphas[:n], model.type_dist)
        return Separable(model.alphas + (0.0,) * (n - m), model.type_dist)
    if m > n:
        raise ValidationError(f"cannot pad {m} items down to {n} buyers for {model.kind} models")
    return type(model)(model.marginals + (None,) * (n - m))


_LIST_RE = re.compile(r"\[(.*)\]")


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        parts.append("".join(cur).strip())
    return parts


def _parse_marginal_list(body: str) -> tuple:
    m = _LIST_RE.search(body)
    if not m:
        raise ValueError(f"expected a bracketed list of distributions, got {body!r}")
    out = []
    for item in _split_top(m.group(1)):
        out.append(None if item.lower() == "dummy" else parse_distribution(item))
    return tuple(out)


def parse_model(text: str) -> ValuationModel:
    """Parse the textual model grammar.

    ``independent: [exp(1), unif(0,2)]``,
    ``separable: alphas=[1,0.5], type=exp(1)``,
    ``additive: [exp(1), exp(1)]``.
    """
    head, sep, body = text.partition(":")
    if not sep:
        raise ValueError(f"model spec {text!r} lacks a 'kind:' prefix")
    kind = head.strip().lower()
    if kind in ("independent", "unit", "unit-demand"):
        return IndependentUnitDemand(_parse_marginal_list(body))
    if kind == "additive":
        return AdditiveIndependent(_parse_marginal_list(body))
    if kind == "separable":
        fields = {}
        for part in _split_top(body):
            key, eq, val = part.partition("=")
            if not eq:
                raise ValueError(f"separable field {part!r} is not key=value")
            fields[key.strip().lower()] = val.strip()
        unknown = set(fields) - {"alphas", "type"}
        if unknown or set(fields) != {"alphas", "type"}:
            raise ValueError(f"separable needs exactly alphas=[...] and type=...; got {sorted(fields)}")
        am = _LIST_RE.search(fields["alphas"])
        if not am:
            raise ValueError("alphas must be a bracketed list")
        alphas = tuple(float(a) for a in _split_top(am.group(1)))
        return Separable(alphas, parse_distribution(fields["type"]))
    raise ValueError(f"unknown model kind {kind!r}; expected independent, separable or additive")


def validate_finite(values: Sequence[float], what: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.isnan(arr).any():
        raise ValidationError(f"NaN in {what}")
    return arr
