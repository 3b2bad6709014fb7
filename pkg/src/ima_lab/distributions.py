"""Univariate laws, factorial source distributions, and spherically
symmetric column samplers.

Laws expose ``pdf``/``cdf``/``quantile``/``sample`` plus a JSON-friendly
``to_config``/``from_config`` pair used by the CLI schema.  Closed forms
are used wherever they exist; the beta-shaped law is backed by a
quantile table built with trapezoid quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import (
    DimensionMismatchError,
    DomainError,
    RankDeficientError,
    ValidationError,
)
from .seeding import generator

_SQRT2 = math.sqrt(2.0)

# Generic numeric quantile fallback: bracket mean +/- 40 scale units,
# bisection to this tolerance with a hard iteration cap.
_BISECT_TOL = 1e-13
_BISECT_MAX_ITER = 200


def _check_u(u: float) -> float:
    u = float(u)
    if not 0.0 < u < 1.0:
        raise DomainError(f"quantile argument must lie in (0, 1), got {u}")
    return u


class UnivariateLaw:
    """Base class; subclasses fill in pdf/cdf and either a closed-form
    quantile or rely on the bisection fallback."""

    #: open support (lo, hi); infinities allowed
    support: tuple[float, float] = (-math.inf, math.inf)

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u: float) -> float:
        u = _check_u(u)
        return self._bisect_quantile(u)

    def _bracket(self) -> tuple[float, float]:
        lo, hi = self.support
        center = getattr(self, "location", 0.0)
        scale = getattr(self, "scale", 1.0)
        lo = max(lo, center - 40.0 * scale)
        hi = min(hi, center + 40.0 * scale)
        return lo, hi

    def _bisect_quantile(self, u: float) -> float:
        """Bracketed bisection refined by Newton steps from the density."""
        lo, hi = self._bracket()
        x = 0.5 * (lo + hi)
        for _ in range(_BISECT_MAX_ITER):
            c = float(self.cdf(x))
            if abs(c - u) <= _BISECT_TOL:
                return x
            if c < u:
                lo = x
            else:
                hi = x
            density = float(self.pdf(x))
            step = (u - c) / density if density > 0.0 else 0.0
            newton = x + step
            # fall back to the midpoint whenever Newton leaves the bracket
            x = newton if lo < newton < hi else 0.5 * (lo + hi)
            if hi - lo <= _BISECT_TOL * max(1.0, abs(x)):
                break
        return x

    def sample(self, n: int, seed: int) -> np.ndarray:
        """n i.i.d. draws via inverse-CDF sampling, deterministic per seed."""
        gen = generator(seed)
        u = gen.random(n)
        # keep u strictly inside (0, 1)
        u = np.clip(u, 1e-16, 1.0 - 1e-16)
        return self.quantile_array(u)

    def quantile_array(self, u: np.ndarray) -> np.ndarray:
        return np.array([self.quantile(float(ui)) for ui in np.asarray(u).ravel()]).reshape(np.shape(u))

    def to_config(self) -> dict:
        raise NotImplementedError

    @property
    def location(self) -> float:
        return 0.0

    @property
    def scale(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Uniform(UnivariateLaw):
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise DomainError("uniform law requires b > a")
        object.__setattr__(self, "support", (self.a, self.b))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)

    def quantile(self, u: float) -> float:
        u = _check_u(u)
        return self.a + (self.b - self.a) * u

    def quantile_array(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    @property
    def location(self):
        return 0.5 * (self.a + self.b)

    @property
    def scale(self):
        return self.b - self.a

    def to_config(self):
        return {"kind": "uniform", "params": {"a": self.a, "b": self.b}}


@dataclass(frozen=True)
class Gaussian(UnivariateLaw):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("gaussian law requires sigma > 0")

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return special.ndtr(z)

    def quantile(self, u: float) -> float:
        u = _check_u(u)
        return self.mu + self.sigma * float(special.ndtri(u))

    def quantile_array(self, u):
        return self.mu + self.sigma * special.ndtri(np.asarray(u, dtype=float))

    @property
    def location(self):
        return self.mu

    @property
    def scale(self):
        return self.sigma

    def to_config(self):
        return {"kind": "gaussian", "params": {"mu": self.mu, "sigma": self.sigma}}


@dataclass(frozen=True)
class Laplace(UnivariateLaw):
    mu: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("laplace law requires b > 0")

    def pdf(self, x):
        z = np.abs(np.asarray(x, dtype=float) - self.mu) / self.b
        return np.exp(-z) / (2.0 * self.b)

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.b
        return np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))

    def quantile(self, u: float) -> float:
        u = _check_u(u)
        if u < 0.5:
            return self.mu + self.b * math.log(2.0 * u)
        return self.mu - self.b * math.log(2.0 * (1.0 - u))

    def quantile_array(self, u):
        u = np.asarray(u, dtype=float)
        lower = self.mu + self.b * np.log(2.0 * u)
        upper = self.mu - self.b * np.log(2.0 * (1.0 - u))
        return np.where(u < 0.5, lower, upper)

    @property
    def location(self):
        return self.mu

    @property
    def scale(self):
        return self.b

    def to_config(self):
        return {"kind": "laplace", "params": {"mu": self.mu, "b": self.b}}


@dataclass(frozen=True)
class Chi(UnivariateLaw):
    """Chi law with k degrees of freedom: the norm of a standard Gaussian
    vector in R^k.  Used as the default radial law of spherical samplers."""

    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("chi law requires k >= 1")
        object.__setattr__(self, "support", (0.0, math.inf))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.k
        log_norm = (1.0 - k / 2.0) * math.log(2.0) - special.gammaln(k / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = log_norm + (k - 1) * np.log(x) - x * x / 2.0
        return np.where(x > 0, np.exp(logp), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.gammainc(self.k / 2.0, x * x / 2.0), 0.0)

    def quantile(self, u: float) -> float:
        u = _check_u(u)
        return math.sqrt(2.0 * float(special.gammaincinv(self.k / 2.0, u)))

    def quantile_array(self, u):
        return np.sqrt(2.0 * special.gammaincinv(self.k / 2.0, np.asarray(u, dtype=float)))

    @property
    def location(self):
        return math.sqrt(self.k)

    @property
    def scale(self):
        return 1.0

    def to_config(self):
        return {"kind": "chi", "params": {"k": self.k}}


@dataclass(frozen=True)
class TabulatedBeta(UnivariateLaw):
    """Beta-shaped law on (0, 1) backed by a quantile table.

    The CDF is tabulated by trapezoid quadrature of the density
    x^(alpha-1) (1-x)^(beta-1) / B(alpha, beta) on a uniform grid.
    alpha, beta >= 1 keeps the density finite everywhere.
    """

    alpha: float = 2.0
    beta: float = 2.0
    points: int = 4097
    _grid: np.ndarray = field(init=False, repr=False, compare=False)
    _cdf_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.alpha < 1.0 or self.beta < 1.0:
            raise DomainError("beta-shaped law requires alpha >= 1 and beta >= 1 (finite density)")
        if self.points < 65:
            raise DomainError("quantile table needs at least 65 points")
        object.__setattr__(self, "support", (0.0, 1.0))
        grid = np.linspace(0.0, 1.0, self.points)
        dens = self._raw_pdf(grid)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_cdf_table", cdf)

    def _raw_pdf(self, x):
        x = np.asarray(x, dtype=float)
        log_norm = -special.betaln(self.alpha, self.beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = log_norm + (self.alpha - 1.0) * np.log(x) + (self.beta - 1.0) * np.log1p(-x)
        out = np.exp(logp)
        out = np.where((x < 0) | (x > 1), 0.0, out)
        # alpha == 1 (or beta == 1) gives 0*log(0) at the edge; define by limit
        return np.where(np.isnan(out), 1.0 / math.exp(special.betaln(self.alpha, self.beta)), out)

    def pdf(self, x):
        return self._raw_pdf(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self._grid, self._cdf_table)

    def quantile(self, u: float) -> float:
        u = _check_u(u)
        return float(np.interp(u, self._cdf_table, self._grid))

    def quantile_array(self, u):
        return np.interp(np.asarray(u, dtype=float), self._cdf_table, self._grid)

    @property
    def location(self):
        return self.alpha / (self.alpha + self.beta)

    @property
    def scale(self):
        return 1.0

    def to_config(self):
        return {"kind": "beta", "params": {"alpha": self.alpha, "beta": self.beta, "points": self.points}}


_LAW_KINDS = {
    "uniform": (Uniform, ("a", "b")),
    "gaussian": (Gaussian, ("mu", "sigma")),
    "laplace": (Laplace, ("mu", "b")),
    "chi": (Chi, ("k",)),
    "beta": (TabulatedBeta, ("alpha", "beta", "points")),
}


def law_from_config(config: dict) -> UnivariateLaw:
    """Build a law from a ``{"kind": ..., "params": {...}}`` object."""
    if not isinstance(config, dict) or set(config) - {"kind", "params"}:
        raise ValidationError(f"law config must have only 'kind' and 'params' keys, got {config!r}")
    kind = config.get("kind")
    if kind not in _LAW_KINDS:
        raise ValidationError(f"unknown law kind {kind!r}; expected one of {sorted(_LAW_KINDS)}")
    cls, allowed = _LAW_KINDS[kind]
    params = config.get("params", {})
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown parameters {sorted(unknown)} for law kind {kind!r}")
    return cls(**params)


@dataclass(frozen=True)
class FactorialDistribution:
    """Product of independent univariate laws; joint density is the product."""

    components: tuple[UnivariateLaw, ...]

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValidationError("factorial distribution needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def dim(self) -> int:
        return len(self.components)

    def pdf(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        return float(np.prod([law.pdf(si) for law, si in zip(self.components, s)]))

    def sample(self, n: int, seed: int) -> np.ndarray:
        """(n, d) array of i.i.d. draws; component i uses sub-stream i of the seed."""
        if n < 1:
            raise DomainError("sample count must be >= 1")
        cols = [law.sample(n, substream_seed) for law, substream_seed in
                zip(self.components, (_component_seed(seed, i) for i in range(self.dim)))]
        return np.column_stack(cols)

    def to_config(self):
        return [law.to_config() for law in self.components]

    @staticmethod
    def from_config(configs) -> "FactorialDistribution":
        return FactorialDistribution(tuple(law_from_config(c) for c in configs))

    @staticmethod
    def iid(law: UnivariateLaw, d: int) -> "FactorialDistribution":
        return FactorialDistribution((law,) * d)


def _component_seed(seed: int, i: int) -> int:
    from .seeding import substream

    return substream(seed, i)


def sample_factorial(p_s: FactorialDistribution, n: int, seed: int) -> np.ndarray:
    """n i.i.d. latent draws from a factorial source distribution."""
    return p_s.sample(n, seed)


@dataclass(frozen=True)
class SphericalSampler:
    """Draws columns R * U with U uniform on the unit sphere of R^m and R
    an independent non-negative radial variable.

    ``radial_law=None`` pins the radius to 1 (uniform on the sphere).  The
    default factory uses the chi(m) radius, which makes each column a
    standard Gaussian vector in R^m.
    """

    ambient_dim: int
    radial_law: UnivariateLaw | None = None

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise DomainError("ambient dimension must be >= 1")

    @staticmethod
    def standard_gaussian(m: int) -> "SphericalSampler":
        return SphericalSampler(m, Chi(m))

    @staticmethod
    def unit(m: int) -> "SphericalSampler":
        return SphericalSampler(m, None)

    def sample_columns(self, d: int, seed: int) -> np.ndarray:
        """(m, d) matrix with i.i.d. spherically symmetric columns."""
        gen = generator(seed)
        g = gen.standard_normal((self.ambient_dim, d))
        norms = np.linalg.norm(g, axis=0)
        directions = g / norms
        if self.radial_law is None:
            return directions
        u = np.clip(gen.random(d), 1e-16, 1.0 - 1e-16)
        radii = self.radial_law.quantile_array(u)
        return directions * radii

    def to_config(self):
        radial = None if self.radial_law is None else self.radial_law.to_config()
        return {"ambient_dim": self.ambient_dim, "radial": radial}


def sample_isotropic_matrix(
    m: int,
    d: int,
    sampler: SphericalSampler | None = None,
    seed: int = 0,
    rank_tol: float = 1e-10,
    max_attempts: int = 3,
) -> np.ndarray:
    """m x d matrix with i.i.d. spherically symmetric columns, verified to
    have full column rank against the relative singular-value threshold.

    A failed rank check resamples with a derived sub-seed up to
    ``max_attempts`` times before raising RankDeficientError.
    """
    if m < d:
        raise DimensionMismatchError(f"need m >= d, got m={m}, d={d}")
    if sampler is None:
        sampler = SphericalSampler.standard_gaussian(m)
    if sampler.ambient_dim != m:
        raise DimensionMismatchError(
            f"sampler ambient dimension {sampler.ambient_dim} does not match m={m}"
        )
    from .seeding import substream

    for attempt in range(max_attempts):
        attempt_seed = seed if attempt == 0 else substream(seed, 0xA11E, attempt)
        J = sampler.sample_columns(d, attempt_seed)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] > rank_tol * sv[0]:
            return J
    raise RankDeficientError(
        f"sampled matrix failed the rank check {max_attempts} times (m={m}, d={d}, seed={seed})"
    )
