"""Numerical primitives: normal CDF/quantile, log binomial coefficients and
seeded, substream-capable random sources.

``normal_cdf`` returns a :class:`Probability`, a ``float`` that also carries
its complement computed without cancellation. ``normal_quantile`` uses the
complement when it is available, so upper-tail round trips keep full
precision even where ``1 - p`` is below the resolution of a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtr

ArrayLike = Union[float, np.ndarray]

_MASK64 = (1 << 64) - 1


class Probability(float):
    """A float constrained to ``[0, 1]``.

    ``complement`` is ``1 - value``; when produced by :func:`normal_cdf` it is
    evaluated directly rather than by subtraction.
    """

    complement: float

    def __new__(cls, value: float, complement: float | None = None) -> "Probability":
        value = float(value)
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {value!r}")
        obj = super().__new__(cls, value)
        if complement is None:
            complement = 1.0 - value
        elif not 0.0 <= complement <= 1.0:
            raise ValueError(f"complement must lie in [0, 1], got {complement!r}")
        obj.complement = float(complement)
        return obj

    def __repr__(self) -> str:
        return f"Probability({float(self)!r})"


def as_probability(value: float, name: str = "probability") -> Probability:
    """Validate ``value`` and return it as a :class:`Probability`."""
    if isinstance(value, Probability):
        return value
    try:
        return Probability(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}") from None


# ---------------------------------------------------------------------------
# Standard normal distribution
# ---------------------------------------------------------------------------

def phi_lower(x: ArrayLike) -> ArrayLike:
    """Vectorised standard normal CDF with the reflection-symmetric branch."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0.0, ndtr(x), 1.0 - ndtr(-x))
    return out if out.ndim else float(out)


def phi_upper(x: ArrayLike) -> ArrayLike:
    """Vectorised standard normal survival function ``1 - Phi(x)``."""
    x = np.asarray(x, dtype=float)
    out = ndtr(-x)
    return out if out.ndim else float(out)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> Probability:
    """Standard normal CDF ``Phi(x)``.

    For ``x > 0`` the value is formed as ``1 - Phi(-x)`` so that
    ``normal_cdf(x) + normal_cdf(-x) == 1`` up to one rounding.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"normal_cdf requires a finite argument, got {x!r}")
    upper = float(ndtr(-x))
    lower = float(ndtr(x)) if x <= 0.0 else 1.0 - upper
    return Probability(lower, upper)


# Rational approximation coefficients for the inverse normal CDF (Acklam).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _quantile_initial(p: float) -> float:
    """Acklam's approximation, relative error about 1.15e-9, for ``p <= 0.5``."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return num / den
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def _lower_quantile(p: float) -> float:
    # Solve Phi(x) = p for p <= 0.5 (x <= 0), refined by Newton on the lower tail.
    x = _quantile_initial(p)
    for _ in range(2):
        dens = normal_pdf(x)
        if dens == 0.0:
            break
        step = (float(ndtr(x)) - p) / dens
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` on the open interval ``(0, 1)``."""
    prob = as_probability(p, "p")
    if prob == 0.0 or prob == 1.0:
        raise ValueError(f"normal_quantile is undefined at p={float(prob)!r}")
    if prob <= 0.5:
        return _lower_quantile(float(prob))
    upper = prob.complement
    if upper <= 0.0:
        raise ValueError(f"normal_quantile is undefined at p={float(prob)!r}")
    return -_lower_quantile(upper)


# ---------------------------------------------------------------------------
# Combinatorics
# ---------------------------------------------------------------------------

_SMALL_K = 30


def log_binomial_coefficient(n: int, k: int) -> float:
    """Natural log of ``C(n, k)``."""
    n, k = int(n), int(k)
    if n < 0 or k < 0:
        raise ValueError(f"n and k must be non-negative, got n={n}, k={k}")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    k = min(k, n - k)
    if k == 0:
        return 0.0
    if k <= _SMALL_K:
        # product form avoids cancellation between large lgamma terms
        return math.fsum(math.log((n - k + i) / i) for i in range(1, k + 1))
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binomial_pmf_vector(n: int, p: float) -> np.ndarray:
    """Binomial(n, p) probabilities for k = 0..n, handling p in {0, 1}."""
    p = float(as_probability(p, "p"))
    if p == 0.0 or p == 1.0:
        out = np.zeros(n + 1)
        out[0 if p == 0.0 else n] = 1.0
        return out
    log_p, log_q = math.log(p), math.log1p(-p)
    logs = np.array(
        [log_binomial_coefficient(n, k) + k * log_p + (n - k) * log_q for k in range(n + 1)]
    )
    return np.exp(logs)


# ---------------------------------------------------------------------------
# Random sources
# ---------------------------------------------------------------------------

def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RandomSource:
    """Immutable descriptor of a reproducible random stream.

    Values are generated by a counter-based Philox generator keyed from
    ``(seed, stream_id)``; :meth:`substream` derives child descriptors from an
    index, so results never depend on the order in which streams are consumed.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def substream(self, index: int) -> "RandomSource":
        if index < 0:
            raise ValueError(f"substream index must be non-negative, got {index}")
        child = _splitmix64(self.stream_id ^ _splitmix64(index & _MASK64))
        return RandomSource(self.seed, child)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(seq))


def _check_binomial_args(n: int, p: float) -> tuple[int, float]:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValueError(f"n must be a non-negative integer, got {n!r}")
    return int(n), float(as_probability(p, "p"))


def binomial_sample(n: int, p: float, source: RandomSource) -> int:
    """One Binomial(n, p) draw from the start of ``source``'s stream.

    numpy's sampler uses inversion when ``n * min(p, 1 - p) <= 30`` and the
    BTPE squeeze/accept method above that.
    """
    n, p = _check_binomial_args(n, p)
    if n == 0:
        return 0
    return int(source.generator().binomial(n, p))


def binomial_samples(n: int, p: float, source: RandomSource, size: int) -> np.ndarray:
    """``size`` independent Binomial(n, p) draws from ``source``'s stream."""
    n, p = _check_binomial_args(n, p)
    if n == 0:
        return np.zeros(size, dtype=np.int64)
    return source.generator().binomial(n, p, size=size).astype(np.int64)
