"""Free-space optical channel: beam geometry, pointing jitter and turbulence.

Units are SI throughout: lengths in metres, angles in radians, and the
squared radial offset ``r = r_e**2`` in square metres.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DomainError, ValidationError
from .quadrature import QuadConfig, quad_finite, quad_semi_infinite
from .specfun import bessel_k_scaled, erf_fn, gammaln

__all__ = [
    "LinkGeometry",
    "TurbulenceParams",
    "ClampStats",
    "ETA_MAX",
    "beam_radius",
    "collection_fraction",
    "aperture_fraction",
    "safe_fraction",
    "pointing_transmissivity",
    "safe_zone_transmissivity",
    "eve_transmissivity",
    "gg_pdf",
    "gg_cdf",
    "gg_survival",
    "gg_quantile",
    "gg_sample",
    "offset_scale",
    "offset_pdf",
    "offset_cdf",
    "offset_sample",
    "bob_transmissivity",
    "clamp_eta",
    "make_rng",
]

# Largest transmissivity representable below 1; clamped eta_B never reaches 1.
ETA_MAX = float(np.nextafter(1.0, 0.0))
# Upper bound on the angular jitter for the small-angle offset model.
MAX_JITTER_RAD = 1e-2


@dataclass(frozen=True)
class LinkGeometry:
    """Physical link layout.

    Attributes:
        z_link: link length Z_L (m).
        aperture_radius: receiver lens radius r_a (m).
        safe_radius: safe-zone radius r_safe, lens plus guard ring (m).
        waist: transmitter beam waist w0 (m).
        wavelength: optical wavelength (m).
        jitter_sigma: per-axis angular pointing jitter (rad).
        rx_beam_radius: if set, imposes the receiver-plane beam radius
            w(Z_L) directly instead of propagating ``waist``.
    """

    z_link: float = 500.0
    aperture_radius: float = 0.05
    safe_radius: float = 0.15
    waist: float = 0.05
    wavelength: float = 1550e-9
    jitter_sigma: float = 50e-6
    rx_beam_radius: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("z_link", "aperture_radius", "safe_radius", "waist",
                     "wavelength", "jitter_sigma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"geometry.{name} must be finite and > 0, got {value}")
        if self.rx_beam_radius is not None and not (
            math.isfinite(self.rx_beam_radius) and self.rx_beam_radius > 0
        ):
            raise ValidationError(
                f"geometry.rx_beam_radius must be > 0 when set, got {self.rx_beam_radius}"
            )
        if self.safe_radius < self.aperture_radius:
            raise ValidationError(
                "geometry.safe_radius must be >= aperture_radius: the guard ring "
                f"surrounds the lens (got {self.safe_radius} < {self.aperture_radius})"
            )
        if self.jitter_sigma >= MAX_JITTER_RAD:
            raise ValidationError(
                f"geometry.jitter_sigma must be < {MAX_JITTER_RAD} rad (small-angle "
                f"model), got {self.jitter_sigma}"
            )

    def with_beam_radius(self, w: Optional[float]) -> "LinkGeometry":
        return dataclasses.replace(self, rx_beam_radius=w)


@dataclass(frozen=True)
class TurbulenceParams:
    """Gamma-Gamma shape parameters (alpha, beta)."""

    alpha: float = 4.2
    beta_gg: float = 1.4

    def __post_init__(self) -> None:
        for name in ("alpha", "beta_gg"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"turbulence.{name} must be finite and > 0, got {value}")


@dataclass
class ClampStats:
    """Counts eta_B values that had to be clamped below 1.

    Not thread-safe; each execution strand should own its own instance.
    """

    count: int = 0

    def record(self, n: int) -> None:
        if n:
            self.count += int(n)


def _check_offset(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("squared offset r must be >= 0")
    return arr


def _ret(value, like):
    return float(value) if np.ndim(like) == 0 else value


def beam_radius(geom: LinkGeometry) -> float:
    """Receiver-plane 1/e^2 beam radius w(Z_L)."""
    if geom.rx_beam_radius is not None:
        return geom.rx_beam_radius
    w0 = geom.waist
    zr_ratio = geom.wavelength * geom.z_link / (math.pi * w0 * w0)
    return w0 * math.sqrt(1.0 + zr_ratio * zr_ratio)


def collection_fraction(radius: float, w: float) -> float:
    """Power fraction ``erf(sqrt(2) radius / w)**2`` of a centred Gaussian beam."""
    if not (radius > 0 and w > 0):
        raise DomainError("collection_fraction needs radius > 0 and w > 0")
    return erf_fn(math.sqrt(2.0) * radius / w) ** 2


def aperture_fraction(geom: LinkGeometry) -> float:
    return collection_fraction(geom.aperture_radius, beam_radius(geom))


def safe_fraction(geom: LinkGeometry) -> float:
    return collection_fraction(geom.safe_radius, beam_radius(geom))


def _misalignment(r, geom: LinkGeometry):
    w = beam_radius(geom)
    return np.exp(-2.0 * r / (w * w))


def pointing_transmissivity(r, geom: LinkGeometry):
    """Misalignment fading at Bob's lens for squared offset ``r``."""
    arr = _check_offset(r)
    return _ret(aperture_fraction(geom) * _misalignment(arr, geom), r)


def safe_zone_transmissivity(r, geom: LinkGeometry):
    """Power collected inside the safe zone (lens plus guard ring)."""
    arr = _check_offset(r)
    return _ret(safe_fraction(geom) * _misalignment(arr, geom), r)


def eve_transmissivity(r, geom: LinkGeometry):
    """Worst-case leakage: everything outside the safe zone reaches Eve.

    Eve sees no turbulence, so this depends on the pointing offset only.
    """
    arr = _check_offset(r)
    return _ret(1.0 - safe_fraction(geom) * _misalignment(arr, geom), r)


@lru_cache(maxsize=64)
def _gg_log_norm(alpha: float, beta: float) -> float:
    return (
        math.log(2.0)
        + 0.5 * (alpha + beta) * math.log(alpha * beta)
        - gammaln(alpha)
        - gammaln(beta)
    )


def gg_pdf(h, tp: TurbulenceParams):
    """Gamma-Gamma density of the unit-mean irradiance ``h``.

    Evaluated in log space with the exponentially scaled Bessel function so
    that large shape parameters (weak turbulence) do not overflow.
    """
    arr = np.asarray(h, dtype=float)
    if not np.all(arr > 0):
        raise DomainError("gg_pdf requires h > 0")
    a, b = tp.alpha, tp.beta_gg
    z = 2.0 * np.sqrt(a * b * arr)
    with np.errstate(divide="ignore", under="ignore"):
        logk = np.log(bessel_k_scaled(a - b, z))
        logf = _gg_log_norm(a, b) + (0.5 * (a + b) - 1.0) * np.log(arr) + logk - z
        out = np.exp(logf)
    return _ret(out, h)


def gg_cdf(h, tp: TurbulenceParams, cfg: Optional[QuadConfig] = None) -> np.ndarray:
    """CDF of the Gamma-Gamma law at the points ``h`` (any order, all > 0).

    Every gap between consecutive sorted points is integrated as one component
    of a single vector-valued quadrature, then the pieces are accumulated.
    """
    cfg = cfg or QuadConfig(rel_tol=1e-10, abs_tol=1e-14)
    arr = np.asarray(h, dtype=float).ravel()
    if not np.all(arr > 0):
        raise DomainError("gg_cdf requires h > 0")
    order = np.argsort(arr, kind="stable")
    pts = arr[order]
    left = np.concatenate([[0.0], pts[:-1]])
    width = pts - left

    def f(u):
        x = left[None, :] + u[:, None] * width[None, :]
        x = np.maximum(x, np.finfo(float).tiny)
        return gg_pdf(x, tp) * width[None, :]

    pieces, _ = quad_finite(f, 0.0, 1.0, cfg)
    cdf = np.minimum(np.cumsum(np.atleast_1d(pieces)), 1.0)
    out = np.empty_like(cdf)
    out[order] = cdf
    return out


def gg_survival(h: float, tp: TurbulenceParams, cfg: Optional[QuadConfig] = None) -> float:
    """P(h' > h) by direct integration of the upper tail."""
    cfg = cfg or QuadConfig(rel_tol=1e-10, abs_tol=1e-16)
    value, _ = quad_semi_infinite(lambda x: gg_pdf(x, tp), cfg, a=float(h))
    return value


def gg_quantile(p: float, tp: TurbulenceParams, cfg: Optional[QuadConfig] = None) -> float:
    """Upper quantile ``h_q`` with ``P(h' > h_q) = 1 - p``, found by bisection."""
    if not 0 < p < 1:
        raise DomainError("quantile level must lie in (0, 1)")
    target = 1.0 - p
    lo, hi = 0.0, 1.0
    while gg_survival(hi, tp, cfg) > target:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gg_survival(mid, tp, cfg) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def make_rng(seed: int, strand: int = 0) -> np.random.Generator:
    """Random source for one execution strand: seeded with ``seed + strand``."""
    return np.random.default_rng(int(seed) + int(strand))


def gg_sample(tp: TurbulenceParams, rng: np.random.Generator, size=None):
    """Draw Gamma-Gamma irradiance as a product of two unit-mean Gamma variates."""
    g1 = rng.gamma(tp.alpha, 1.0 / tp.alpha, size)
    g2 = rng.gamma(tp.beta_gg, 1.0 / tp.beta_gg, size)
    return g1 * g2


def offset_scale(geom: LinkGeometry) -> float:
    """Mean squared offset 2 Z_L^2 sigma_theta^2 (m^2)."""
    return 2.0 * geom.z_link**2 * geom.jitter_sigma**2


def offset_pdf(r, geom: LinkGeometry):
    """Exponential density of ``r = r_e**2`` (chi-squared with two dof, scaled)."""
    arr = _check_offset(r)
    s = offset_scale(geom)
    return _ret(np.exp(-arr / s) / s, r)


def offset_cdf(r, geom: LinkGeometry):
    arr = _check_offset(r)
    return _ret(-np.expm1(-arr / offset_scale(geom)), r)


def offset_sample(geom: LinkGeometry, rng: np.random.Generator, size=None):
    """Squared offset Z_L^2 (theta_x^2 + theta_y^2) with i.i.d. Gaussian angles."""
    tx = rng.normal(0.0, geom.jitter_sigma, size)
    ty = rng.normal(0.0, geom.jitter_sigma, size)
    return geom.z_link**2 * (tx * tx + ty * ty)


def clamp_eta(raw, stats: Optional[ClampStats] = None):
    """Clamp a raw transmissivity into [0, ETA_MAX], counting clamp events."""
    raw = np.asarray(raw, dtype=float)
    over = raw > ETA_MAX
    n = int(np.count_nonzero(over))
    if n:
        if stats is not None:
            stats.record(n)
        raw = np.where(over, ETA_MAX, raw)
    return raw


def bob_transmissivity(
    r,
    h,
    geom: LinkGeometry,
    eta_sys: float,
    stats: Optional[ClampStats] = None,
):
    """eta_B(r, h) = eta_sys * h * A0 * exp(-2 r / w^2), clamped below 1.

    The Gamma-Gamma law has unbounded support, so the product can exceed one
    in rare deep-gain events; those are clamped to ``ETA_MAX`` and counted in
    ``stats`` when given.
    """
    r_arr = _check_offset(r)
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise DomainError("turbulence gain h must be >= 0")
    if not 0 < eta_sys <= 1:
        raise DomainError(f"eta_sys must lie in (0, 1], got {eta_sys}")
    raw = eta_sys * h_arr * pointing_transmissivity(r_arr, geom)
    out = clamp_eta(raw, stats)
    if np.ndim(r) == 0 and np.ndim(h) == 0:
        return float(out)
    return out
