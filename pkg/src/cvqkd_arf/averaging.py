"""Offset- and turbulence-averaged security metrics.

For a squared pointing offset ``r`` the turbulence average

    I(r) = E_h[ I_AB(eta_B(r, h)) ]

is a semi-infinite integral against the Gamma-Gamma density, and the
conditional key rate is ``K(r) = recon_eff * I(r) - chi_AE(r)``. Thresholded
metrics integrate these against the exponential offset density over
``0 <= r <= r_th**2`` without renormalising by the acceptance probability.

The outer integral in ``r`` is always split on a fixed partition expressed in
units of the mean squared offset ``s = 2 Z_L^2 sigma^2`` (see
``CANONICAL_BREAKS``). Whole partition segments are cached per averager, and
the last, partial segment ends exactly at ``r_th**2``. A sweep over many
thresholds therefore reproduces a single-threshold evaluation bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from .channel import (
    ClampStats,
    LinkGeometry,
    TurbulenceParams,
    _check_offset,
    aperture_fraction,
    beam_radius,
    bob_transmissivity,
    clamp_eta,
    gg_pdf,
    gg_quantile,
    gg_sample,
    make_rng,
    offset_cdf,
    offset_sample,
    offset_scale,
    safe_fraction,
)
from .errors import DomainError, SampleSizeError
from .quadrature import QuadConfig, quad_finite, quad_semi_infinite
from .security import ProtocolParams, _holevo_from_safe, _mi_unchecked, holevo_bound_offset

__all__ = [
    "AveragedPoint",
    "MCEstimate",
    "OffsetAverager",
    "CANONICAL_BREAKS",
    "DEFAULT_OUTER_QUAD",
    "DEFAULT_INNER_QUAD",
    "MIN_MC_SAMPLES",
    "turbulence_average",
    "turbulence_averaged_mi",
    "conditional_key_rate",
    "thresholded_mi",
    "thresholded_key_rate",
    "threshold_profile",
    "mc_reference",
    "mc_profile",
    "gg_upper_quantile",
]

DEFAULT_OUTER_QUAD = QuadConfig(rel_tol=1e-6, abs_tol=1e-12)
DEFAULT_INNER_QUAD = QuadConfig(rel_tol=1e-7, abs_tol=1e-13)
MIN_MC_SAMPLES = 100_000

# Outer partition in units of s. Spacing stays <= 8 s so that consecutive
# thresholds never differ by less than the inner quadrature noise of a segment.
CANONICAL_BREAKS: Tuple[float, ...] = tuple(2.0**k for k in range(-8, 1)) + (
    2.0, 4.0, 8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 56.0, 64.0,
)
# Prefactors handled per inner quadrature call; bounds the (nodes x m) work array.
_INNER_CHUNK = 48


@dataclass(frozen=True)
class AveragedPoint:
    """Threshold-averaged metrics at one acceptance threshold.

    ``i_bar`` and ``k_bar`` are truncated (unnormalised) expectations in bits;
    divide by ``accept_prob`` for the per-accepted-symbol value.
    """

    r_th: float
    i_bar: float
    k_bar: float
    accept_prob: float
    err_est: float

    @property
    def k_bar_floored(self) -> float:
        return max(0.0, self.k_bar)


class MCEstimate(NamedTuple):
    i_bar: float
    k_bar: float
    stderr_i: float
    stderr_k: float


def turbulence_average(
    prefactor,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    cfg: Optional[QuadConfig] = None,
    stats: Optional[ClampStats] = None,
    h_upper: Optional[float] = None,
):
    """Return ``(values, err)`` of ``E_h[I_AB(min(c h, ETA_MAX))]`` for each ``c``.

    ``prefactor`` is ``eta_sys * A0 * exp(-2 r / w^2)``. The clamp point
    ``h = 1 / c`` is passed to the quadrature as a breakpoint. With
    ``h_upper`` set, the h-integral is truncated there instead of being mapped
    to a finite interval (diagnostic mode).
    """
    cfg = cfg or DEFAULT_INNER_QUAD
    c_all = np.atleast_1d(np.asarray(prefactor, dtype=float))
    values = np.zeros_like(c_all)
    errs = np.zeros_like(c_all)
    v, xi = proto.v_mod, proto.excess_noise
    idx = np.flatnonzero(c_all > 0)
    for start in range(0, len(idx), _INNER_CHUNK):
        sel = idx[start:start + _INNER_CHUNK]
        c = c_all[sel]

        def integrand(h, c=c):
            eta = clamp_eta(h[:, None] * c[None, :], stats)
            return gg_pdf(h, tp)[:, None] * _mi_unchecked(eta, v, xi)

        with np.errstate(over="ignore"):
            breaks = 1.0 / c
        if h_upper is None:
            val, err = quad_semi_infinite(integrand, cfg, points=breaks)
        else:
            val, err = quad_finite(integrand, 0.0, h_upper, cfg, points=breaks)
        values[sel] = val
        errs[sel] = err
    return values, errs


class OffsetAverager:
    """Evaluates I(r), K(r) and their threshold averages for one scenario.

    Holds a cache of whole outer segments, so repeated thresholds (sweeps,
    optimum refinement) only pay for their final partial segment.
    """

    def __init__(
        self,
        geom: LinkGeometry,
        tp: TurbulenceParams,
        proto: ProtocolParams,
        cfg: Optional[QuadConfig] = None,
        inner_cfg: Optional[QuadConfig] = None,
        clamped_k: bool = False,
        stats: Optional[ClampStats] = None,
        h_upper: Optional[float] = None,
    ):
        self.geom = geom
        self.tp = tp
        self.proto = proto
        self.cfg = cfg or DEFAULT_OUTER_QUAD
        self.inner_cfg = inner_cfg or DEFAULT_INNER_QUAD
        self.clamped_k = clamped_k
        self.stats = stats
        self.h_upper = h_upper
        self.w = beam_radius(geom)
        self.a0 = aperture_fraction(geom)
        self.a_safe = safe_fraction(geom)
        self.scale = offset_scale(geom)
        self._segments: Dict[Tuple[float, float], np.ndarray] = {}

    def conditional(self, r):
        """Return ``(I(r), K(r), err_I(r))`` as arrays for squared offsets ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        fade = np.exp(-2.0 * r / (self.w * self.w))
        c = self.proto.eta_sys * self.a0 * fade
        i_r, err = turbulence_average(
            c, self.tp, self.proto, self.inner_cfg, self.stats, self.h_upper
        )
        chi = _holevo_from_safe(self.a_safe * fade, self.proto.v_mod)
        k_r = self.proto.recon_eff * i_r - chi
        if self.clamped_k:
            k_r = np.maximum(k_r, 0.0)
        return i_r, k_r, err

    def _outer(self, r):
        i_r, k_r, err = self.conditional(r)
        weight = np.exp(-r / self.scale) / self.scale
        return np.stack([i_r * weight, k_r * weight, err * weight], axis=1)

    def _integrate(self, lo: float, hi: float) -> np.ndarray:
        """[I, K, inner-error, quad-err I, quad-err K] over lo <= r <= hi."""
        if math.isinf(hi):
            val, err = quad_semi_infinite(self._outer, self.cfg, a=lo, control=2)
        else:
            val, err = quad_finite(self._outer, lo, hi, self.cfg, control=2)
        return np.array([val[0], val[1], val[2], err[0], err[1]])

    def _segment(self, lo: float, hi: float) -> np.ndarray:
        key = (lo, hi)
        seg = self._segments.get(key)
        if seg is None:
            seg = self._integrate(lo, hi)
            self._segments[key] = seg
        return seg

    def point(self, r_th: float) -> AveragedPoint:
        """Threshold averages for acceptance radius ``r_th`` in metres (may be inf)."""
        if not r_th > 0:
            raise DomainError(f"threshold r_th must be > 0, got {r_th}")
        s = self.scale
        r_max = r_th * r_th
        acc = np.zeros(5)
        prev = 0.0
        for t in CANONICAL_BREAKS:
            hi = t * s
            if hi > r_max:
                break
            acc = acc + self._segment(prev, hi)
            prev = hi
        if r_max > prev:
            acc = acc + self._segment(prev, r_max)
        i_bar, k_bar, inner_err, qerr_i, qerr_k = acc
        err_i = qerr_i + inner_err
        err_k = qerr_k + self.proto.recon_eff * inner_err
        accept = float(offset_cdf(r_max, self.geom)) if math.isfinite(r_max) else 1.0
        return AveragedPoint(float(r_th), float(i_bar), float(k_bar), accept,
                             float(max(err_i, err_k)))

    def profile(self, rth_grid: Iterable[float]) -> List[AveragedPoint]:
        return [self.point(float(r)) for r in rth_grid]


def turbulence_averaged_mi(
    r,
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    cfg: Optional[QuadConfig] = None,
):
    """I(r): mutual information averaged over turbulence at fixed offset ``r``."""
    arr = _check_offset(r)
    avg = OffsetAverager(geom, tp, proto, inner_cfg=cfg)
    i_r, _, _ = avg.conditional(arr.ravel())
    return float(i_r[0]) if np.ndim(r) == 0 else i_r.reshape(arr.shape)


def conditional_key_rate(
    r,
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    cfg: Optional[QuadConfig] = None,
    clamped_k: bool = False,
):
    """K(r) = recon_eff * I(r) - chi_AE(r); signed unless ``clamped_k``."""
    arr = _check_offset(r)
    avg = OffsetAverager(geom, tp, proto, inner_cfg=cfg, clamped_k=clamped_k)
    _, k_r, _ = avg.conditional(arr.ravel())
    return float(k_r[0]) if np.ndim(r) == 0 else k_r.reshape(arr.shape)


def thresholded_mi(
    r_th: float,
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    cfg: Optional[QuadConfig] = None,
    inner_cfg: Optional[QuadConfig] = None,
) -> float:
    return OffsetAverager(geom, tp, proto, cfg, inner_cfg).point(r_th).i_bar


def thresholded_key_rate(
    r_th: float,
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    cfg: Optional[QuadConfig] = None,
    inner_cfg: Optional[QuadConfig] = None,
    clamped_k: bool = False,
) -> AveragedPoint:
    return OffsetAverager(geom, tp, proto, cfg, inner_cfg, clamped_k).point(r_th)


def threshold_profile(
    rth_grid: Iterable[float],
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    cfg: Optional[QuadConfig] = None,
    inner_cfg: Optional[QuadConfig] = None,
    clamped_k: bool = False,
) -> List[AveragedPoint]:
    return OffsetAverager(geom, tp, proto, cfg, inner_cfg, clamped_k).profile(rth_grid)


def _mc_samples(geom, tp, proto, n, seed, strands, clamped_k):
    if n < MIN_MC_SAMPLES:
        raise SampleSizeError(f"Monte Carlo reference needs n >= {MIN_MC_SAMPLES}, got {n}")
    if strands < 1:
        raise ValueError("strands must be >= 1")
    sizes = [n // strands + (1 if k < n % strands else 0) for k in range(strands)]
    r_parts, i_parts, k_parts = [], [], []
    for k, size in enumerate(sizes):
        rng = make_rng(seed, k)
        r = offset_sample(geom, rng, size)
        h = gg_sample(tp, rng, size)
        eta_b = bob_transmissivity(r, h, geom, proto.eta_sys)
        i_ab = _mi_unchecked(eta_b, proto.v_mod, proto.excess_noise)
        key = proto.recon_eff * i_ab - holevo_bound_offset(r, geom, proto)
        if clamped_k:
            key = np.maximum(key, 0.0)
        r_parts.append(r)
        i_parts.append(i_ab)
        k_parts.append(key)
    return np.concatenate(r_parts), np.concatenate(i_parts), np.concatenate(k_parts)


def _mc_estimate(mask, i_ab, key) -> MCEstimate:
    n = len(i_ab)
    xi = np.where(mask, i_ab, 0.0)
    xk = np.where(mask, key, 0.0)
    return MCEstimate(
        float(xi.mean()),
        float(xk.mean()),
        float(xi.std(ddof=1) / math.sqrt(n)),
        float(xk.std(ddof=1) / math.sqrt(n)),
    )


def mc_reference(
    r_th: float,
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    n: int,
    seed: int,
    strands: int = 1,
    clamped_k: bool = False,
) -> MCEstimate:
    """Monte Carlo estimate of (I_bar, K_bar) with standard errors.

    Draws the pointing offset and turbulence gain jointly, evaluates the
    point-wise metrics, and averages them with the indicator ``r <= r_th**2``.
    Strand ``k`` uses seed ``seed + k``; the result is deterministic for a
    fixed ``(seed, strands)`` pair.
    """
    return mc_profile([r_th], geom, tp, proto, n, seed, strands, clamped_k)[0]


def mc_profile(
    rth_grid: Iterable[float],
    geom: LinkGeometry,
    tp: TurbulenceParams,
    proto: ProtocolParams,
    n: int,
    seed: int,
    strands: int = 1,
    clamped_k: bool = False,
) -> List[MCEstimate]:
    """``mc_reference`` for several thresholds sharing one sample set."""
    r, i_ab, key = _mc_samples(geom, tp, proto, n, seed, strands, clamped_k)
    return [_mc_estimate(r <= float(rt) ** 2, i_ab, key) for rt in rth_grid]


def gg_upper_quantile(tp: TurbulenceParams, tail: float = 1e-9) -> float:
    """Truncation point for the diagnostic finite-range h-integral."""
    return gg_quantile(1.0 - tail, tp)
