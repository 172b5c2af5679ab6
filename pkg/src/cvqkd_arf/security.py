"""Point-wise security metrics for Gaussian-modulated coherent-state CV-QKD.

All information quantities are in bits per channel use and all variances in
shot-noise units (SNU).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkGeometry, _check_offset, _misalignment, safe_fraction
from .errors import DegenerateConfigError, DomainError, SampleSizeError, ValidationError

__all__ = [
    "ProtocolParams",
    "SecurityPoint",
    "bob_noise_variance",
    "mutual_information",
    "holevo_bound",
    "holevo_bound_offset",
    "secret_key_rate",
    "security_point",
    "simulate_homodyne",
    "MIN_HOMODYNE_SAMPLES",
]

_LN2 = math.log(2.0)
MIN_HOMODYNE_SAMPLES = 10_000


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol-level constants.

    Attributes:
        v_mod: modulation variance V_m (SNU).
        excess_noise: excess noise xi referred to the channel input (SNU).
        recon_eff: reverse-reconciliation efficiency in (0, 1].
        eta_sys: deterministic system transmissivity in (0, 1].
    """

    v_mod: float = 5.0
    excess_noise: float = 0.1
    recon_eff: float = 0.95
    eta_sys: float = 0.8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v_mod) and self.v_mod > 0):
            raise ValidationError(f"protocol.v_mod must be > 0, got {self.v_mod}")
        if not (math.isfinite(self.excess_noise) and self.excess_noise >= 0):
            raise ValidationError(
                f"protocol.excess_noise must be >= 0, got {self.excess_noise}"
            )
        if not 0 < self.recon_eff <= 1:
            raise ValidationError(
                f"protocol.recon_eff must lie in (0, 1], got {self.recon_eff}"
            )
        if not 0 < self.eta_sys <= 1:
            raise ValidationError(f"protocol.eta_sys must lie in (0, 1], got {self.eta_sys}")


@dataclass(frozen=True)
class SecurityPoint:
    i_ab: float
    chi_ae: float
    key_rate: float


def _check_eta(eta, name):
    arr = np.asarray(eta, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _ret(value, like):
    return float(value) if np.ndim(like) == 0 else value


def bob_noise_variance(eta_b, proto: ProtocolParams):
    """Total noise at Bob, (1 - eta_B) + xi."""
    arr = _check_eta(eta_b, "eta_b")
    var = (1.0 - arr) + proto.excess_noise
    if np.any(var <= 0):
        raise DegenerateConfigError(
            "Bob's noise variance is zero (eta_b = 1 with no excess noise); "
            "mutual information is unbounded"
        )
    return _ret(var, eta_b)


def _mi_unchecked(eta, v_mod, xi):
    return 0.5 * np.log1p(eta * v_mod / ((1.0 - eta) + xi)) / _LN2


def mutual_information(eta_b, proto: ProtocolParams):
    """Alice-Bob mutual information for homodyne detection."""
    var = bob_noise_variance(eta_b, proto)
    eta = np.asarray(eta_b, dtype=float)
    return _ret(0.5 * np.log1p(eta * proto.v_mod / var) / _LN2, eta_b)


def _holevo_from_safe(safe, v_mod):
    # eta_E = 1 - safe, so (1 - eta_E) = safe and (1 + eta_E) = 2 - safe
    return 0.5 * np.log2((v_mod + 1.0) / (1.0 + safe * v_mod / (2.0 - safe)))


def holevo_bound(eta_e, proto: ProtocolParams):
    """Eve's Holevo information for a pure-loss channel of transmissivity eta_E."""
    arr = _check_eta(eta_e, "eta_e")
    v = proto.v_mod
    chi = 0.5 * np.log2((v + 1.0) / (1.0 + (1.0 - arr) * v / (1.0 + arr)))
    return _ret(chi, eta_e)


def holevo_bound_offset(r, geom: LinkGeometry, proto: ProtocolParams):
    """Holevo bound written directly in terms of the squared offset ``r``.

    Algebraically identical to ``holevo_bound(eve_transmissivity(r, geom))``.
    """
    arr = _check_offset(r)
    safe = safe_fraction(geom) * _misalignment(arr, geom)
    return _ret(_holevo_from_safe(safe, proto.v_mod), r)


def secret_key_rate(point_i, point_chi, recon_eff: float):
    """Asymptotic reverse-reconciliation key rate; negative values are kept."""
    return recon_eff * point_i - point_chi


def security_point(eta_b: float, eta_e: float, proto: ProtocolParams) -> SecurityPoint:
    i_ab = mutual_information(eta_b, proto)
    chi = holevo_bound(eta_e, proto)
    return SecurityPoint(i_ab, chi, secret_key_rate(i_ab, chi, proto.recon_eff))


def simulate_homodyne(eta_b: float, proto: ProtocolParams, n: int, seed: int) -> float:
    """Estimate I_AB from simulated homodyne samples.

    Alice draws ``q ~ N(0, V_m)``; Bob records ``y = sqrt(eta_B) q + n_B``
    where ``n_B`` is Gaussian with the total noise variance
    ``(1 - eta_B) + xi``. The estimate is ``0.5 log2(Var(y) / Var(y | q))``
    with the conditional variance taken from the least-squares residual of
    ``y`` on ``q``, so the channel gain is never used directly.
    """
    if n < MIN_HOMODYNE_SAMPLES:
        raise SampleSizeError(f"simulate_homodyne needs n >= {MIN_HOMODYNE_SAMPLES}, got {n}")
    var_b = bob_noise_variance(eta_b, proto)
    rng = np.random.default_rng(seed)
    q = rng.normal(0.0, math.sqrt(proto.v_mod), n)
    noise = rng.normal(0.0, math.sqrt(var_b), n)
    y = math.sqrt(eta_b) * q + noise

    qc = q - q.mean()
    yc = y - y.mean()
    var_q = float(qc @ qc) / n
    var_y = float(yc @ yc) / n
    cov = float(qc @ yc) / n
    resid = var_y - cov * cov / var_q
    return 0.5 * math.log2(var_y / resid)
