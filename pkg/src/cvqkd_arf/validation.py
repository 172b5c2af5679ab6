"""Self-check battery run by ``cvqkd-arf validate``.

Each check compares a computed quantity with an independent reference and
reports the error, the tolerance and the margin (tolerance minus error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .averaging import MIN_MC_SAMPLES, mc_reference
from .channel import eve_transmissivity, gg_pdf, offset_pdf, offset_scale
from .config import ScenarioConfig
from .errors import SampleSizeError
from .quadrature import QuadConfig, quad_semi_infinite
from .security import holevo_bound, holevo_bound_offset, mutual_information, simulate_homodyne
from .specfun import bessel_k, erf_fn, gamma_fn

__all__ = ["CheckResult", "run_checks"]

_TIGHT = QuadConfig(rel_tol=1e-10, abs_tol=1e-14)


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    @property
    def margin(self) -> float:
        return self.tolerance - self.error

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: error={self.error:.3e} "
                f"tolerance={self.tolerance:.3e} margin={self.margin:.3e}")


def _specfun_checks() -> List[CheckResult]:
    rel = lambda a, b: abs(a / b - 1.0)
    erf_grid = np.linspace(-5.0, 5.0, 101)
    return [
        CheckResult("gamma(5) = 24", rel(gamma_fn(5.0), 24.0), 1e-12),
        CheckResult("gamma(0.5) = sqrt(pi)", rel(gamma_fn(0.5), math.sqrt(math.pi)), 1e-12),
        CheckResult("K_1/2(1) closed form",
                    rel(bessel_k(0.5, 1.0), math.sqrt(math.pi / 2.0) * math.exp(-1.0)), 1e-8),
        CheckResult("erf(0) = 0 and erf odd",
                    max(abs(erf_fn(0.0)),
                        float(np.max(np.abs(erf_fn(erf_grid) + erf_fn(-erf_grid))))), 0.0),
    ]


def _distribution_checks(cfg: ScenarioConfig) -> List[CheckResult]:
    tp, geom = cfg.turbulence, cfg.geometry
    mass, _ = quad_semi_infinite(lambda h: gg_pdf(h, tp), _TIGHT, points=[1.0])
    mean, _ = quad_semi_infinite(lambda h: h * gg_pdf(h, tp), _TIGHT, points=[1.0])
    s = offset_scale(geom)
    off_mass, _ = quad_semi_infinite(lambda r: offset_pdf(r, geom), _TIGHT, points=[s])
    return [
        CheckResult("turbulence pdf integrates to 1", abs(mass - 1.0), 1e-6),
        CheckResult("turbulence pdf has mean 1", abs(mean - 1.0), 1e-6),
        CheckResult("offset pdf integrates to 1", abs(off_mass - 1.0), 1e-9),
    ]


def _holevo_checks(cfg: ScenarioConfig) -> List[CheckResult]:
    rng = np.random.default_rng(cfg.seed)
    r = rng.exponential(offset_scale(cfg.geometry), 1000) * rng.uniform(0.0, 10.0, 1000)
    direct = holevo_bound_offset(r, cfg.geometry, cfg.protocol)
    composed = holevo_bound(eve_transmissivity(r, cfg.geometry), cfg.protocol)
    v = cfg.protocol.v_mod
    return [
        CheckResult("Holevo bound two-form identity", float(np.max(np.abs(direct - composed))),
                    1e-12),
        CheckResult("Holevo bound endpoints",
                    max(abs(holevo_bound(0.0, cfg.protocol)),
                        abs(holevo_bound(1.0, cfg.protocol) - 0.5 * math.log2(v + 1.0))), 1e-12),
    ]


def _homodyne_checks(cfg: ScenarioConfig, n: int) -> List[CheckResult]:
    worst = 0.0
    for k, eta in enumerate((0.1, 0.3, 0.5, 0.7, 0.9)):
        est = simulate_homodyne(eta, cfg.protocol, n, cfg.seed + k)
        worst = max(worst, abs(est / mutual_information(eta, cfg.protocol) - 1.0))
    return [CheckResult("simulated homodyne MI vs closed form (relative)", worst, 0.02)]


def _oracle_checks(cfg: ScenarioConfig, n: int) -> List[CheckResult]:
    avg = cfg.averager()
    out = []
    for label, r_th in (("1-sigma threshold", math.sqrt(offset_scale(cfg.geometry))),
                        ("no threshold", math.inf)):
        q = avg.point(r_th)
        mc = mc_reference(r_th, cfg.geometry, cfg.turbulence, cfg.protocol, n, cfg.seed,
                          cfg.mc_strands, cfg.clamped_k)
        out.append(CheckResult(f"quadrature vs Monte Carlo I_bar, {label} (in stderr)",
                               abs(q.i_bar - mc.i_bar) / mc.stderr_i, 3.0))
        out.append(CheckResult(f"quadrature vs Monte Carlo K_bar, {label} (in stderr)",
                               abs(q.k_bar - mc.k_bar) / mc.stderr_k, 3.0))
    return out


def run_checks(cfg: ScenarioConfig, n: int,
               report: Callable[[CheckResult], None] = lambda c: None) -> List[CheckResult]:
    """Run every check, calling ``report`` as each one finishes."""
    if n < MIN_MC_SAMPLES:
        raise SampleSizeError(f"validate needs at least {MIN_MC_SAMPLES} samples, got {n}")
    results: List[CheckResult] = []
    for group in (
        _specfun_checks,
        lambda: _distribution_checks(cfg),
        lambda: _holevo_checks(cfg),
        lambda: _homodyne_checks(cfg, n),
        lambda: _oracle_checks(cfg, n),
    ):
        for check in group():
            results.append(check)
            report(check)
    return results
