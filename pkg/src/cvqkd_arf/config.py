"""Scenario configuration: defaults, TOML parsing and validation.

A config document has up to five tables plus a top-level ``seed``::

    seed = 0

    [geometry]
    z_link = 500.0          # m
    aperture_radius = 0.05  # m
    safe_radius = 0.15      # m
    waist = 0.05            # m, transmitter waist w0
    wavelength = 1.55e-6    # m
    jitter_sigma = 50e-6    # rad
    # rx_beam_radius = 0.08 # m, impose w(Z_L) directly

    [turbulence]
    alpha = 4.2
    beta = 1.4

    [protocol]
    v_mod = 5.0
    excess_noise = 0.1
    recon_eff = 0.95
    eta_sys = 0.8

    [quad]
    rel_tol = 1e-6          # outer (offset) integral
    abs_tol = 1e-12
    max_subdivisions = 2000
    inner_rel_tol = 1e-7    # inner (turbulence) integral
    inner_abs_tol = 1e-13

    [flags]
    clamped_k = false
    mc_strands = 1

Every omitted key takes the default shown. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .averaging import DEFAULT_INNER_QUAD, DEFAULT_OUTER_QUAD, OffsetAverager
from .channel import ClampStats, LinkGeometry, TurbulenceParams
from .errors import ConfigParseError, ValidationError
from .quadrature import QuadConfig
from .security import ProtocolParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ScenarioConfig", "parse_config", "load_config"]

_GEOMETRY_KEYS = {
    "z_link": "z_link",
    "aperture_radius": "aperture_radius",
    "safe_radius": "safe_radius",
    "waist": "waist",
    "wavelength": "wavelength",
    "jitter_sigma": "jitter_sigma",
    "rx_beam_radius": "rx_beam_radius",
}
_TURBULENCE_KEYS = {"alpha": "alpha", "beta": "beta_gg"}
_PROTOCOL_KEYS = {
    "v_mod": "v_mod",
    "excess_noise": "excess_noise",
    "recon_eff": "recon_eff",
    "eta_sys": "eta_sys",
}
_QUAD_KEYS = ("rel_tol", "abs_tol", "max_subdivisions", "inner_rel_tol", "inner_abs_tol")
_FLAG_KEYS = ("clamped_k", "mc_strands")
_SECTIONS = ("geometry", "turbulence", "protocol", "quad", "flags")
_LINE_RE = re.compile(r"line (\d+)")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to evaluate one link scenario."""

    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    turbulence: TurbulenceParams = field(default_factory=TurbulenceParams)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    quad: QuadConfig = DEFAULT_OUTER_QUAD
    inner_quad: QuadConfig = DEFAULT_INNER_QUAD
    seed: int = 0
    clamped_k: bool = False
    mc_strands: int = 1

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        if isinstance(self.mc_strands, bool) or not isinstance(self.mc_strands, int) \
                or self.mc_strands < 1:
            raise ValidationError(f"flags.mc_strands must be an integer >= 1, got {self.mc_strands!r}")

    def with_geometry(self, geometry: LinkGeometry) -> "ScenarioConfig":
        return dataclasses.replace(self, geometry=geometry)

    def averager(self, geometry: Optional[LinkGeometry] = None,
                 stats: Optional[ClampStats] = None) -> OffsetAverager:
        return OffsetAverager(
            geometry or self.geometry, self.turbulence, self.protocol,
            self.quad, self.inner_quad, self.clamped_k, stats,
        )

    def to_dict(self) -> Dict[str, Any]:
        geom = dataclasses.asdict(self.geometry)
        return {
            "seed": self.seed,
            "geometry": geom,
            "turbulence": {"alpha": self.turbulence.alpha, "beta": self.turbulence.beta_gg},
            "protocol": dataclasses.asdict(self.protocol),
            "quad": {
                "rel_tol": self.quad.rel_tol,
                "abs_tol": self.quad.abs_tol,
                "max_subdivisions": self.quad.max_subdivisions,
                "inner_rel_tol": self.inner_quad.rel_tol,
                "inner_abs_tol": self.inner_quad.abs_tol,
            },
            "flags": {"clamped_k": self.clamped_k, "mc_strands": self.mc_strands},
        }


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(section: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{section}.{key} must be an integer, got {value!r}")
    return value


def _table(doc: Dict[str, Any], name: str, allowed) -> Dict[str, Any]:
    table = doc.get(name, {})
    if not isinstance(table, dict):
        raise ValidationError(f"'{name}' must be a table")
    for key in table:
        if key not in allowed:
            raise ValidationError(f"unknown key '{name}.{key}'")
    return table


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a TOML scenario document.

    Raises
    ------
    ConfigParseError
        Malformed TOML; the message carries the line number.
    ValidationError
        Unknown keys, wrong types or violated parameter constraints.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _LINE_RE.search(str(exc))
        line = int(match.group(1)) if match else None
        raise ConfigParseError(f"malformed config: {exc}", line=line) from exc

    for key in doc:
        if key not in _SECTIONS and key != "seed":
            raise ValidationError(f"unknown key '{key}'")

    geom_tab = _table(doc, "geometry", _GEOMETRY_KEYS)
    geometry = LinkGeometry(**{
        _GEOMETRY_KEYS[k]: _number("geometry", k, v) for k, v in geom_tab.items()
    })
    turb_tab = _table(doc, "turbulence", _TURBULENCE_KEYS)
    turbulence = TurbulenceParams(**{
        _TURBULENCE_KEYS[k]: _number("turbulence", k, v) for k, v in turb_tab.items()
    })
    proto_tab = _table(doc, "protocol", _PROTOCOL_KEYS)
    protocol = ProtocolParams(**{
        _PROTOCOL_KEYS[k]: _number("protocol", k, v) for k, v in proto_tab.items()
    })

    quad_tab = _table(doc, "quad", _QUAD_KEYS)
    outer = DEFAULT_OUTER_QUAD
    inner = DEFAULT_INNER_QUAD
    quad = QuadConfig(
        rel_tol=_number("quad", "rel_tol", quad_tab.get("rel_tol", outer.rel_tol)),
        abs_tol=_number("quad", "abs_tol", quad_tab.get("abs_tol", outer.abs_tol)),
        max_subdivisions=_integer(
            "quad", "max_subdivisions", quad_tab.get("max_subdivisions", outer.max_subdivisions)
        ),
    )
    inner_quad = QuadConfig(
        rel_tol=_number("quad", "inner_rel_tol", quad_tab.get("inner_rel_tol", inner.rel_tol)),
        abs_tol=_number("quad", "inner_abs_tol", quad_tab.get("inner_abs_tol", inner.abs_tol)),
        max_subdivisions=quad.max_subdivisions,
    )

    flags = _table(doc, "flags", _FLAG_KEYS)
    clamped_k = flags.get("clamped_k", False)
    if not isinstance(clamped_k, bool):
        raise ValidationError(f"flags.clamped_k must be true or false, got {clamped_k!r}")
    mc_strands = _integer("flags", "mc_strands", flags.get("mc_strands", 1))
    seed = doc.get("seed", 0)

    return ScenarioConfig(
        geometry=geometry,
        turbulence=turbulence,
        protocol=protocol,
        quad=quad,
        inner_quad=inner_quad,
        seed=seed,
        clamped_k=clamped_k,
        mc_strands=mc_strands,
    )


def load_config(path: Optional[str]) -> ScenarioConfig:
    """Read a config file; ``None`` gives the default scenario."""
    if path is None:
        return ScenarioConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
