"""Secret-key-rate model for a CV-QKD free-space link with an angular rejection filter.

The receiver is surrounded by an absorbing guard ring; light landing inside
the ring (the safe zone) is trusted, light outside it is attributed to an
eavesdropper. Pointing jitter and Gamma-Gamma turbulence are averaged
numerically, and symbols with a radial offset above a threshold r_th are
discarded.
"""

__version__ = "0.1.0"

from .averaging import (
    AveragedPoint,
    MCEstimate,
    OffsetAverager,
    conditional_key_rate,
    mc_reference,
    thresholded_key_rate,
    thresholded_mi,
    turbulence_averaged_mi,
)
from .channel import (
    ClampStats,
    LinkGeometry,
    TurbulenceParams,
    aperture_fraction,
    beam_radius,
    bob_transmissivity,
    collection_fraction,
    eve_transmissivity,
    gg_pdf,
    gg_sample,
    offset_pdf,
    offset_sample,
    pointing_transmissivity,
    safe_fraction,
    safe_zone_transmissivity,
)
from .config import ScenarioConfig, load_config, parse_config
from .errors import (
    ConfigParseError,
    ConvergenceError,
    DegenerateConfigError,
    DomainError,
    ModelError,
    OverflowDomainError,
    SampleSizeError,
    ValidationError,
)
from .quadrature import QuadConfig, quad_finite, quad_semi_infinite
from .security import (
    ProtocolParams,
    holevo_bound,
    holevo_bound_offset,
    mutual_information,
    secret_key_rate,
    simulate_homodyne,
)
from .sweep import SweepSpec, find_optimum, sweep_surface, sweep_threshold
