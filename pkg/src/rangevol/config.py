"""Run configuration with environment overrides.

Every field can be overridden by an environment variable named
``RANGEVOL_<FIELD>`` in upper case, e.g. ``RANGEVOL_WINDOW=126``.
Command-line flags take precedence over the environment.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Mapping

from .abm_range import SeriesControl
from .errors import ParameterError

ENV_PREFIX = "RANGEVOL_"


@dataclass(frozen=True)
class RunConfig:
    window: int = 63
    band: float = 0.10
    annualization: int = 252
    rate_source: str = "series"
    constant_rate: float = 0.0
    rate_convention: str = "quoted"
    seed: int = 20100618
    steps_per_unit: int = 10_000
    max_terms: int = 100
    term_tolerance: float = 1e-14
    consecutive_small: int = 3
    yz_k: float | None = None

    def __post_init__(self):
        if self.window < 3:
            raise ParameterError("window must be at least 3")
        if not 0.0 <= self.band < 1.0:
            raise ParameterError("band must lie in [0, 1)")
        if self.annualization <= 0:
            raise ParameterError("annualization must be positive")
        if self.rate_source not in ("series", "constant"):
            raise ParameterError("rate_source must be 'series' or 'constant'")
        if self.rate_convention not in ("quoted", "log"):
            raise ParameterError("rate_convention must be 'quoted' or 'log'")
        self.series_control()

    def series_control(self) -> SeriesControl:
        return SeriesControl(self.max_terms, self.term_tolerance, self.consecutive_small)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None, **overrides) -> "RunConfig":
        """Defaults, then ``RANGEVOL_*`` variables, then non-None keyword overrides."""
        environ = os.environ if environ is None else environ
        values = {}
        for f in dataclasses.fields(cls):
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                values[f.name] = _coerce(f, raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(f: dataclasses.Field, raw: str):
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ParameterError(f"{ENV_PREFIX}{f.name.upper()}={raw!r} is not a valid {kind}") from None
    return raw
