"""
Scenario configuration: JSON files validated by pydantic models.

Absent keys take the reference parameter set (10^6 Rb-87 atoms at 30 uK,
Phi = 1e14 photons/s, Delta = 1 GHz, A = 4 pi x 1e-10 m^2).
"""
import json
import math
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .measurement import DetectorKind, DetectorModel
from .scheduler import DEFAULT_EFFECT_ORDER, Effect
from .species import TWO_PI, AtomicSpecies, BeamParams
from .state import SegmentLayout

FRACTION_ATOL = 1e-9


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BeamConfig(_Section):
    photon_flux: float = Field(1e14, gt=0, description="photons per second")
    detuning_hz: float = Field(1e9, description="detuning from F=1 -> F'=0, Hz")
    cross_section: float = Field(4 * math.pi * 1e-10, gt=0, description="total interaction area, m^2")


class AtomsConfig(_Section):
    number: float = Field(1e6, gt=0)
    temperature: float = Field(30e-6, ge=0, description="kelvin")


class LayoutConfig(_Section):
    channels: int = Field(1, ge=1)
    atom_segments_per_channel: int = Field(1, ge=1)
    atom_fractions: Optional[List[float]] = None
    light_fractions: Optional[List[float]] = None
    area_fractions: Optional[List[float]] = None

    @model_validator(mode="after")
    def _fractions_sum_to_one(self):
        for name in ("atom_fractions", "light_fractions", "area_fractions"):
            values = getattr(self, name)
            if values is None:
                continue
            if len(values) != self.channels:
                raise ValueError(f"{name} needs {self.channels} entries, got {len(values)}")
            if any(v < 0 for v in values):
                raise ValueError(f"{name} must be non-negative")
            if abs(sum(values) - 1.0) > FRACTION_ATOL:
                raise ValueError(f"{name} must sum to 1 (got {sum(values):.12g})")
        if self.area_fractions is not None and any(v <= 0 for v in self.area_fractions):
            raise ValueError("area_fractions must be positive")
        return self

    def fractions(self, name: str) -> List[float]:
        """Per-channel fractions, equal split when not given."""
        values = getattr(self, name)
        return list(values) if values is not None else [1.0 / self.channels] * self.channels


class DetectorConfig(_Section):
    kind: DetectorKind = DetectorKind.IDEAL
    angle: float = Field(0.0, ge=0, lt=TWO_PI)


class NoiseConfig(_Section):
    rho: float = Field(1.0, ge=0, le=1, description="returning fraction of scattered atoms")
    decoherence: bool = True
    light_loss: bool = False


class MixingConfig(_Section):
    enabled: bool = False
    rate: Optional[float] = Field(None, ge=0, description="override of m_tau / tau, 1/s")


class MagneticConfig(_Section):
    field_tesla: List[float] = Field(default_factory=list)
    lande_gf: Optional[float] = None


class ScenarioConfig(_Section):
    """Complete, validated description of one simulation run."""

    species_path: Optional[Path] = None
    beam: BeamConfig = Field(default_factory=BeamConfig)
    atoms: AtomsConfig = Field(default_factory=AtomsConfig)
    layout: LayoutConfig = Field(default_factory=LayoutConfig)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    mixing: MixingConfig = Field(default_factory=MixingConfig)
    magnetic: MagneticConfig = Field(default_factory=MagneticConfig)
    effect_order: List[Effect] = Field(default_factory=lambda: list(DEFAULT_EFFECT_ORDER))
    tau: Optional[float] = Field(None, gt=0, description="time step, s")
    auto_tau: bool = False
    tau_fraction: float = Field(0.04, gt=0, description="default tau in units of t0")
    total_time: float = Field(20.0, gt=0, description="run length in units of t0")
    total_steps: Optional[int] = Field(None, ge=1)
    fig4_mixing_rates: List[float] = Field(
        default_factory=lambda: [float(r) for r in np.logspace(-3, 1, 5)],
        description="m_tau / tau sweep in units of 1/t0",
    )
    check_invariants: bool = True
    max_light_segments: int = Field(5000, ge=1)
    output: Optional[Path] = None

    @field_validator("effect_order")
    @classmethod
    def _unique_effects(cls, value):
        if len(set(value)) != len(value):
            raise ValueError("each effect may appear at most once in effect_order")
        return value

    @field_validator("fig4_mixing_rates")
    @classmethod
    def _non_negative_rates(cls, value):
        if any(r < 0 for r in value):
            raise ValueError("mixing rates must be non-negative")
        return value

    @model_validator(mode="after")
    def _field_per_segment(self):
        n = len(self.magnetic.field_tesla)
        channels = self.layout.channels
        if n not in (0, channels, channels * self.layout.atom_segments_per_channel):
            raise ValueError("magnetic.field_tesla needs one entry per channel or per atom segment")
        return self

    def species(self) -> AtomicSpecies:
        return AtomicSpecies.from_file(self.species_path)

    def beam_params(self) -> BeamParams:
        return BeamParams(
            photon_flux=self.beam.photon_flux,
            detuning=TWO_PI * self.beam.detuning_hz,
            cross_section=self.beam.cross_section,
        )

    def segment_layout(self) -> SegmentLayout:
        areas = self.layout.fractions("area_fractions")
        return SegmentLayout(
            channels=self.layout.channels,
            atom_segments_per_channel=self.layout.atom_segments_per_channel,
            cross_sections=tuple(a * self.beam.cross_section for a in areas),
        )

    def atoms_per_segment(self) -> List[Optional[float]]:
        """Channel-major populations; None where a channel holds no atoms."""
        per_channel = self.layout.atom_segments_per_channel
        cells: List[Optional[float]] = []
        for fraction in self.layout.fractions("atom_fractions"):
            n = fraction * self.atoms.number / per_channel
            cells.extend([n if fraction > 0 else None] * per_channel)
        return cells

    def detector_model(self) -> DetectorModel:
        return DetectorModel(kind=self.detector.kind, angle=self.detector.angle)

    def updated(self, **sections) -> "ScenarioConfig":
        """
        Copy with nested updates, e.g. ``updated(layout={"channels": 2})``.

        Dict values are merged into the existing section; the result is
        re-validated.
        """
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return ScenarioConfig.model_validate(data)


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(p) for p in error["loc"]) or "config"
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def parse_config(text: str, source: Union[str, Path] = "<string>") -> ScenarioConfig:
    """
    Parse and validate configuration text.

    Raises:
        ConfigError: With line/column on syntax errors, or naming the violated
            invariant on validation errors
    """
    if not text.strip():
        data = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_describe(exc)}") from exc


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """
    Load a scenario configuration file.

    Args:
        path: JSON configuration file (an empty file gives all defaults)

    Returns:
        Validated ScenarioConfig
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)
