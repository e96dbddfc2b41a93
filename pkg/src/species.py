"""
Atomic species and probe beam parameters.
"""
import json
import math
from pathlib import Path
from typing import Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DEFAULT_SPECIES_PATH = DATA_DIR / "species" / "rb87_d2.json"

TWO_PI = 2.0 * math.pi


class SpeciesFile(BaseModel):
    """On-disk species record; frequencies in Hz."""

    model_config = ConfigDict(extra="forbid")

    linewidth_hz: float = Field(gt=0)
    wavelength_m: float = Field(gt=0)
    splitting_f1_hz: float = Field(ge=0)
    splitting_f2_hz: float = Field(ge=0)
    mass_kg: float = Field(gt=0)
    lande_gf: float


class AtomicSpecies(BaseModel):
    """
    Atomic constants entering the coupling and scattering formulas.

    Frequencies are angular (rad/s). ``splittings`` holds the excited-state
    spacings of F' = 0, 1, 2 measured from F' = 0, so its first entry is 0.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "species"
    linewidth: float = Field(gt=0)
    wavelength: float = Field(gt=0)
    splittings: Tuple[float, float, float]
    mass: float = Field(gt=0)
    lande_gf: float

    @field_validator("splittings")
    @classmethod
    def _non_negative(cls, value):
        if value[0] != 0.0 or any(s < 0 for s in value):
            raise ValueError("splittings must start at 0 (F'=0) and be non-negative")
        return value

    @classmethod
    def from_file(cls, path: Union[str, Path, None] = None) -> "AtomicSpecies":
        """
        Load a species data file.

        Args:
            path: JSON file with linewidth_hz, wavelength_m, splitting_f1_hz,
                splitting_f2_hz, mass_kg and lande_gf (default: shipped Rb-87 D2)

        Returns:
            AtomicSpecies with frequencies converted to rad/s

        Raises:
            ConfigError: If the file is missing, malformed or incomplete
        """
        path = Path(path) if path is not None else DEFAULT_SPECIES_PATH
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read species file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        try:
            record = SpeciesFile.model_validate(raw)
        except ValidationError as exc:
            raise ConfigError(f"invalid species file {path}: {exc}") from exc
        return cls(
            name=path.stem,
            linewidth=TWO_PI * record.linewidth_hz,
            wavelength=record.wavelength_m,
            splittings=(0.0, TWO_PI * record.splitting_f1_hz, TWO_PI * record.splitting_f2_hz),
            mass=record.mass_kg,
            lande_gf=record.lande_gf,
        )


class BeamParams(BaseModel):
    """Linearly (x) polarized probe: photon flux, detuning from F=1 -> F'=0, cross section."""

    model_config = ConfigDict(frozen=True)

    photon_flux: float = Field(gt=0)
    detuning: float
    cross_section: float = Field(gt=0)
    polarization: str = "x"

    @field_validator("polarization")
    @classmethod
    def _linear_x(cls, value):
        if value != "x":
            raise ValueError("only linear x polarization is modelled")
        return value
