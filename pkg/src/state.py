"""
Segmented joint atom-light Gaussian state.

Phase-space ordering: every atom segment contributes (j_y, j_z), atoms come
first in channel-major / longitudinal-minor order, followed by the in-flight
light segments (s_y, s_z) in emission order. Units are hbar = 1, so a fully
polarized segment of N particles has Jx = N/2 and var(J_y) = var(J_z) = N/4.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidOperationError,
    PhysicalityError,
    UndefinedObservableError,
)
from .linalg import is_psd, min_eigenvalue, symmetrize

logger = logging.getLogger(__name__)

# Below this many particles per segment the group contraction is questionable.
GROUP_CONTRACTION_THRESHOLD = 100.0
PSD_RTOL = 1e-9

# 2x2 antisymmetric symbol; [v_y, v_z] = i * amplitude
EPSILON = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class SegmentLayout:
    """
    K transverse channels x L longitudinal atom segments, pulse of n light segments.

    Longitudinal segments of one channel share the channel's cross section.
    """

    channels: int
    atom_segments_per_channel: int
    cross_sections: Tuple[float, ...]
    pulse_segments: int = 1

    def __post_init__(self):
        if self.channels < 1 or self.atom_segments_per_channel < 1 or self.pulse_segments < 1:
            raise InvalidInputError(
                f"layout sizes must be >= 1 (K={self.channels}, "
                f"L={self.atom_segments_per_channel}, n={self.pulse_segments})"
            )
        sections = tuple(float(a) for a in self.cross_sections)
        if len(sections) != self.channels:
            raise InvalidInputError(
                f"expected {self.channels} cross sections, got {len(sections)}"
            )
        if any(not np.isfinite(a) or a <= 0 for a in sections):
            raise InvalidInputError(f"cross sections must be positive, got {sections}")
        object.__setattr__(self, "cross_sections", sections)

    @classmethod
    def uniform(
        cls,
        channels: int,
        atom_segments_per_channel: int,
        total_cross_section: float,
        pulse_segments: int = 1,
    ) -> "SegmentLayout":
        """Layout whose channels split the total cross section equally."""
        return cls(
            channels=channels,
            atom_segments_per_channel=atom_segments_per_channel,
            cross_sections=(total_cross_section / channels,) * channels,
            pulse_segments=pulse_segments,
        )

    @property
    def total_cross_section(self) -> float:
        return float(sum(self.cross_sections))


@dataclass(frozen=True)
class LightSegment:
    """In-flight light segment: its channel and emission serial number."""

    channel: int
    serial: int


@dataclass
class GaussianState:
    """
    Mean vector, covariance matrix, classical amplitudes and index map.

    The state is a value object for the public functions of this module
    (they return new states); the scheduler mutates it in place while it
    holds it exclusively.
    """

    layout: SegmentLayout
    mean: np.ndarray
    cov: np.ndarray
    jx: np.ndarray
    sx: np.ndarray
    atom_numbers: np.ndarray
    photon_numbers: np.ndarray
    atom_segments: Tuple[Tuple[int, int], ...]
    light_segments: Tuple[LightSegment, ...] = ()
    next_serial: int = 0

    @property
    def n_atom(self) -> int:
        return len(self.atom_segments)

    @property
    def n_light(self) -> int:
        return len(self.light_segments)

    @property
    def dim(self) -> int:
        return 2 * (self.n_atom + self.n_light)

    def atom_y(self, i: int) -> int:
        return 2 * i

    def atom_z(self, i: int) -> int:
        return 2 * i + 1

    def light_y(self, j: int) -> int:
        return 2 * (self.n_atom + j)

    def light_z(self, j: int) -> int:
        return 2 * (self.n_atom + j) + 1

    def atom_block(self, i: int) -> Tuple[int, int]:
        return (self.atom_y(i), self.atom_z(i))

    def light_block(self, j: int) -> Tuple[int, int]:
        return (self.light_y(j), self.light_z(j))

    def atoms_in_channel(self, channel: int) -> List[int]:
        """Atom segment positions of a channel, ordered longitudinally."""
        members = [(l, i) for i, (k, l) in enumerate(self.atom_segments) if k == channel]
        return [i for _, i in sorted(members)]

    def atom_position(self, channel: int, longitudinal: int) -> Optional[int]:
        try:
            return self.atom_segments.index((channel, longitudinal))
        except ValueError:
            return None

    def light_position(self, serial: int) -> int:
        for j, segment in enumerate(self.light_segments):
            if segment.serial == serial:
                return j
        raise InvalidOperationError(f"light segment #{serial} is not in flight")

    def copy(self) -> "GaussianState":
        return replace(
            self,
            mean=self.mean.copy(),
            cov=self.cov.copy(),
            jx=self.jx.copy(),
            sx=self.sx.copy(),
            atom_numbers=self.atom_numbers.copy(),
            photon_numbers=self.photon_numbers.copy(),
        )


@dataclass(frozen=True)
class ObservableSpec:
    """Linear combination p^T v of phase-space components."""

    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.ndim != 1 or not np.any(coeffs != 0.0):
            raise InvalidInputError("observable needs at least one nonzero coefficient")
        object.__setattr__(self, "coefficients", coeffs)


def _warn_small(kind: str, populations: Iterable[float]) -> None:
    small = [n for n in populations if n < GROUP_CONTRACTION_THRESHOLD]
    if small:
        logger.warning(
            "%d %s segment(s) hold fewer than %g particles (min %g); "
            "group contraction may not hold",
            len(small), kind, GROUP_CONTRACTION_THRESHOLD, min(small),
        )


def init_coherent(
    layout: SegmentLayout,
    atoms_per_segment: Sequence[Optional[float]],
    photons_per_segment: Sequence[float] = (),
    light_channels: Optional[Sequence[int]] = None,
) -> GaussianState:
    """
    Build the product coherent state of atoms and light.

    Args:
        layout: Segment layout
        atoms_per_segment: One entry per (channel, longitudinal) cell in
            channel-major order; None marks a cell without atoms
        photons_per_segment: Photon numbers of initial in-flight light segments
        light_channels: Channel of each initial light segment (default 0)

    Returns:
        Coherent state with zero mean and (N/4) I_2 blocks

    Raises:
        InvalidInputError: On non-positive populations or wrong lengths
    """
    cells = layout.channels * layout.atom_segments_per_channel
    if len(atoms_per_segment) != cells:
        raise InvalidInputError(f"expected {cells} atom populations, got {len(atoms_per_segment)}")

    segments = []
    populations = []
    for index, n_atoms in enumerate(atoms_per_segment):
        if n_atoms is None:
            continue
        if not np.isfinite(n_atoms) or n_atoms <= 0:
            raise InvalidInputError(f"atom population must be positive, got {n_atoms}")
        segments.append(divmod(index, layout.atom_segments_per_channel))
        populations.append(float(n_atoms))

    photons = [float(n) for n in photons_per_segment]
    for n_photons in photons:
        if not np.isfinite(n_photons) or n_photons <= 0:
            raise InvalidInputError(f"photon number must be positive, got {n_photons}")
    channels = list(light_channels) if light_channels is not None else [0] * len(photons)
    if len(channels) != len(photons):
        raise InvalidInputError("light_channels and photons_per_segment differ in length")
    for k in channels:
        if not 0 <= k < layout.channels:
            raise InvalidInputError(f"light channel {k} outside layout")

    _warn_small("atom", populations)
    _warn_small("light", photons)

    atom_numbers = np.array(populations, dtype=float)
    photon_numbers = np.array(photons, dtype=float)
    variances = np.repeat(np.concatenate([atom_numbers, photon_numbers]) / 4.0, 2)
    return GaussianState(
        layout=layout,
        mean=np.zeros(variances.size),
        cov=np.diag(variances),
        jx=atom_numbers / 2.0,
        sx=photon_numbers / 2.0,
        atom_numbers=atom_numbers,
        photon_numbers=photon_numbers,
        atom_segments=tuple(segments),
        light_segments=tuple(LightSegment(k, s) for s, k in enumerate(channels)),
        next_serial=len(photons),
    )


def commutation_matrix(state: GaussianState) -> np.ndarray:
    """
    Antisymmetric commutation matrix: block jx * epsilon per atom segment,
    sx * epsilon per light segment, zero between segments.
    """
    amplitudes = np.concatenate([state.jx, state.sx])
    return np.kron(np.diag(amplitudes), EPSILON)


def append_light_segment(state: GaussianState, photons: float, channel: int) -> GaussianState:
    """
    Return a new state with one more coherent light segment, uncorrelated
    with everything already present.
    """
    if not np.isfinite(photons) or photons <= 0:
        raise InvalidInputError(f"photon number must be positive, got {photons}")
    if not 0 <= channel < state.layout.channels:
        raise InvalidInputError(f"channel {channel} outside layout")
    if photons < GROUP_CONTRACTION_THRESHOLD:
        _warn_small("light", [photons])

    dim = state.dim
    cov = np.zeros((dim + 2, dim + 2))
    cov[:dim, :dim] = state.cov
    cov[dim, dim] = cov[dim + 1, dim + 1] = photons / 4.0
    return replace(
        state,
        mean=np.concatenate([state.mean, np.zeros(2)]),
        cov=cov,
        jx=state.jx.copy(),
        sx=np.append(state.sx, photons / 2.0),
        atom_numbers=state.atom_numbers.copy(),
        photon_numbers=np.append(state.photon_numbers, float(photons)),
        light_segments=state.light_segments + (LightSegment(channel, state.next_serial),),
        next_serial=state.next_serial + 1,
    )


def remove_segments(state: GaussianState, indices: Iterable[int]) -> GaussianState:
    """
    Delete in-flight light segments (rows, columns, mean and Sx entries).

    Args:
        state: Current state
        indices: Segment positions in the phase-space ordering (atoms first);
            each must refer to a light segment

    Raises:
        InvalidOperationError: If an index refers to an atom segment
    """
    positions = sorted(set(int(i) for i in indices))
    total = state.n_atom + state.n_light
    for position in positions:
        if position < state.n_atom:
            raise InvalidOperationError(f"segment {position} is an atom segment and cannot be removed")
        if position >= total:
            raise InvalidInputError(f"segment {position} does not exist")

    light = [p - state.n_atom for p in positions]
    rows = [r for p in positions for r in (2 * p, 2 * p + 1)]
    cov = np.delete(np.delete(state.cov, rows, axis=0), rows, axis=1)
    return replace(
        state,
        mean=np.delete(state.mean, rows),
        cov=cov,
        jx=state.jx.copy(),
        sx=np.delete(state.sx, light),
        atom_numbers=state.atom_numbers.copy(),
        photon_numbers=np.delete(state.photon_numbers, light),
        light_segments=tuple(s for j, s in enumerate(state.light_segments) if j not in light),
    )


def total_jz(state: GaussianState, channels: Optional[Iterable[int]] = None) -> ObservableSpec:
    """Observable summing J_z over all atom segments (optionally only some channels)."""
    wanted = None if channels is None else set(channels)
    coeffs = np.zeros(state.dim)
    for i, (k, _) in enumerate(state.atom_segments):
        if wanted is None or k in wanted:
            coeffs[state.atom_z(i)] = 1.0
    return ObservableSpec(coeffs)


def observable_variance(state: GaussianState, spec: ObservableSpec) -> float:
    """Variance p^T cov p of a linear observable."""
    p = spec.coefficients
    if p.size != state.dim:
        raise InvalidInputError(f"observable has dimension {p.size}, state has {state.dim}")
    return float(p @ state.cov @ p)


def squeezing_parameter(state: GaussianState, channels: Optional[Iterable[int]] = None) -> float:
    """
    Spin squeezing parameter 2 var(sum J_z) / sum Jx.

    Args:
        state: Current state
        channels: Restrict both sums to these channels (default: whole ensemble)

    Raises:
        UndefinedObservableError: If the summed Jx is zero
    """
    wanted = None if channels is None else set(channels)
    selected = [i for i, (k, _) in enumerate(state.atom_segments) if wanted is None or k in wanted]
    jx = float(np.sum(state.jx[selected])) if selected else 0.0
    if jx <= 0.0:
        raise UndefinedObservableError("squeezing parameter undefined: Jx is zero")
    return 2.0 * observable_variance(state, total_jz(state, wanted)) / jx


def assert_physical(state: GaussianState, atom_block_only: bool = False) -> None:
    """
    Raise PhysicalityError unless the covariance is PSD within 1e-9 * trace.

    With atom_block_only the check is restricted to the atomic block A.
    """
    cov = state.cov
    if atom_block_only:
        cov = cov[: 2 * state.n_atom, : 2 * state.n_atom]
    if cov.size == 0:
        return
    tol = PSD_RTOL * max(float(np.trace(cov)), 0.0)
    if not is_psd(symmetrize(cov), tol):
        raise PhysicalityError(
            f"covariance lost positivity: min eigenvalue {min_eigenvalue(cov):.3e}, tolerance {tol:.3e}"
        )
