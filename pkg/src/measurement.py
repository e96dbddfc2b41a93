"""
Projective homodyne measurement of light observables.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Sequence, Set

import numpy as np

from .errors import DegenerateMeasurementError, DoubleDetectionError, InvalidInputError, InvalidOperationError
from .linalg import RANK_RTOL, pseudoinverse, symmetrize
from .state import GaussianState, ObservableSpec, remove_segments

logger = logging.getLogger(__name__)


class DetectorKind(str, Enum):
    IDEAL = "ideal"
    NO_TIME_RESOLUTION = "no_time_resolution"
    ZERO_DIMENSIONAL_NOISE_AFTER = "zero_dimensional_noise_after"
    ZERO_DIMENSIONAL_NOISE_BEFORE = "zero_dimensional_noise_before"


@dataclass(frozen=True)
class DetectorModel:
    """Detector kind plus the measured quadrature S_theta = cos(theta) S_y + sin(theta) S_z."""

    kind: DetectorKind = DetectorKind.IDEAL
    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectorKind(self.kind))
        if not 0.0 <= self.angle < 2.0 * math.pi:
            raise InvalidInputError(f"detector angle must lie in [0, 2pi), got {self.angle}")

    @property
    def resolves_segments(self) -> bool:
        return self.kind is not DetectorKind.NO_TIME_RESOLUTION

    @property
    def zero_dimensional(self) -> bool:
        return self.kind in (DetectorKind.ZERO_DIMENSIONAL_NOISE_AFTER, DetectorKind.ZERO_DIMENSIONAL_NOISE_BEFORE)


@dataclass(frozen=True)
class Projector:
    """
    Orthogonal projector P = Q Q^T onto measured light directions.

    ``basis`` holds an orthonormal basis Q (dim x rank); ``observable`` is the
    summed S_theta it was built from.
    """

    basis: np.ndarray = field(repr=False)
    observable: ObservableSpec = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def build_projector(state: GaussianState, segment_indices: Sequence[int], angle: float) -> Projector:
    """
    Rank-1 projector onto the summed quadrature of the listed light segments.

    p = sum_j (cos(theta) e_{s_y,j} + sin(theta) e_{s_z,j}); P = p p^T / p^T p.
    One segment models the ideal detector, all pulse segments the detector
    without time resolution, all channels at fixed l the large-area detector.

    Args:
        state: Current state
        segment_indices: Light segment positions (0-based among light segments)
        angle: Quadrature angle theta

    Raises:
        InvalidOperationError: If no segment is given
    """
    segment_indices = list(segment_indices)
    if not segment_indices:
        raise InvalidOperationError("projector needs at least one light segment")
    p = np.zeros(state.dim)
    for j in segment_indices:
        if not 0 <= j < state.n_light:
            raise InvalidInputError(f"light segment {j} is not in flight")
        p[state.light_y(j)] += math.cos(angle)
        p[state.light_z(j)] += math.sin(angle)
    observable = ObservableSpec(p)
    return Projector(basis=(p / np.linalg.norm(p))[:, None], observable=observable)


def conditional_update(state: GaussianState, projector: Projector) -> GaussianState:
    """
    Condition the covariance on the projected observable.

    gamma' = gamma - gamma (P gamma P)^- gamma, evaluated in the range of P:
    (P gamma P)^- = Q (Q^T gamma Q)^- Q^T.

    Returns:
        New state (means are not shifted since no outcome is sampled)

    Raises:
        DegenerateMeasurementError: If the measured variance is numerically zero
    """
    gamma_q, inverse = _measurement_gain(state, projector)
    updated = state.copy()
    updated.cov = symmetrize(state.cov - gamma_q @ inverse @ gamma_q.T)
    return updated


def _measurement_gain(state: GaussianState, projector: Projector):
    q = projector.basis
    if q.shape[0] != state.dim:
        raise InvalidInputError(f"projector dimension {q.shape[0]} does not match state {state.dim}")
    gamma_q = state.cov @ q
    measured = symmetrize(q.T @ gamma_q)
    scale = max(float(np.max(np.abs(np.diag(state.cov)))), np.finfo(float).tiny)
    if np.max(np.abs(measured)) <= RANK_RTOL * scale:
        raise DegenerateMeasurementError("measured observable has zero variance")
    return gamma_q, pseudoinverse(measured)


def conditioned_atoms(state: GaussianState, projector: Projector) -> GaussianState:
    """
    Atom-only state conditioned on the projected observable.

    Same update as ``conditional_update`` restricted to the atomic block;
    every light segment is dropped from the result.
    """
    gamma_q, inverse = _measurement_gain(state, projector)
    rows = 2 * state.n_atom
    atom_gain = gamma_q[:rows]
    return replace(
        state,
        mean=state.mean[:rows].copy(),
        cov=symmetrize(state.cov[:rows, :rows] - atom_gain @ inverse @ atom_gain.T),
        jx=state.jx.copy(),
        sx=np.zeros(0),
        atom_numbers=state.atom_numbers.copy(),
        photon_numbers=np.zeros(0),
        light_segments=(),
    )


class Detector:
    """
    Hands exiting light segments to the measurement.

    Tracks which segments were already seen so none is measured twice. The
    time-resolving kinds measure every group immediately; the detector
    without time resolution buffers segments until ``finish``.
    """

    def __init__(self, model: DetectorModel):
        self.model = model
        self.detected: Set[int] = set()
        self.buffered: List[int] = []

    def _register(self, serials: Iterable[int]) -> List[int]:
        serials = list(serials)
        for serial in serials:
            if serial in self.detected or serial in self.buffered:
                raise DoubleDetectionError(f"light segment #{serial} was already detected")
        return serials

    def measure(self, state: GaussianState, serials: Sequence[int]) -> GaussianState:
        """Condition on the summed quadrature of ``serials`` and retire them."""
        positions = [state.light_position(s) for s in serials]
        conditioned = conditional_update(state, build_projector(state, positions, self.model.angle))
        self.detected.update(serials)
        return remove_segments(conditioned, [state.n_atom + j for j in positions])

    def detect(self, state: GaussianState, serials: Sequence[int]) -> GaussianState:
        """
        Handle segments that have left every atom segment of their channel.

        Args:
            state: Current state
            serials: Serial numbers of the exiting segments (one per channel
                for the large-area detector)

        Returns:
            Updated state (unchanged if the segments were buffered)
        """
        serials = self._register(serials)
        if not serials:
            return state
        if self.model.resolves_segments:
            return self.measure(state, serials)
        self.buffered.extend(serials)
        return state

    def preview(self, state: GaussianState, atoms_only: bool = False) -> GaussianState:
        """
        State conditioned on everything buffered so far, without committing.

        With ``atoms_only`` only the atomic block is conditioned and returned,
        which is all the squeezing observables need.
        """
        if not self.buffered:
            return state
        positions = [state.light_position(s) for s in self.buffered]
        projector = build_projector(state, positions, self.model.angle)
        if atoms_only:
            return conditioned_atoms(state, projector)
        return conditional_update(state, projector)

    def finish(self, state: GaussianState) -> GaussianState:
        """Measure the grand sum of all buffered segments (end of pulse)."""
        if not self.buffered:
            return state
        serials, self.buffered = self.buffered, []
        logger.debug("measuring %d buffered light segments", len(serials))
        return self.measure(state, serials)


def detect(state: GaussianState, detector: Detector, serials: Sequence[int]) -> GaussianState:
    """Module-level entry point for ``Detector.detect``."""
    return detector.detect(state, serials)
