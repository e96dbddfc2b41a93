"""
Physical transformations as Gaussian maps acting on a few segments.

Maps are stored locally: ``indices`` lists the phase-space rows they touch
and the matrices act on that sub-block; everywhere else M is the identity
and N is zero. ``apply_linear`` / ``apply_gaussian_map`` update a state in
place with O(dim) row and column operations.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, InvalidOperationError
from .linalg import antisymmetric_abs, is_hermitian_psd, symmetrize
from .physics import SMALL_ANGLE, rotation_angle
from .state import EPSILON, GaussianState

logger = logging.getLogger(__name__)

# Physical states obey gamma + i Sigma / 2 >= 0 with iSigma = [v, v]; maps inherit the 1/2.
UNCERTAINTY_NORMALIZATION = 0.5
GCP_RTOL = 1e-9


@dataclass(frozen=True)
class LinearTransform:
    """Coherent evolution v -> T v restricted to ``indices``."""

    indices: Tuple[int, ...]
    matrix: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class GaussianMap:
    """
    Gaussian completely-positive map gamma -> M gamma M^T + N on ``indices``,
    with the commutation matrices before (Sigma) and after (Sigma') it acts.
    """

    indices: Tuple[int, ...]
    transfer: np.ndarray = field(repr=False)
    noise: np.ndarray = field(repr=False)
    sigma_before: np.ndarray = field(repr=False)
    sigma_after: np.ndarray = field(repr=False)


def _commutation_block(amplitudes: Sequence[float]) -> np.ndarray:
    return np.kron(np.diag(np.asarray(amplitudes, dtype=float)), EPSILON)


def qnd_interaction_map(coupling: float, state: GaussianState, atom: int, light: int) -> LinearTransform:
    """
    QND step between atom segment ``atom`` and light segment ``light``.

    s_y += g sx j_z and j_y += g jx s_z; both z components are untouched.

    Args:
        coupling: Dimensionless coupling g_tilde of the atom segment
        state: State providing the amplitudes and the index map
        atom: Atom segment position
        light: Light segment position

    Raises:
        InvalidOperationError: If the two segments belong to different channels
    """
    if not 0 <= atom < state.n_atom or not 0 <= light < state.n_light:
        raise InvalidInputError(f"invalid segment pair (atom {atom}, light {light})")
    atom_channel = state.atom_segments[atom][0]
    light_channel = state.light_segments[light].channel
    if atom_channel != light_channel:
        raise InvalidOperationError(
            f"atom segment in channel {atom_channel} cannot couple to light in channel {light_channel}"
        )
    matrix = np.eye(4)
    matrix[2, 1] = coupling * state.sx[light]  # s_y <- j_z
    matrix[0, 3] = coupling * state.jx[atom]   # j_y <- s_z
    return LinearTransform(state.atom_block(atom) + state.light_block(light), matrix)


def loss_decoherence_map(
    eta: float,
    epsilon: float,
    rho: float,
    state: GaussianState,
    atom: Optional[int] = None,
    light: Optional[int] = None,
    atoms: Optional[float] = None,
    photons: Optional[float] = None,
) -> GaussianMap:
    """
    Scattering-induced loss and decoherence on one atom and/or one light segment.

    M = (1-eta) I_2 (+) (1-epsilon) I_2 and
    N = [eta(1-eta) + rho eta] N_A/4 I_2 (+) epsilon(1-epsilon) N_L/4 I_2.

    The caller must decay the amplitudes afterwards (see ``decay_amplitudes``);
    Sigma' is built from the decayed values.

    Args:
        eta: Atomic scattering probability per step
        epsilon: Photon scattering probability per transit
        rho: Fraction of scattered atoms returning (depolarized)
        state: Current state
        atom: Target atom segment position, or None
        light: Target light segment position, or None
        atoms: Atom number N_A (default: the segment's population)
        photons: Photon number N_L (default: the segment's photon number)

    Returns:
        GaussianMap over the targeted blocks
    """
    if not (0.0 <= eta < 1.0 and 0.0 <= epsilon < 1.0):
        raise InvalidInputError(f"scattering probabilities must lie in [0, 1): eta={eta}, epsilon={epsilon}")
    if not 0.0 <= rho <= 1.0:
        raise InvalidInputError(f"rho must lie in [0, 1], got {rho}")
    if atom is None and light is None:
        raise InvalidInputError("loss map needs at least one target")

    indices: Tuple[int, ...] = ()
    scales, noises, before, after = [], [], [], []
    if atom is not None:
        n_atoms = state.atom_numbers[atom] if atoms is None else atoms
        indices += state.atom_block(atom)
        scales.append(1.0 - eta)
        noises.append((eta * (1.0 - eta) + rho * eta) * n_atoms / 4.0)
        before.append(state.jx[atom])
        after.append((1.0 - eta) * state.jx[atom])
    if light is not None:
        n_photons = state.photon_numbers[light] if photons is None else photons
        indices += state.light_block(light)
        scales.append(1.0 - epsilon)
        noises.append(epsilon * (1.0 - epsilon) * n_photons / 4.0)
        before.append(state.sx[light])
        after.append((1.0 - epsilon) * state.sx[light])

    return GaussianMap(
        indices=indices,
        transfer=np.kron(np.diag(scales), np.eye(2)),
        noise=np.kron(np.diag(noises), np.eye(2)),
        sigma_before=_commutation_block(before),
        sigma_after=_commutation_block(after),
    )


def decay_amplitudes(
    state: GaussianState,
    eta: float,
    epsilon: float,
    rho: float,
    atom: Optional[int] = None,
    light: Optional[int] = None,
) -> None:
    """Apply the loss contract to the classical amplitudes and populations in place."""
    if atom is not None:
        state.jx[atom] *= 1.0 - eta
        state.atom_numbers[atom] *= 1.0 - (1.0 - rho) * eta
    if light is not None:
        state.sx[light] *= 1.0 - epsilon
        state.photon_numbers[light] *= 1.0 - epsilon


def mixing_matrix(m_tau: float) -> np.ndarray:
    """2x2 exchange matrix [[1-m, m], [m, 1-m]]."""
    if not 0.0 <= m_tau <= 0.5:
        raise InvalidInputError(f"mixing probability must lie in [0, 1/2], got {m_tau}")
    return np.array([[1.0 - m_tau, m_tau], [m_tau, 1.0 - m_tau]])


def mixing_map(m_tau: float, pair_atoms: float, state: GaussianState, pair: Tuple[int, int]) -> GaussianMap:
    """
    Incoherent exchange of atoms between two atom segments.

    M = [[1-m, m], [m, 1-m]] (x) I_2 and
    N = m(1-m) N_A/4 [[1, -1], [-1, 1]] (x) I_2 with N_A = N_1 + N_2, the
    population of the pair; a coherent pair stays coherent.

    The summed spin of the pair is left untouched: (1, 1) M = (1, 1) and
    (1, 1) annihilates the noise.
    """
    first, second = pair
    if first == second or not (0 <= first < state.n_atom and 0 <= second < state.n_atom):
        raise InvalidInputError(f"invalid atom segment pair {pair}")
    exchange = mixing_matrix(m_tau)
    difference = np.array([[1.0, -1.0], [-1.0, 1.0]])
    amplitudes = np.array([state.jx[first], state.jx[second]])
    return GaussianMap(
        indices=state.atom_block(first) + state.atom_block(second),
        transfer=np.kron(exchange, np.eye(2)),
        noise=np.kron(m_tau * (1.0 - m_tau) * pair_atoms / 4.0 * difference, np.eye(2)),
        sigma_before=_commutation_block(amplitudes),
        sigma_after=_commutation_block(exchange @ amplitudes),
    )


def mix_amplitudes(state: GaussianState, m_tau: float, pair: Tuple[int, int]) -> None:
    """Exchange Jx amplitudes and populations of a segment pair in place."""
    idx = list(pair)
    exchange = mixing_matrix(m_tau)
    state.jx[idx] = exchange @ state.jx[idx]
    state.atom_numbers[idx] = exchange @ state.atom_numbers[idx]


def magnetic_displacement(
    state: GaussianState, fields: Sequence[float], lande_gf: float, tau: float
) -> np.ndarray:
    """
    Mean-vector shift from a z magnetic field over one step.

    In the contracted algebra the rotation about z displaces j_y by
    theta * Jx per segment and leaves the covariance unchanged.

    Args:
        state: Current state
        fields: B_z in tesla, one entry per atom segment
        lande_gf: Lande factor g_F
        tau: Step duration, s

    Returns:
        Shift to add to ``state.mean`` (zero on light rows and z rows)
    """
    fields = np.asarray(fields, dtype=float)
    if fields.shape != (state.n_atom,):
        raise InvalidInputError(f"need one field per atom segment ({state.n_atom}), got {fields.shape}")
    shift = np.zeros(state.dim)
    for i, b_z in enumerate(fields):
        theta = rotation_angle(b_z, lande_gf, tau)
        if abs(theta) > SMALL_ANGLE:
            logger.warning("rotation angle %.3g rad exceeds the small-angle limit %g", theta, SMALL_ANGLE)
        shift[state.atom_y(i)] = theta * state.jx[i]
    return shift


def minimal_noise(transfer: np.ndarray, sigma_before: np.ndarray, sigma_after: np.ndarray) -> np.ndarray:
    """|i Sigma' - i M Sigma M^T|: the smallest symmetric N satisfying the literal bound."""
    return antisymmetric_abs(sigma_after - transfer @ sigma_before @ transfer.T)


def gcp_tolerance(gmap: GaussianMap) -> float:
    """Default tolerance 1e-9 * trace(N + |Sigma|)."""
    scale = np.trace(gmap.noise) + np.trace(antisymmetric_abs(gmap.sigma_before))
    return GCP_RTOL * float(scale)


def validate_gcp(gmap: GaussianMap, tol: Optional[float] = None) -> bool:
    """
    Check N + (i/2)(Sigma' - M Sigma M^T) >= -tol over the reals.

    Args:
        gmap: Map with its commutation matrices
        tol: Tolerance (default ``gcp_tolerance``)

    Returns:
        True if the map is completely positive
    """
    if tol is None:
        tol = gcp_tolerance(gmap)
    delta = gmap.sigma_after - gmap.transfer @ gmap.sigma_before @ gmap.transfer.T
    return is_hermitian_psd(gmap.noise, UNCERTAINTY_NORMALIZATION * delta, tol)


def apply_linear(state: GaussianState, transform: LinearTransform) -> None:
    """In place: v -> T v, gamma -> T gamma T^T."""
    idx = np.asarray(transform.indices)
    t = transform.matrix
    state.cov[idx, :] = t @ state.cov[idx, :]
    state.cov[:, idx] = state.cov[:, idx] @ t.T
    state.mean[idx] = t @ state.mean[idx]


def apply_gaussian_map(state: GaussianState, gmap: GaussianMap) -> None:
    """In place: v -> M v, gamma -> M gamma M^T + N."""
    idx = np.asarray(gmap.indices)
    m = gmap.transfer
    state.cov[idx, :] = m @ state.cov[idx, :]
    state.cov[:, idx] = state.cov[:, idx] @ m.T
    state.cov[np.ix_(idx, idx)] += symmetrize(gmap.noise)
    state.mean[idx] = m @ state.mean[idx]
