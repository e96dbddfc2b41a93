"""
Atomic-physics coefficients for the off-resonant QND interface.

Inputs are SI (angular frequencies in rad/s); returned couplings are in
hbar = 1 units, i.e. g_tilde = hbar^2 * g is dimensionless.
"""
import logging
import math
from typing import Tuple

import numpy as np
from scipy import constants

from .errors import InvalidInputError, ResonancePoleError, TimeStepTooLargeError
from .species import AtomicSpecies, BeamParams

logger = logging.getLogger(__name__)

BOHR_MAGNETON = constants.physical_constants["Bohr magneton"][0]
HBAR = constants.hbar
K_B = constants.k

# Validity of the far-detuned formulas is enforced (as a warning) for |Delta| > 10 Gamma.
FAR_DETUNING_FACTOR = 10.0
SMALL_ANGLE = 0.1


def detuning_factors(species: AtomicSpecies, detuning: float) -> np.ndarray:
    """
    delta_F'(Delta) = 1 / (Delta + Delta_0F') for F' = 0, 1, 2.

    Raises:
        ResonancePoleError: If Delta hits -Delta_0F' for any F'
    """
    if abs(detuning) <= FAR_DETUNING_FACTOR * species.linewidth:
        logger.warning(
            "detuning %.4g rad/s is within %g linewidths; far-detuned formulas are inaccurate",
            detuning, FAR_DETUNING_FACTOR,
        )
    shifted = detuning + np.asarray(species.splittings)
    scale = max(abs(detuning), max(species.splittings), species.linewidth)
    if np.any(np.abs(shifted) <= 1e-12 * scale):
        raise ResonancePoleError(f"detuning {detuning} rad/s is on an excited-state resonance")
    return 1.0 / shifted


def coupling_g(species: AtomicSpecies, detuning: float, segment_cross_section: float) -> float:
    """
    Dimensionless QND coupling of one segment.

    g_tilde = (1/A) (Gamma lambda^2 / 16 pi) (-4 delta_0 - 5 delta_1 + 5 delta_2)

    Args:
        species: Atomic constants
        detuning: Delta in rad/s (per-segment light-shifted detuning allowed)
        segment_cross_section: Interaction cross section of the segment, m^2

    Returns:
        g_tilde (dimensionless)
    """
    if segment_cross_section <= 0:
        raise InvalidInputError(f"cross section must be positive, got {segment_cross_section}")
    d0, d1, d2 = detuning_factors(species, detuning)
    prefactor = species.linewidth * species.wavelength ** 2 / (16.0 * math.pi)
    return prefactor * (-4.0 * d0 - 5.0 * d1 + 5.0 * d2) / segment_cross_section


def scattering_cross_section(species: AtomicSpecies, detuning: float) -> float:
    """Off-resonant scattering cross section sigma(Delta) in m^2."""
    d0, d1, d2 = detuning_factors(species, detuning)
    return (
        species.wavelength ** 2 / (2.0 * math.pi)
        * species.linewidth ** 2 / 32.0
        * (4.0 * d0 ** 2 + 5.0 * d1 ** 2 + 7.0 * d2 ** 2)
    )


def scattering_probs(
    photons: float, atoms: float, cross_section: float, sigma: float
) -> Tuple[float, float]:
    """
    Per-step scattering probabilities.

    Args:
        photons: Photons N_L,tau in the light segment
        atoms: Atoms N_A the light traverses
        cross_section: Interaction area A, m^2
        sigma: Scattering cross section, m^2

    Returns:
        (eta_tau, epsilon): probability that an atom / a photon scatters

    Raises:
        TimeStepTooLargeError: If either probability reaches 1
    """
    if photons < 0 or atoms < 0 or sigma < 0 or cross_section <= 0:
        raise InvalidInputError("scattering inputs must be non-negative with positive area")
    eta = photons * sigma / cross_section
    epsilon = atoms * sigma / cross_section
    if eta >= 1.0 or epsilon >= 1.0:
        raise TimeStepTooLargeError(
            f"scattering probability too large (eta={eta:.3g}, epsilon={epsilon:.3g}); reduce tau"
        )
    return eta, epsilon


def characteristic_time(coupling_total: float, atoms: float, photon_flux: float) -> float:
    """
    t0 = 4 / (G^2 N_A Phi): the time at which the polarization rotation
    signal equals photon shot noise, for the unsegmented system.
    """
    if coupling_total == 0 or atoms <= 0 or photon_flux <= 0:
        raise InvalidInputError("characteristic time needs nonzero coupling and positive N_A, Phi")
    return 4.0 / (coupling_total ** 2 * atoms * photon_flux)


def whole_system_t0(species: AtomicSpecies, beam: BeamParams, atoms: float) -> float:
    """t0 of the unpartitioned system described by ``beam``."""
    coupling = coupling_g(species, beam.detuning, beam.cross_section)
    return characteristic_time(coupling, atoms, beam.photon_flux)


def rms_velocity(temperature: float, mass: float) -> float:
    """v_rms = sqrt(3 k_B T / m)."""
    if temperature < 0 or mass <= 0:
        raise InvalidInputError("temperature must be >= 0 and mass > 0")
    return math.sqrt(3.0 * K_B * temperature / mass)


def mixing_probability(temperature: float, mass: float, segment_cross_section: float, tau: float) -> float:
    """
    Probability per step that an atom crosses into a neighbouring segment,
    from the kinetic-gas wall-crossing rate r = v_rms / sqrt(6 pi A).

    Raises:
        TimeStepTooLargeError: If m_tau exceeds 1/2
    """
    if segment_cross_section <= 0 or tau < 0:
        raise InvalidInputError("cross section must be positive and tau non-negative")
    rate = rms_velocity(temperature, mass) / math.sqrt(6.0 * math.pi * segment_cross_section)
    m_tau = rate * tau
    if m_tau > 0.5:
        raise TimeStepTooLargeError(f"mixing probability {m_tau:.3g} exceeds 1/2; reduce tau")
    return m_tau


def rotation_angle(field_tesla: float, lande_gf: float, tau: float) -> float:
    """Larmor rotation angle theta = mu_B g_F B_z tau / hbar over one step."""
    return BOHR_MAGNETON * lande_gf * field_tesla * tau / HBAR


def main():
    """Print the coefficients of the shipped Rb-87 parameter set."""
    species = AtomicSpecies.from_file()
    beam = BeamParams(photon_flux=1e14, detuning=2 * math.pi * 1e9, cross_section=4 * math.pi * 1e-10)
    t0 = whole_system_t0(species, beam, 1e6)
    sigma = scattering_cross_section(species, beam.detuning)
    eta, epsilon = scattering_probs(beam.photon_flux * t0, 1e6, beam.cross_section, sigma)

    print(f"g_tilde : {coupling_g(species, beam.detuning, beam.cross_section):.6e}")
    print(f"sigma   : {sigma:.6e} m^2")
    print(f"t0      : {t0 * 1e6:.4f} us")
    print(f"eta(t0) : {eta:.4e}   epsilon: {epsilon:.4e}")
    print(f"m(t0)   : {mixing_probability(30e-6, species.mass, beam.cross_section / 2, t0):.4e}")


if __name__ == "__main__":
    main()
