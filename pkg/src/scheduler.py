"""
Time-stepped pipeline: light injection, per-channel transit through the
atom segments, loss, mixing, magnetic rotation and detection.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import GCPViolationError, InvalidInputError, NoConvergenceError, TimeStepTooLargeError
from .maps import (
    GaussianMap,
    apply_gaussian_map,
    apply_linear,
    decay_amplitudes,
    loss_decoherence_map,
    magnetic_displacement,
    mix_amplitudes,
    mixing_map,
    qnd_interaction_map,
    validate_gcp,
)
from .measurement import Detector, DetectorKind, DetectorModel
from .physics import (
    coupling_g,
    mixing_probability,
    scattering_cross_section,
    scattering_probs,
    whole_system_t0,
)
from .species import AtomicSpecies
from .state import (
    GaussianState,
    SegmentLayout,
    append_light_segment,
    assert_physical,
    init_coherent,
    observable_variance,
    squeezing_parameter,
    total_jz,
)

if TYPE_CHECKING:
    from .config import ScenarioConfig

logger = logging.getLogger(__name__)

# Per-step probabilities above this make the splitting of effects visible.
SMALL_STEP_PROBABILITY = 0.1
# Full PSD check up to this dimension, atomic block only beyond.
FULL_PSD_CHECK_DIM = 256
MAX_HALVINGS = 20


class Effect(str, Enum):
    INTERACTION = "interaction"
    LOSS = "loss"
    MIXING = "mixing"
    MAGNETIC = "magnetic"


DEFAULT_EFFECT_ORDER: Tuple[Effect, ...] = (
    Effect.INTERACTION,
    Effect.LOSS,
    Effect.MIXING,
    Effect.MAGNETIC,
)
NOISE_LAST = (Effect.INTERACTION, Effect.LOSS)
NOISE_FIRST = (Effect.LOSS, Effect.INTERACTION)


@dataclass(frozen=True)
class StepPlan:
    """
    Time step, number of steps, order of effects within a step, detector.

    Zero-dimensional detector kinds are not step plans; they are built by
    ``zero_dimensional_series`` and rejected by Scheduler.
    """

    tau: float
    total_steps: int
    effect_order: Tuple[Effect, ...] = DEFAULT_EFFECT_ORDER
    detector: DetectorModel = field(default_factory=DetectorModel)

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise InvalidInputError(f"tau must be positive, got {self.tau}")
        if self.total_steps < 1:
            raise InvalidInputError(f"total_steps must be >= 1, got {self.total_steps}")
        order = tuple(Effect(e) for e in self.effect_order)
        if len(set(order)) != len(order):
            raise InvalidInputError(f"each effect may appear at most once, got {[e.value for e in order]}")
        object.__setattr__(self, "effect_order", order)

    def with_transit_order(self, first: Effect) -> "StepPlan":
        """Same plan with interaction and loss swapped so that ``first`` leads."""
        second = Effect.LOSS if first is Effect.INTERACTION else Effect.INTERACTION
        rest = [e for e in self.effect_order if e not in NOISE_LAST]
        return replace(self, effect_order=(first, second, *rest))


@dataclass(frozen=True)
class SimulationModel:
    """
    Physical content of a run: layout, populations, couplings and switches.

    Built once from a ScenarioConfig and shared read-only between runs.
    """

    species: AtomicSpecies
    layout: SegmentLayout
    atoms_per_segment: Tuple[Optional[float], ...]
    photon_flux: float
    light_fractions: Tuple[float, ...]
    couplings: Tuple[float, ...]
    scattering_sigma: float
    t0: float
    rho: float = 1.0
    decoherence: bool = True
    light_loss: bool = False
    mixing_enabled: bool = False
    mixing_rate: Optional[float] = None
    temperature: float = 0.0
    fields: Tuple[float, ...] = ()
    lande_gf: float = 0.0
    check_invariants: bool = True
    max_light_segments: int = 5000

    @classmethod
    def from_config(cls, config: "ScenarioConfig") -> "SimulationModel":
        species = config.species()
        beam = config.beam_params()
        layout = config.segment_layout()
        return cls(
            species=species,
            layout=layout,
            atoms_per_segment=tuple(config.atoms_per_segment()),
            photon_flux=beam.photon_flux,
            light_fractions=tuple(config.layout.fractions("light_fractions")),
            couplings=tuple(coupling_g(species, beam.detuning, a) for a in layout.cross_sections),
            scattering_sigma=scattering_cross_section(species, beam.detuning),
            t0=whole_system_t0(species, beam, config.atoms.number),
            rho=config.noise.rho,
            decoherence=config.noise.decoherence,
            light_loss=config.noise.light_loss,
            mixing_enabled=config.mixing.enabled,
            mixing_rate=config.mixing.rate,
            temperature=config.atoms.temperature,
            fields=tuple(config.magnetic.field_tesla),
            lande_gf=config.magnetic.lande_gf if config.magnetic.lande_gf is not None else species.lande_gf,
            check_invariants=config.check_invariants,
            max_light_segments=config.max_light_segments,
        )

    def photons_per_step(self, tau: float) -> List[float]:
        """Photons injected into each channel per step (real-valued)."""
        return [self.photon_flux * tau * f for f in self.light_fractions]

    def eta_per_step(self, tau: float) -> float:
        """Largest atomic scattering probability of one step over all channels."""
        return max(
            n * self.scattering_sigma / a
            for n, a in zip(self.photons_per_step(tau), self.layout.cross_sections)
        )

    def mixing_per_step(self, channel: int, tau: float) -> float:
        """m_tau between ``channel`` and ``channel + 1``."""
        if self.mixing_rate is not None:
            m_tau = self.mixing_rate * tau
            if m_tau > 0.5:
                raise TimeStepTooLargeError(f"mixing probability {m_tau:.3g} exceeds 1/2; reduce tau")
            return m_tau
        area = 0.5 * (self.layout.cross_sections[channel] + self.layout.cross_sections[channel + 1])
        return mixing_probability(self.temperature, self.species.mass, area, tau)

    def field_per_segment(self, state: GaussianState) -> List[float]:
        per_channel = len(self.fields) == self.layout.channels
        stride = self.layout.atom_segments_per_channel
        return [
            self.fields[k] if per_channel else self.fields[k * stride + l]
            for k, l in state.atom_segments
        ]

    def initial_state(self, pulse_segments: int = 1) -> GaussianState:
        layout = replace(self.layout, pulse_segments=pulse_segments)
        return init_coherent(layout, list(self.atoms_per_segment))


@dataclass(frozen=True)
class SqueezingSample:
    step: int
    time: float
    t_over_t0: float
    xi2_total: float
    xi2_channels: Tuple[float, ...]
    var_jz_total: float
    var_jz_channels: Tuple[float, ...]


@dataclass
class SqueezingSeries:
    """One labelled squeezing trajectory."""

    label: str
    t0: float
    tau: float
    channels: int
    samples: List[SqueezingSample] = field(default_factory=list)

    def xi2(self) -> np.ndarray:
        return np.array([s.xi2_total for s in self.samples])

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.samples:
            row: Dict[str, object] = {
                "t_over_t0": s.t_over_t0,
                "curve_label": self.label,
                "xi2_total": s.xi2_total,
            }
            for k, value in enumerate(s.xi2_channels, start=1):
                row[f"xi2_channel_{k}"] = value
            row["var_jz_total"] = s.var_jz_total
            row["t_seconds"] = s.time
            rows.append(row)
        return pd.DataFrame(rows, columns=series_columns(self.channels))


def series_columns(channels: int) -> List[str]:
    return (
        ["t_over_t0", "curve_label", "xi2_total"]
        + [f"xi2_channel_{k}" for k in range(1, channels + 1)]
        + ["var_jz_total", "t_seconds"]
    )


class Scheduler:
    """
    Drives one run: a model, a plan and a detector.

    Each step injects one light segment per illuminated channel, passes it
    through the channel's atom segments in longitudinal order and hands the
    step's segments to the detector.
    """

    def __init__(self, model: SimulationModel, plan: StepPlan, label: str = "run", warn_coarse: bool = True):
        if plan.detector.zero_dimensional:
            raise InvalidInputError(
                f"{plan.detector.kind.value} is a whole-pulse curve; use zero_dimensional_series"
            )
        self.model = model
        self.plan = plan
        self.label = label
        self.detector = Detector(plan.detector)
        self.injected_photons = 0.0
        self.maps_checked = 0
        self.final_state: Optional[GaussianState] = None

        if model.max_light_segments and not plan.detector.resolves_segments:
            buffered = plan.total_steps * sum(1 for f in model.light_fractions if f > 0)
            if buffered > model.max_light_segments:
                raise InvalidInputError(
                    f"{buffered} buffered light segments exceed the cap of {model.max_light_segments}; "
                    "increase tau or reduce the run length"
                )
        eta = model.eta_per_step(plan.tau)
        if warn_coarse and eta >= SMALL_STEP_PROBABILITY:
            logger.warning("eta_tau = %.3g >= %g: tau is coarse", eta, SMALL_STEP_PROBABILITY)
        if warn_coarse and self._mixing_active:
            m_tau = max(model.mixing_per_step(k, plan.tau) for k in range(model.layout.channels - 1))
            if m_tau >= SMALL_STEP_PROBABILITY:
                logger.warning("m_tau = %.3g >= %g: tau is coarse", m_tau, SMALL_STEP_PROBABILITY)

    @property
    def _mixing_active(self) -> bool:
        return (
            self.model.mixing_enabled
            and Effect.MIXING in self.plan.effect_order
            and self.model.layout.channels > 1
        )

    def _apply(self, state: GaussianState, gmap: GaussianMap) -> None:
        if self.model.check_invariants:
            if not validate_gcp(gmap):
                raise GCPViolationError(f"map on rows {gmap.indices} adds less noise than required")
            self.maps_checked += 1
        apply_gaussian_map(state, gmap)

    def _transit(self, state: GaussianState, serial: int) -> None:
        """Pass one light segment through every atom segment of its channel."""
        model = self.model
        j = state.light_position(serial)
        channel = state.light_segments[j].channel
        area = model.layout.cross_sections[channel]
        coupling = model.couplings[channel]
        order = [e for e in self.plan.effect_order if e in NOISE_LAST]
        atoms = state.atoms_in_channel(channel)
        lossy_light = model.light_loss and Effect.LOSS in order and bool(atoms)

        def light_loss() -> None:
            channel_atoms = float(np.sum(state.atom_numbers[atoms]))
            _, epsilon = scattering_probs(state.photon_numbers[j], channel_atoms, area, model.scattering_sigma)
            self._apply(state, loss_decoherence_map(0.0, epsilon, model.rho, state, light=j))
            decay_amplitudes(state, 0.0, epsilon, model.rho, light=j)

        # once per transit: ahead of the atoms only when loss precedes interaction
        loss_leads = lossy_light and order == list(NOISE_FIRST)
        if loss_leads:
            light_loss()
        for i in atoms:
            for effect in order:
                if effect is Effect.INTERACTION:
                    apply_linear(state, qnd_interaction_map(coupling, state, i, j))
                elif model.decoherence:
                    eta, _ = scattering_probs(
                        state.photon_numbers[j], state.atom_numbers[i], area, model.scattering_sigma
                    )
                    self._apply(state, loss_decoherence_map(eta, 0.0, model.rho, state, atom=i))
                    decay_amplitudes(state, eta, 0.0, model.rho, atom=i)
        if lossy_light and not loss_leads:
            light_loss()

    def _mix(self, state: GaussianState) -> None:
        """Exchange atoms between neighbouring channels at equal longitudinal index."""
        layout = self.model.layout
        for k in range(layout.channels - 1):
            m_tau = self.model.mixing_per_step(k, self.plan.tau)
            if m_tau == 0.0:
                continue
            for l in range(layout.atom_segments_per_channel):
                first, second = state.atom_position(k, l), state.atom_position(k + 1, l)
                if first is None or second is None:
                    continue
                pair = (first, second)
                pair_atoms = float(state.atom_numbers[first] + state.atom_numbers[second])
                self._apply(state, mixing_map(m_tau, pair_atoms, state, pair))
                mix_amplitudes(state, m_tau, pair)

    def _rotate(self, state: GaussianState) -> None:
        fields = self.model.field_per_segment(state)
        state.mean += magnetic_displacement(state, fields, self.model.lande_gf, self.plan.tau)

    def step(self, state: GaussianState, step_index: int) -> GaussianState:
        """
        Advance the state by one time step.

        Args:
            state: Current state (not modified)
            step_index: Zero-based index of the step

        Returns:
            State after the step, with this step's light handed to the detector
        """
        serials = []
        for channel, photons in enumerate(self.model.photons_per_step(self.plan.tau)):
            if photons <= 0:
                continue
            state = append_light_segment(state, photons, channel)
            serials.append(state.next_serial - 1)
            self.injected_photons += photons

        transited = False
        for effect in self.plan.effect_order:
            if effect in NOISE_LAST:
                if not transited:
                    for serial in serials:
                        self._transit(state, serial)
                    state = self.detector.detect(state, serials)
                    transited = True
            elif effect is Effect.MIXING:
                if self._mixing_active:
                    self._mix(state)
            elif effect is Effect.MAGNETIC:
                if self.model.fields:
                    self._rotate(state)
        if not transited:
            state = self.detector.detect(state, serials)

        if self.model.check_invariants:
            assert_physical(state, atom_block_only=state.dim > FULL_PSD_CHECK_DIM)
        return state

    def sample(self, state: GaussianState, step_index: int) -> SqueezingSample:
        """Observables after ``step_index`` steps (the no-resolution detector previews)."""
        if self.detector.buffered:
            state = self.detector.preview(state, atoms_only=True)
        xi2_channels, var_channels = [], []
        for k in range(self.model.layout.channels):
            if state.atoms_in_channel(k):
                xi2_channels.append(squeezing_parameter(state, [k]))
                var_channels.append(observable_variance(state, total_jz(state, [k])))
            else:
                xi2_channels.append(math.nan)
                var_channels.append(math.nan)
        time = step_index * self.plan.tau
        return SqueezingSample(
            step=step_index,
            time=time,
            t_over_t0=time / self.model.t0,
            xi2_total=squeezing_parameter(state),
            xi2_channels=tuple(xi2_channels),
            var_jz_total=observable_variance(state, total_jz(state)),
            var_jz_channels=tuple(var_channels),
        )

    def run(self, state: Optional[GaussianState] = None) -> SqueezingSeries:
        """Execute every step of the plan, sampling at t = 0 and after each step."""
        if state is None:
            state = self.model.initial_state(self.plan.total_steps)
        series = SqueezingSeries(
            label=self.label, t0=self.model.t0, tau=self.plan.tau, channels=self.model.layout.channels
        )
        series.samples.append(self.sample(state, 0))
        for index in range(1, self.plan.total_steps + 1):
            state = self.step(state, index - 1)
            series.samples.append(self.sample(state, index))
        self.final_state = self.detector.finish(state)
        logger.debug("%s: %d steps, %d maps checked", self.label, self.plan.total_steps, self.maps_checked)
        return series


def default_tau(config: "ScenarioConfig", model: SimulationModel) -> float:
    return config.tau if config.tau is not None else config.tau_fraction * model.t0


def steps_for(config: "ScenarioConfig", model: SimulationModel, tau: float) -> int:
    if config.total_steps is not None:
        return config.total_steps
    return max(1, int(round(config.total_time * model.t0 / tau)))


def make_plan(config: "ScenarioConfig", tau: float, total_steps: int) -> StepPlan:
    return StepPlan(
        tau=tau,
        total_steps=total_steps,
        effect_order=tuple(config.effect_order),
        detector=config.detector_model(),
    )


def zero_dimensional_series(
    config: "ScenarioConfig",
    model: Optional[SimulationModel] = None,
    noise_first: Optional[bool] = None,
    label: Optional[str] = None,
) -> SqueezingSeries:
    """
    Whole-pulse comparison curve: for every sample time t the full pulse is a
    single light segment applied in one step of length t.

    The curve stops (with a warning) at the first t whose scattering
    probability reaches 1.
    """
    model = model or SimulationModel.from_config(config)
    if noise_first is None:
        noise_first = config.detector.kind is DetectorKind.ZERO_DIMENSIONAL_NOISE_BEFORE
    order = NOISE_FIRST if noise_first else NOISE_LAST
    kind = DetectorKind.ZERO_DIMENSIONAL_NOISE_BEFORE if noise_first else DetectorKind.ZERO_DIMENSIONAL_NOISE_AFTER
    tau = default_tau(config, model)
    steps = steps_for(config, model, tau)
    detector = DetectorModel(kind=DetectorKind.IDEAL, angle=config.detector.angle)

    series = SqueezingSeries(label=label or kind.value, t0=model.t0, tau=tau, channels=model.layout.channels)
    start = Scheduler(model, StepPlan(tau, 1, order, detector), warn_coarse=False)
    series.samples.append(start.sample(model.initial_state(), 0))
    for index in range(1, steps + 1):
        t = index * tau
        try:
            scheduler = Scheduler(model, StepPlan(t, 1, order, detector), warn_coarse=False)
            state = scheduler.step(model.initial_state(), 0)
        except TimeStepTooLargeError as exc:
            logger.warning("%s truncated at t/t0 = %.3g: %s", series.label, t / model.t0, exc)
            break
        sample = scheduler.sample(state, 1)
        series.samples.append(replace(sample, step=index))
    return series


def run(config: "ScenarioConfig", label: Optional[str] = None, tau: Optional[float] = None) -> SqueezingSeries:
    """
    Run one scenario configuration.

    Args:
        config: Validated configuration
        label: Curve label (default: the detector kind)
        tau: Time step overriding the configuration (s)

    Returns:
        SqueezingSeries sampled at t = 0 and after every step
    """
    model = SimulationModel.from_config(config)
    label = label or config.detector.kind.value
    if config.detector_model().zero_dimensional:
        if tau is not None:
            config = config.updated(tau=tau)
        return zero_dimensional_series(config, model, label=label)
    if tau is None:
        tau = select_tau(config) if config.auto_tau and config.tau is None else default_tau(config, model)
    steps = steps_for(config, model, tau)
    logger.info("%s: t0 = %.4g s, tau = %.4g t0, %d steps", label, model.t0, tau / model.t0, steps)
    return Scheduler(model, make_plan(config, tau, steps), label=label).run()


def ordering_discrepancy(config: "ScenarioConfig", tau: float, model: Optional[SimulationModel] = None) -> float:
    """
    Relative difference of the final xi^2 between noise-last and noise-first
    ordering, both run to the configured physical time.
    """
    model = model or SimulationModel.from_config(config)
    steps = max(1, int(round(config.total_time * model.t0 / tau)))
    base = make_plan(config, tau, steps)
    if base.detector.zero_dimensional:
        base = replace(base, detector=replace(base.detector, kind=DetectorKind.IDEAL))
    plans = [base.with_transit_order(Effect.INTERACTION), base.with_transit_order(Effect.LOSS)]
    with ThreadPoolExecutor(max_workers=len(plans)) as executor:
        futures = [executor.submit(lambda p=p: Scheduler(model, p).run().samples[-1].xi2_total) for p in plans]
        last, first = (f.result() for f in futures)
    return abs(last - first) / abs(last)


def select_tau(config: "ScenarioConfig", rel_tol: float = 1e-3) -> float:
    """
    Halve tau until the order of interaction and loss no longer matters.

    Starts from the configured tau (or ``tau_fraction * t0``), first halves
    until eta_tau < 0.1, then until the two orderings agree within rel_tol.

    Raises:
        NoConvergenceError: After more than 20 halvings
    """
    if rel_tol <= 0:
        raise InvalidInputError(f"rel_tol must be positive, got {rel_tol}")
    model = SimulationModel.from_config(config)
    tau = default_tau(config, model)
    halvings = 0
    while model.eta_per_step(tau) >= SMALL_STEP_PROBABILITY:
        tau, halvings = tau / 2.0, halvings + 1
        if halvings > MAX_HALVINGS:
            raise NoConvergenceError("eta_tau stays above 0.1 after 20 halvings")
    while True:
        discrepancy = ordering_discrepancy(config, tau, model)
        logger.debug("tau = %.4g t0: ordering discrepancy %.3e", tau / model.t0, discrepancy)
        if discrepancy < rel_tol:
            logger.info("selected tau = %.4g t0 after %d halvings", tau / model.t0, halvings)
            return tau
        tau, halvings = tau / 2.0, halvings + 1
        if halvings > MAX_HALVINGS:
            raise NoConvergenceError(f"ordering discrepancy {discrepancy:.3e} above {rel_tol} after 20 halvings")
