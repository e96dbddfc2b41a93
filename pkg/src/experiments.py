"""
Scenario presets, self-checks and CSV output.

Each preset builds a handful of configurations from a base ScenarioConfig,
runs them in parallel and returns the labelled series in a fixed order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import ScenarioConfig
from .errors import ConsistencyError, InvalidInputError, OutputError
from .maps import apply_gaussian_map, mixing_map
from .measurement import DetectorKind
from .physics import whole_system_t0
from .scheduler import (
    SimulationModel,
    SqueezingSeries,
    default_tau,
    ordering_discrepancy,
    run,
    select_tau,
    series_columns,
)
from .state import SegmentLayout, init_coherent, observable_variance, total_jz
from .utils import prepare_output

logger = logging.getLogger(__name__)

SCENARIOS = ("fig2", "fig3", "fig4", "homogeneity")
HOMOGENEITY_SEGMENTS = (1, 2, 4)
HOMOGENEITY_RTOL = 1e-8
REFERENCE_T0 = 0.55e-6
# Largest m_tau a preset may reach; tau is reduced below the configured step to stay under it.
MAX_MIXING_PER_STEP = 0.4

RunSpec = Tuple[str, ScenarioConfig]


def _single_channel(config: ScenarioConfig) -> ScenarioConfig:
    return config.updated(
        layout={"channels": 1, "atom_fractions": None, "light_fractions": None, "area_fractions": None},
        magnetic={"field_tesla": []},
    )


def _two_channel(config: ScenarioConfig, atoms: Sequence[float], light: Sequence[float]) -> ScenarioConfig:
    return config.updated(
        layout={
            "channels": 2,
            "atom_fractions": list(atoms),
            "light_fractions": list(light),
            "area_fractions": [0.5, 0.5],
        },
        magnetic={"field_tesla": []},
    )


def resolve_tau(config: ScenarioConfig) -> float:
    """Time step shared by all curves of a scenario."""
    if config.tau is not None:
        return config.tau
    if config.auto_tau:
        return select_tau(config)
    return default_tau(config, SimulationModel.from_config(config))


def cap_for_mixing(tau: float, specs: Sequence[RunSpec]) -> float:
    """Shrink tau so that no explicit mixing rate of the scenario exceeds MAX_MIXING_PER_STEP per step."""
    rates = [cfg.mixing.rate for _, cfg in specs if cfg.mixing.enabled and cfg.mixing.rate]
    if not rates:
        return tau
    limit = MAX_MIXING_PER_STEP / max(rates)
    if tau > limit:
        logger.info("tau reduced from %.4g s to %.4g s for mixing rate %.4g /s", tau, limit, max(rates))
        return limit
    return tau


def fig2_runs(config: ScenarioConfig) -> List[RunSpec]:
    """Detector comparison on the unsegmented ensemble."""
    base = _single_channel(config)
    return [
        (kind.value, base.updated(detector={"kind": kind}))
        for kind in (
            DetectorKind.IDEAL,
            DetectorKind.NO_TIME_RESOLUTION,
            DetectorKind.ZERO_DIMENSIONAL_NOISE_AFTER,
            DetectorKind.ZERO_DIMENSIONAL_NOISE_BEFORE,
        )
    ]


def fig3_runs(config: ScenarioConfig) -> List[RunSpec]:
    """Two transverse channels: homogeneous vs. light or atoms concentrated."""
    ideal = {"kind": DetectorKind.IDEAL}
    cases = [
        ("homogeneous", (0.5, 0.5), (0.5, 0.5)),
        ("light_in_one_channel", (0.5, 0.5), (1.0, 0.0)),
        ("atoms_in_one_channel", (1.0, 0.0), (0.5, 0.5)),
    ]
    return [
        (label, _two_channel(config, atoms, light).updated(detector=ideal, mixing={"enabled": False}))
        for label, atoms, light in cases
    ]


def fig4_runs(config: ScenarioConfig) -> List[RunSpec]:
    """Light in one channel with atoms moving between the channels."""
    t0 = whole_system_t0(config.species(), config.beam_params(), config.atoms.number)
    base = _two_channel(config, (0.5, 0.5), (1.0, 0.0)).updated(detector={"kind": DetectorKind.IDEAL})
    return [
        (f"mixing_rate_per_t0={rate:g}", base.updated(mixing={"enabled": True, "rate": rate / t0}))
        for rate in config.fig4_mixing_rates
    ]


def homogeneity_runs(config: ScenarioConfig) -> List[RunSpec]:
    """The same homogeneous ensemble cut into 1, 2 and 4 longitudinal segments."""
    base = _single_channel(config).updated(detector={"kind": DetectorKind.IDEAL})
    return [
        (f"segments={n}", base.updated(layout={"atom_segments_per_channel": n}))
        for n in HOMOGENEITY_SEGMENTS
    ]


SCENARIO_BUILDERS: Dict[str, Callable[[ScenarioConfig], List[RunSpec]]] = {
    "fig2": fig2_runs,
    "fig3": fig3_runs,
    "fig4": fig4_runs,
    "homogeneity": homogeneity_runs,
}


def run_many(specs: Sequence[RunSpec], tau: float, max_workers: Optional[int] = None) -> List[SqueezingSeries]:
    """Run independent configurations in parallel; results keep the input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(run, cfg, label, tau) for label, cfg in specs]
        return [f.result() for f in futures]


def homogeneity_deviation(series: Sequence[SqueezingSeries]) -> float:
    """Largest relative difference of var(J_z) between any series and the first one."""
    if len(series) < 2:
        return 0.0
    reference = np.array([s.var_jz_total for s in series[0].samples])
    worst = 0.0
    for other in series[1:]:
        values = np.array([s.var_jz_total for s in other.samples])
        if values.shape != reference.shape:
            raise ConsistencyError(f"{other.label} has {values.size} samples, expected {reference.size}")
        worst = max(worst, float(np.max(np.abs(values - reference) / np.abs(reference))))
    return worst


def run_scenario(
    name: str, config: ScenarioConfig, max_workers: Optional[int] = None
) -> List[SqueezingSeries]:
    """
    Run one of the preset scenarios.

    Args:
        name: fig2, fig3, fig4 or homogeneity
        config: Base configuration (physical parameters, tau, run length)
        max_workers: Thread pool size (default: executor default)

    Returns:
        Labelled series in a fixed order

    Raises:
        InvalidInputError: On an unknown scenario name
        ConsistencyError: If the homogeneity check fails
    """
    if name not in SCENARIO_BUILDERS:
        raise InvalidInputError(f"unknown scenario '{name}' (choose from {', '.join(SCENARIOS)})")
    specs = SCENARIO_BUILDERS[name](config)
    tau = cap_for_mixing(resolve_tau(specs[0][1]), specs)
    logger.info("scenario %s: %d curves", name, len(specs))
    series = run_many(specs, tau, max_workers)

    if name == "homogeneity":
        deviation = homogeneity_deviation(series)
        logger.info("homogeneity deviation %.3e", deviation)
        if deviation > HOMOGENEITY_RTOL:
            raise ConsistencyError(
                f"var(J_z) depends on the segmentation: deviation {deviation:.3e} > {HOMOGENEITY_RTOL}"
            )
    return series


def series_frame(series: Sequence[SqueezingSeries]) -> pd.DataFrame:
    """All series in one table, ordered by curve label then time."""
    channels = max((s.channels for s in series), default=1)
    columns = series_columns(channels)
    frames = [s.to_frame() for s in series if s.samples]
    if not frames:
        return pd.DataFrame(columns=columns)
    frame = pd.concat(frames, ignore_index=True).reindex(columns=columns)
    return frame.sort_values(["curve_label", "t_over_t0"], kind="mergesort").reset_index(drop=True)


def write_series(series: Sequence[SqueezingSeries], path: Union[str, Path]) -> Path:
    """
    Write series to CSV.

    Args:
        series: Labelled series (may be empty)
        path: Output file

    Returns:
        The written path

    Raises:
        OutputError: If the file cannot be written
    """
    frame = series_frame(series)
    try:
        path = prepare_output(path)
        frame.to_csv(path, index=False, float_format="%.17g")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    logger.info("wrote %d rows to %s", len(frame), path)
    return path


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_t0(config: ScenarioConfig) -> CheckResult:
    t0 = whole_system_t0(config.species(), config.beam_params(), config.atoms.number)
    error = abs(t0 - REFERENCE_T0) / REFERENCE_T0
    return CheckResult("characteristic time", error <= 0.02, f"t0 = {t0 * 1e6:.4f} us ({error:.2%} off 0.55 us)")


def _check_segmentation(config: ScenarioConfig) -> CheckResult:
    deviation = homogeneity_deviation(run_many(homogeneity_runs(config), resolve_tau(config)))
    return CheckResult("segmentation invariance", deviation <= HOMOGENEITY_RTOL, f"max deviation {deviation:.2e}")


def _check_atoms_in_one_channel(config: ScenarioConfig) -> CheckResult:
    specs = dict(fig3_runs(config))
    homogeneous, concentrated = run_many(
        [("homogeneous", specs["homogeneous"]), ("atoms_in_one_channel", specs["atoms_in_one_channel"])],
        resolve_tau(config),
    )
    deviation = float(np.max(np.abs(concentrated.xi2() - homogeneous.xi2()) / homogeneous.xi2()))
    return CheckResult("atoms-in-one-channel equivalence", deviation <= 1e-6, f"max deviation {deviation:.2e}")


def _check_mixing_conservation(config: ScenarioConfig, instances: int = 200, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    layout = SegmentLayout.uniform(2, 1, config.beam.cross_section)
    worst = 0.0
    for _ in range(instances):
        state = init_coherent(layout, [5e5, 5e5])
        a = rng.normal(size=(4, 4))
        state.cov = (a @ a.T + 4.0 * np.eye(4)) * 1e5
        before = observable_variance(state, total_jz(state))
        apply_gaussian_map(state, mixing_map(rng.uniform(0.0, 0.5), 1e6, state, (0, 1)))
        after = observable_variance(state, total_jz(state))
        worst = max(worst, abs(after - before) / before)
    return CheckResult("mixing conservation", worst <= 1e-12, f"max relative change {worst:.2e}")


def _check_ordering(config: ScenarioConfig) -> CheckResult:
    base = _single_channel(config).updated(detector={"kind": DetectorKind.IDEAL})
    model = SimulationModel.from_config(base)
    tau = resolve_tau(base)
    gaps = [ordering_discrepancy(base, tau / 2 ** k, model) for k in range(4)]
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    return CheckResult(
        "ordering convergence", decreasing, "discrepancies " + ", ".join(f"{g:.2e}" for g in gaps)
    )


def _check_detectors(config: ScenarioConfig) -> CheckResult:
    specs = dict(fig2_runs(config))
    tau = resolve_tau(config)
    ideal, blind = run_many(
        [("ideal", specs["ideal"]), ("no_time_resolution", specs["no_time_resolution"])], tau
    )
    single = [(label, specs[label].updated(total_steps=1)) for label in ("ideal", "no_time_resolution")]
    one_ideal, one_blind = run_many(single, tau)
    ordered = blind.samples[-1].xi2_total >= ideal.samples[-1].xi2_total
    gap = abs(one_blind.samples[-1].xi2_total - one_ideal.samples[-1].xi2_total)
    return CheckResult(
        "detector ordering",
        ordered and gap <= 1e-10,
        f"final xi2 {ideal.samples[-1].xi2_total:.4f} (ideal) vs {blind.samples[-1].xi2_total:.4f}; "
        f"single-segment gap {gap:.1e}",
    )


def acceptance_checks(config: ScenarioConfig) -> List[CheckResult]:
    """Quick versions of the acceptance criteria, on ``config``'s physical parameters."""
    checks = [
        _check_t0,
        _check_segmentation,
        _check_atoms_in_one_channel,
        _check_mixing_conservation,
        _check_ordering,
        _check_detectors,
    ]
    results = []
    for check in checks:
        result = check(config)
        logger.info("%s: %s (%s)", result.name, "ok" if result.passed else "FAILED", result.detail)
        results.append(result)
    return results
