import math

import numpy as np
import pytest

from src.errors import DegenerateMeasurementError, DoubleDetectionError, InvalidInputError, InvalidOperationError
from src.maps import apply_linear, qnd_interaction_map
from src.measurement import (
    Detector,
    DetectorKind,
    DetectorModel,
    build_projector,
    conditional_update,
    conditioned_atoms,
    detect,
)
from src.state import SegmentLayout, append_light_segment, init_coherent

from .conftest import APPENDIX_AREA, random_psd


def _interacted(coupling=2e-6, atoms=1e6, photons=1e7):
    layout = SegmentLayout.uniform(1, 1, APPENDIX_AREA)
    state = init_coherent(layout, [atoms], photons_per_segment=[photons])
    apply_linear(state, qnd_interaction_map(coupling, state, 0, 0))
    return state


def test_detector_model_validates_angle():
    with pytest.raises(InvalidInputError):
        DetectorModel(angle=2 * math.pi)
    assert DetectorModel("no_time_resolution").kind is DetectorKind.NO_TIME_RESOLUTION
    assert not DetectorModel(DetectorKind.NO_TIME_RESOLUTION).resolves_segments


def test_projector_is_rank_one_and_normalized(pair_state):
    projector = build_projector(pair_state, [0], math.pi / 4)
    assert projector.rank == 1
    np.testing.assert_allclose(projector.matrix @ projector.matrix, projector.matrix, atol=1e-15)
    assert projector.matrix[2, 3] == pytest.approx(0.5)


def test_empty_projector_fails(pair_state):
    with pytest.raises(InvalidOperationError):
        build_projector(pair_state, [], 0.0)


def test_single_step_analytic_variance():
    coupling, atoms, photons = 2e-6, 1e6, 1e7
    state = _interacted(coupling, atoms, photons)
    updated = conditional_update(state, build_projector(state, [0], 0.0))
    v_j, v_s, kappa = atoms / 4, photons / 4, coupling * photons / 2
    expected = v_j * v_s / (v_s + kappa ** 2 * v_j)
    assert updated.cov[1, 1] == pytest.approx(expected, rel=1e-9)
    np.testing.assert_array_equal(updated.mean, state.mean)


def test_measuring_sz_gains_no_information():
    state = _interacted()
    updated = conditional_update(state, build_projector(state, [0], math.pi / 2))
    assert updated.cov[1, 1] == pytest.approx(state.cov[1, 1], rel=1e-12)


def test_conditioning_matches_monte_carlo(rng):
    layout = SegmentLayout.uniform(1, 2, APPENDIX_AREA)
    for dim_light in (1, 3):
        state = init_coherent(layout, [1.0, 1.0], photons_per_segment=[1.0] * dim_light)
        state.cov = random_psd(rng, state.dim)
        projector = build_projector(state, list(range(dim_light)), rng.uniform(0, math.pi))
        updated = conditional_update(state, projector)

        samples = rng.multivariate_normal(np.zeros(state.dim), state.cov, size=1_000_000)
        y = samples @ projector.basis[:, 0]
        beta = samples.T @ y / (y @ y)
        residual = samples - np.outer(y, beta)
        empirical = residual.T @ residual / len(y)
        scale = np.max(np.abs(state.cov))
        np.testing.assert_allclose(updated.cov, empirical, atol=0.01 * scale)


def test_degenerate_measurement(pair_state):
    state = pair_state.copy()
    state.cov[2:, :] = 0.0
    state.cov[:, 2:] = 0.0
    with pytest.raises(DegenerateMeasurementError):
        conditional_update(state, build_projector(state, [0], 0.0))


def test_conditioned_atoms_matches_full_update():
    state = _interacted()
    state = append_light_segment(state, 2e7, 0)
    apply_linear(state, qnd_interaction_map(1e-6, state, 0, 1))
    projector = build_projector(state, [0, 1], 0.0)
    full = conditional_update(state, projector)
    atoms = conditioned_atoms(state, projector)
    assert atoms.n_light == 0
    np.testing.assert_allclose(atoms.cov, full.cov[:2, :2], rtol=1e-12)


def test_ideal_detector_retires_segment():
    state = _interacted()
    detector = Detector(DetectorModel())
    measured = detect(state, detector, [0])
    assert measured.n_light == 0
    assert measured.cov[1, 1] < state.cov[1, 1]
    with pytest.raises(DoubleDetectionError):
        detector.detect(measured, [0])


def test_blind_detector_buffers_until_finish():
    state = _interacted()
    detector = Detector(DetectorModel(DetectorKind.NO_TIME_RESOLUTION))
    buffered = detector.detect(state, [0])
    assert buffered is state
    assert detector.buffered == [0]
    with pytest.raises(DoubleDetectionError):
        detector.detect(state, [0])

    preview = detector.preview(state, atoms_only=True)
    final = detector.finish(state)
    assert final.n_light == 0
    assert detector.buffered == []
    assert final.cov[1, 1] == pytest.approx(preview.cov[1, 1], rel=1e-12)


def _random_state(rng, light_segments):
    layout = SegmentLayout.uniform(1, 2, APPENDIX_AREA)
    state = init_coherent(layout, [1e6, 1e6], photons_per_segment=[1e7])
    for _ in range(light_segments - 1):
        state = append_light_segment(state, 1e7, 0)
    state.cov = random_psd(rng, state.dim, scale=10 ** rng.uniform(0, 8))
    return state


@pytest.mark.parametrize("light_segments", [1, 2, 3])
def test_conditioning_invariants_on_random_states(rng, light_segments):
    for _ in range(25):
        state = _random_state(rng, light_segments)
        segments = sorted(rng.choice(light_segments, size=rng.integers(1, light_segments + 1), replace=False))
        projector = build_projector(state, [int(j) for j in segments], rng.uniform(0, 2 * math.pi))
        updated = conditional_update(state, projector)
        q = projector.basis[:, 0]
        before = q @ state.cov @ q
        assert q @ updated.cov @ q <= 1e-9 * before
        diag, new_diag = np.diag(state.cov), np.diag(updated.cov)
        assert np.all(new_diag <= diag + 1e-12 * np.abs(diag))
        rows = 2 * state.n_atom
        assert np.trace(updated.cov[:rows, :rows]) <= np.trace(state.cov[:rows, :rows]) * (1 + 1e-12)


def test_detecting_departed_segment_keeps_later_coupling():
    coupling = 2e-6
    state = append_light_segment(_interacted(coupling), 3e7, 0)
    measured = Detector(DetectorModel()).detect(state, [state.light_segments[0].serial])
    assert measured.n_light == 1
    np.testing.assert_array_equal(measured.jx, state.jx)
    np.testing.assert_array_equal(measured.sx, state.sx[1:])
    np.testing.assert_array_equal(
        qnd_interaction_map(coupling, measured, 0, 0).matrix,
        qnd_interaction_map(coupling, state, 0, 1).matrix,
    )
    # the waiting segment is uncorrelated with the detected one, so its block is untouched
    np.testing.assert_array_equal(measured.cov[2:4, 2:4], state.cov[4:6, 4:6])
    np.testing.assert_array_equal(measured.cov[:2, 2:4], state.cov[:2, 4:6])
