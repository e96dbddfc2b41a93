import logging

import numpy as np
import pytest

from src.errors import (
    InvalidInputError,
    InvalidOperationError,
    PhysicalityError,
    UndefinedObservableError,
)
from src.state import (
    ObservableSpec,
    SegmentLayout,
    append_light_segment,
    assert_physical,
    commutation_matrix,
    init_coherent,
    observable_variance,
    remove_segments,
    squeezing_parameter,
    total_jz,
)

AREA = 4 * np.pi * 1e-10


def test_layout_rejects_bad_sizes():
    with pytest.raises(InvalidInputError):
        SegmentLayout(channels=0, atom_segments_per_channel=1, cross_sections=())
    with pytest.raises(InvalidInputError):
        SegmentLayout(channels=2, atom_segments_per_channel=1, cross_sections=(1.0,))
    with pytest.raises(InvalidInputError):
        SegmentLayout(channels=1, atom_segments_per_channel=1, cross_sections=(-1.0,))


def test_uniform_layout_splits_area():
    layout = SegmentLayout.uniform(4, 2, AREA)
    assert layout.cross_sections == pytest.approx((AREA / 4,) * 4)
    assert layout.total_cross_section == pytest.approx(AREA)


def test_coherent_state_blocks():
    layout = SegmentLayout.uniform(2, 2, AREA)
    state = init_coherent(layout, [2.5e5] * 4, photons_per_segment=[1e7], light_channels=[1])
    assert state.dim == 10
    np.testing.assert_allclose(np.diag(state.cov)[:8], 2.5e5 / 4)
    np.testing.assert_allclose(np.diag(state.cov)[8:], 1e7 / 4)
    np.testing.assert_allclose(state.jx, 1.25e5)
    assert state.atom_segments == ((0, 0), (0, 1), (1, 0), (1, 1))
    assert state.light_segments[0].channel == 1
    assert squeezing_parameter(state) == pytest.approx(1.0, abs=1e-12)


def test_empty_cells_are_skipped():
    layout = SegmentLayout.uniform(2, 1, AREA)
    state = init_coherent(layout, [1e6, None])
    assert state.atom_segments == ((0, 0),)
    assert state.atoms_in_channel(1) == []
    assert state.atom_position(1, 0) is None


def test_init_rejects_non_positive_population():
    layout = SegmentLayout.uniform(1, 1, AREA)
    with pytest.raises(InvalidInputError):
        init_coherent(layout, [0.0])


def test_small_population_warns(caplog):
    layout = SegmentLayout.uniform(1, 1, AREA)
    with caplog.at_level(logging.WARNING, logger="src.state"):
        init_coherent(layout, [50.0])
    assert "group contraction" in caplog.text


def test_commutation_matrix_is_block_antisymmetric(pair_state):
    sigma = commutation_matrix(pair_state)
    np.testing.assert_array_equal(sigma, -sigma.T)
    assert sigma[0, 1] == pytest.approx(5e5)
    assert sigma[2, 3] == pytest.approx(5e6)
    assert sigma[0, 3] == 0.0


def test_append_light_segment_extends_without_mutating(pair_state):
    grown = append_light_segment(pair_state, 2e7, 0)
    assert grown.dim == pair_state.dim + 2
    assert pair_state.n_light == 1
    assert grown.light_segments[-1].serial == 1
    assert grown.cov[-1, -1] == pytest.approx(5e6)
    np.testing.assert_array_equal(grown.cov[:4, 4:], 0.0)


def test_append_rejects_unknown_channel(pair_state):
    with pytest.raises(InvalidInputError):
        append_light_segment(pair_state, 1e7, 3)


def test_remove_light_segment(pair_state):
    reduced = remove_segments(pair_state, [1])
    assert reduced.n_light == 0
    assert reduced.dim == 2
    np.testing.assert_array_equal(reduced.cov, pair_state.cov[:2, :2])


def test_remove_atom_segment_fails(pair_state):
    with pytest.raises(InvalidOperationError):
        remove_segments(pair_state, [0])


def test_light_position_of_unknown_serial(pair_state):
    with pytest.raises(InvalidOperationError):
        pair_state.light_position(42)


def test_observable_needs_nonzero_coefficient():
    with pytest.raises(InvalidInputError):
        ObservableSpec(np.zeros(4))


def test_observable_variance_includes_correlations(pair_state):
    state = pair_state.copy()
    state.cov[1, 3] = state.cov[3, 1] = 1e5
    spec = ObservableSpec(np.array([0.0, 1.0, 0.0, 1.0]))
    assert observable_variance(state, spec) == pytest.approx(2.5e5 + 2.5e6 + 2e5)


def test_total_jz_restricted_to_channels():
    layout = SegmentLayout.uniform(2, 1, AREA)
    state = init_coherent(layout, [1e6, 1e6])
    np.testing.assert_array_equal(total_jz(state, [1]).coefficients, [0, 0, 0, 1])


def test_squeezing_undefined_without_polarization(pair_state):
    state = pair_state.copy()
    state.jx[:] = 0.0
    with pytest.raises(UndefinedObservableError):
        squeezing_parameter(state)


def test_assert_physical_detects_negative_eigenvalue(pair_state):
    state = pair_state.copy()
    state.cov[1, 1] = -1e3
    with pytest.raises(PhysicalityError):
        assert_physical(state)
    assert_physical(pair_state)
