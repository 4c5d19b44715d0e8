"""Tenseur de déclarations et masque"""

import numpy as np
import pytest

from src.errors import IndexOutOfRangeError, MalformedRowError, MaskViolationError, SelfLoopError
from src.reports import MaskRule, ReporterMask, ReportTensor, build_report_tensor


def test_duplicates_are_summed_and_sorted():
    X = build_report_tensor([(1, 0, 1, 2), (0, 1, 0, 1), (1, 0, 1, 3)], 2, ReporterMask.self_dyads())
    assert X.nnz == 2
    assert list(X) == [(0, 1, 0, 1), (1, 0, 1, 5)]
    assert X.total == 6


def test_zero_weights_are_dropped():
    X = build_report_tensor([(0, 1, 0, 0), (0, 1, 1, 1)], 2, ReporterMask.self_dyads())
    assert X.nnz == 1
    assert X.get(0, 1, 0) == 0
    assert X.get(0, 1, 1) == 1


def test_index_out_of_range_reports_row():
    with pytest.raises(IndexOutOfRangeError) as err:
        build_report_tensor([(0, 1, 0, 1), (0, 5, 0, 1)], 3, ReporterMask.full_roster())
    assert err.value.row == 1


@pytest.mark.parametrize("weight", [1.5, 0.4, float("nan")])
def test_fractional_weight_reports_row(weight):
    with pytest.raises(MalformedRowError) as err:
        build_report_tensor([(0, 1, 0, 2), (1, 0, 1, 1), (0, 1, 1, weight)], 2, ReporterMask.self_dyads())
    assert err.value.row == 2


def test_integral_float_weights_are_kept():
    X = build_report_tensor([(0, 1, 0, 2.0), (1, 0, 1, 3.0)], 2, ReporterMask.self_dyads())
    assert list(X) == [(0, 1, 0, 2), (1, 0, 1, 3)]


def test_self_loop_is_rejected():
    with pytest.raises(SelfLoopError):
        build_report_tensor([(2, 2, 2, 1)], 3, ReporterMask.full_roster())


def test_self_dyads_rejects_third_party_reports():
    with pytest.raises(MaskViolationError):
        build_report_tensor([(0, 1, 2, 1)], 3, ReporterMask.self_dyads())
    # le même triplet est autorisé sous full_roster
    X = build_report_tensor([(0, 1, 2, 1)], 3, ReporterMask.full_roster())
    assert X.get(0, 1, 2) == 1


def test_custom_mask_membership_and_counts():
    mask = ReporterMask.custom([(0, 1, 0), (0, 1, 2), (2, 1, 1)], n_nodes=3, n_reporters=3)
    assert mask.rule is MaskRule.CUSTOM
    assert mask.contains([0, 0, 1], [1, 1, 0], [0, 1, 0], 3, 3).tolist() == [True, False, False]
    assert mask.eligible_count([0, 2, 1], [1, 1, 2], 3, 3).tolist() == [2, 1, 0]
    ego, alter = mask.custom_dyads()
    assert list(zip(ego.tolist(), alter.tolist())) == [(0, 1), (2, 1)]
    with pytest.raises(MaskViolationError):
        mask.contains([0], [1], [0], 4, 3)


def test_reverse_counts_and_lookup():
    X = build_report_tensor([(0, 1, 0, 2), (1, 0, 0, 3), (1, 2, 1, 1)], 3, ReporterMask.self_dyads())
    assert X.reverse_counts().tolist() == [3, 2, 0]
    assert X.lookup([0, 2], [1, 1], [0, 1]).tolist() == [2, 0]


def test_empty_tensor_queries():
    X = ReportTensor.empty(4, 4, ReporterMask.self_dyads())
    assert X.nnz == 0 and len(X) == 0
    assert X.reverse_counts().size == 0
    assert X.lookup([0], [1], [0]).tolist() == [0]
    assert X.dense().shape == (4, 4, 4)


def test_arrays_are_read_only():
    X = build_report_tensor([(0, 1, 0, 1)], 2, ReporterMask.self_dyads())
    with pytest.raises(ValueError):
        X.count[0] = 7


def test_dense_matches_entries(small_reports):
    dense = small_reports.dense()
    assert dense.sum() == small_reports.total
    assert dense[0, 1, 1] == 2
    assert np.count_nonzero(dense) == small_reports.nnz
