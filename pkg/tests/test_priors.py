"""Validation des hyperparamètres"""

import numpy as np
import pytest

from src.errors import IndexOutOfRangeError, NonPositiveParameterError, SimplexViolationError
from src.priors import HyperParams, validate_hyperparams


def test_scalars_are_broadcast():
    h = validate_hyperparams(HyperParams(alpha=2.0, a=[0.5, 3.0]), n_levels=2, n_nodes=4, n_reporters=3)
    assert h.alpha.tolist() == [2.0, 2.0, 2.0]
    assert h.a.tolist() == [0.5, 3.0]
    assert h.p.tolist() == [0.5, 0.5]
    assert h.is_validated


def test_validation_is_idempotent():
    once = validate_hyperparams(HyperParams(p=[0.3, 0.7], p_overrides={(0, 1): [0.9, 0.1]}), 2, 3, 3)
    twice = validate_hyperparams(once, 2, 3, 3)
    np.testing.assert_array_equal(once.p, twice.p)
    np.testing.assert_array_equal(once.p_overrides[(0, 1)], twice.p_overrides[(0, 1)])


@pytest.mark.parametrize("field,value", [("alpha", 0.0), ("beta", -1.0), ("c", 0.0), ("d", float("nan")),
                                         ("a", [1.0, 0.0])])
def test_non_positive_values_are_rejected(field, value):
    with pytest.raises(NonPositiveParameterError):
        validate_hyperparams(HyperParams(**{field: value}), 2, 3, 3)


def test_wrong_vector_length_is_rejected():
    with pytest.raises(NonPositiveParameterError):
        validate_hyperparams(HyperParams(alpha=[1.0, 1.0]), 2, 3, 3)


@pytest.mark.parametrize("row", [[0.5, 0.6], [1.0, 0.0], [0.2, 0.3, 0.5]])
def test_simplex_violations(row):
    with pytest.raises(SimplexViolationError):
        validate_hyperparams(HyperParams(p=row), 2, 3, 3)


def test_override_outside_network_or_on_diagonal():
    with pytest.raises(IndexOutOfRangeError):
        validate_hyperparams(HyperParams(p_overrides={(0, 5): [0.5, 0.5]}), 2, 3, 3)
    with pytest.raises(IndexOutOfRangeError):
        validate_hyperparams(HyperParams(p_overrides={(1, 1): [0.5, 0.5]}), 2, 3, 3)


def test_zero_levels_rejected():
    with pytest.raises(NonPositiveParameterError):
        validate_hyperparams(HyperParams(), 0, 3, 3)


def test_reporter_prior_copy():
    h = HyperParams(beta=2.0).with_reporter_prior([1.0, 4.0])
    assert h.alpha.tolist() == [1.0, 4.0]
    assert h.beta == 2.0


def test_shared_prior_is_learned_only_when_absent():
    assert validate_hyperparams(HyperParams(), 2, 3, 3).learn_p
    assert not validate_hyperparams(HyperParams(p=[0.9, 0.1]), 2, 3, 3).learn_p
    assert not validate_hyperparams(HyperParams(learn_p=False), 2, 3, 3).learn_p
    assert validate_hyperparams(HyperParams(p=[0.9, 0.1], learn_p=True), 2, 3, 3).learn_p
    # la seconde validation (p déjà rempli) garde le choix initial
    once = validate_hyperparams(HyperParams(), 2, 3, 3)
    assert validate_hyperparams(once, 2, 3, 3).learn_p
