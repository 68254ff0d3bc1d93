import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from kbcompleteness import CardinalityEstimator, GenderClassifier


def test_estimator_params_and_clone():
    est = CardinalityEstimator(estimator="N1", trailing_fraction=0.3)
    assert est.get_params() == {"estimator": "N1", "trailing_fraction": 0.3}
    twin = clone(est)
    assert twin is not est and twin.get_params() == est.get_params()
    est.set_params(estimator="J1")
    assert est.estimator == "J1"
    assert "CardinalityEstimator" in repr(est)


def test_clone_drops_fitted_state():
    X = np.array([[1, 1, 0], [1, 0, 0], [0, 0, 1]])
    est = CardinalityEstimator().fit(X)
    assert hasattr(est, "estimate_")
    assert not hasattr(clone(est), "estimate_")
    with pytest.raises(NotFittedError):
        clone(est).completeness(3)


def test_classifier_in_pipeline():
    pipe = make_pipeline(GenderClassifier({"anna": 0.97, "neil": 0.005}))
    out = pipe.fit_transform(["Anna_B", "Neil_C", "Kim_D"])
    assert out.tolist() == ["female", "male", "undefined"]
    assert clone(pipe).get_params()["genderclassifier__tau"] == 0.1


def test_invalid_params_raise_at_fit():
    with pytest.raises(ValueError):
        GenderClassifier(tau=0.6).fit()
    with pytest.raises(ValueError):
        CardinalityEstimator(trailing_fraction=0).fit(np.ones((2, 2)))
