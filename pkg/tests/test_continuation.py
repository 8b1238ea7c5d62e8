import json

import numpy as np
import pytest

from Tools.ScatteringTools.continuation import (
    ContinuationModel,
    StoredAAA,
    evaluate_continuation,
    fit_rational,
    rational_from_dict,
    rational_to_dict,
)
from Utilities.errors import (
    ExtrapolationRangeError,
    InsufficientSamplesError,
    ParseError,
    PoleInWindowError,
    ThresholdError,
)


def _samples(func, lo=0.5, hi=1.5, count=24):
    return [(k, func(k)) for k in np.linspace(lo, hi, count)]


def lorentzian(k):
    return 1.0 / (k * k + 1.0)


def test_rational_function_is_recovered():
    model = fit_rational(_samples(lorentzian))
    assert model.degree == 2
    assert model.trust_region == pytest.approx((0.25, 1.75))
    for k in (0.3, 1.0, 1.7, 1.0 + 0.1j, 1.2 - 0.3j):
        value, error = evaluate_continuation(model, k)
        assert value == pytest.approx(lorentzian(k), abs=1e-8)
        assert error >= 0.0


def test_real_data_continues_symmetrically():
    model = fit_rational(_samples(lorentzian))
    z = 1.0 + 0.2j
    assert evaluate_continuation(model, z.conjugate())[0] == pytest.approx(
        evaluate_continuation(model, z)[0].conjugate(), rel=1e-8)


def test_error_estimate_tracks_smooth_data():
    model = fit_rational(_samples(lambda k: np.exp(1j * k) * np.sqrt(k + 2.0)))
    value, error = evaluate_continuation(model, 1.6)
    true_error = abs(value - np.exp(1.6j) * np.sqrt(3.6))
    assert true_error < 1e-5
    assert error < 1e-3


def test_too_few_samples():
    with pytest.raises(InsufficientSamplesError):
        fit_rational(_samples(lorentzian, count=11))


def test_outside_trust_region():
    model = fit_rational(_samples(lorentzian))
    with pytest.raises(ExtrapolationRangeError):
        evaluate_continuation(model, 2.0)


def test_excluded_band():
    with pytest.raises(ThresholdError):
        fit_rational(_samples(lorentzian), excluded=[(0.99, 1.01)])
    model = fit_rational(_samples(lorentzian, lo=0.5, hi=0.95), excluded=[(1.0, 1.1)])
    with pytest.raises(ThresholdError):
        evaluate_continuation(model, 1.05)


def test_pole_inside_window_is_refused():
    def resonance(k):
        return 1.0 / (k - 1.0 - 1e-5j)

    samples = _samples(resonance, count=25)
    with pytest.raises(PoleInWindowError):
        fit_rational(samples)
    model = fit_rational(samples, ill_conditioned=[1.0])
    assert model.degree >= 1


def test_model_json_round_trip():
    model = fit_rational(_samples(lorentzian))
    restored = ContinuationModel.from_json(model.to_json())
    assert restored.window == model.window
    assert evaluate_continuation(restored, 1.3)[0] == pytest.approx(evaluate_continuation(model, 1.3)[0])
    with pytest.raises(ParseError):
        ContinuationModel.from_json('{"window": [0, 1]}')


def test_stored_rational_is_the_scipy_fit():
    model = fit_rational(_samples(lambda k: np.exp(1j * k) / (k - 2.0 - 0.3j)))
    restored = rational_from_dict(json.loads(json.dumps(rational_to_dict(model.rational))))
    assert isinstance(restored, StoredAAA)
    k = np.linspace(0.4, 1.6, 9) + 0.05j
    np.testing.assert_allclose(restored(k), model.rational(k), rtol=1e-12)
    assert restored(model.rational.support_points[0]) == pytest.approx(model.rational.support_values[0])
    order = np.argsort(model.rational.poles())
    np.testing.assert_allclose(np.sort_complex(restored.poles()), model.rational.poles()[order], rtol=1e-10)
    np.testing.assert_allclose(restored.residues()[np.argsort(restored.poles())], model.rational.residues()[order],
                               rtol=1e-8)


def test_stored_rational_rejects_ragged_arrays():
    with pytest.raises(ValueError):
        StoredAAA([0.5, 1.0], [1.0], [1.0, -1.0])
    with pytest.raises(ParseError):
        ContinuationModel.from_json(
            '{"window": [0.5, 1.5], "degree": 1, "holdout_residual": 0.0,'
            ' "rational": {"support_points": [], "support_values": [], "weights": []},'
            ' "lower": {"support_points": [], "support_values": [], "weights": []}}'
        )
