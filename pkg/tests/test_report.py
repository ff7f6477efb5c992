import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subset_dp.report import EstimateReport, Stage, dumps


def _report(x):
    return EstimateReport(x, 3.0, [Stage("lower_threshold", 1.0, x / 3)], {"mode": "subset", "n": 5}, seed=7)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_round_trip(x):
    r = _report(x)
    back = EstimateReport.from_json(r.to_json())
    assert back == r
    assert back.estimate == x


def test_seventeen_digits():
    assert json.loads(dumps(0.1)) == 0.1
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(3.0) == "3.0"
    assert dumps(np.float64(1e300)) == "1.0000000000000001e+300"


def test_numpy_and_nesting():
    out = json.loads(dumps({"a": np.arange(3), "b": [np.int64(2), None, True], "c": {}}))
    assert out == {"a": [0, 1, 2], "b": [2, None, True], "c": {}}


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})
