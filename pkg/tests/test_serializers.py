import json
from unittest import TestCase

import numpy as np

from opideal.serializers import (
    WrongExponentError, WrongShapeError, WrongValueError, deserialize_exponent, deserialize_matrix,
    deserialize_operator, deserialize_space, profile_to_csv, serialize_matrix, serialize_operator, serialize_space,
    strip_timing,
)
from opideal.types import C0, INF, TWO, BlockSpace, DenseOperator, ExtExponent, FssPoint, FssProfile


class TestExponents(TestCase):
    def test_parse(self):
        assert deserialize_exponent("inf") == INF
        assert deserialize_exponent("c0") == C0
        assert deserialize_exponent(2) == TWO
        assert deserialize_exponent("1.5") == ExtExponent.finite("1.5")

    def test_wrong(self):
        with self.assertRaises(WrongExponentError):
            deserialize_exponent("abc")
        with self.assertRaises(WrongExponentError):
            deserialize_exponent("0.5")


class TestMatrices(TestCase):
    def test_serialize(self):
        assert serialize_matrix(np.eye(2)) == [[1.0, 0.0], [0.0, 1.0]]
        with self.assertRaises(WrongShapeError):
            serialize_matrix(np.ones(3))
        with self.assertRaises(WrongValueError):
            serialize_matrix(np.array([[np.inf]]))

    def test_deserialize(self):
        assert deserialize_matrix([[1, 2], [3, 4]], (2, 2)).dtype == float
        with self.assertRaises(WrongShapeError):
            deserialize_matrix([[1, 2], [3]])
        with self.assertRaises(WrongShapeError):
            deserialize_matrix([[1, 2]], (2, 1))
        with self.assertRaises(WrongValueError):
            deserialize_matrix([[1.0, float("nan")]])

    def test_space(self):
        space = BlockSpace.uniform(INF, [2, 3], C0)
        data = serialize_space(space)
        assert data == {"blocks": [["inf", 2], ["inf", 3]], "outer": "c0"}
        assert deserialize_space(data) == space
        with self.assertRaises(WrongValueError):
            deserialize_space({"outer": "2"})

    def test_operator_through_json(self):
        op = DenseOperator(np.arange(6.0).reshape(3, 2), BlockSpace.single(TWO, 2), BlockSpace.single(INF, 3))
        restored = deserialize_operator(json.loads(json.dumps(serialize_operator(op))))
        assert np.array_equal(restored.matrix, op.matrix)
        assert restored.codomain == op.codomain


class TestReports(TestCase):
    def test_profile_csv(self):
        profile = FssProfile(points=[
            FssPoint(d=1, estimate=0.5, envelope=0.5, best_subspace=0.75, trials=3, method="svd"),
            FssPoint(d=2, estimate=0.25, envelope=0.25, best_subspace=0.5, trials=3, method="svd"),
        ])
        lines = profile_to_csv(profile).splitlines()
        assert lines[0] == "d,estimate,envelope,best_subspace,trials,method"
        assert lines[2] == "2,0.25,0.25,0.5,3,svd"

    def test_strip_timing(self):
        payload = {"wall_clock_ms": 3.0, "certificates": [{"elapsed_ms": 1.0, "order": 2}], "seed": 0}
        assert strip_timing(payload) == {"certificates": [{"order": 2}], "seed": 0}
