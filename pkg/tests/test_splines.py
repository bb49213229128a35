import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.estimation.base import DegenerateInput
from src.estimation.splines import KnotRule, bspline_basis, bspline_knots, full_basis


def de_boor_basis(x: float, knots: np.ndarray, degree: int) -> np.ndarray:
    """Cox-de Boor recursion, closed on the right boundary"""
    n_basis = len(knots) - degree - 1
    last = knots[-1]
    values = np.zeros(len(knots) - 1)
    for i in range(len(knots) - 1):
        if knots[i] <= x < knots[i + 1] or (x == last and knots[i] < knots[i + 1] == last):
            values[i] = 1.0
    for d in range(1, degree + 1):
        nxt = np.zeros(len(knots) - d - 1)
        for i in range(len(nxt)):
            left = right = 0.0
            if knots[i + d] > knots[i]:
                left = (x - knots[i]) / (knots[i + d] - knots[i]) * values[i]
            if knots[i + d + 1] > knots[i + 1]:
                right = (knots[i + d + 1] - x) / (knots[i + d + 1] - knots[i + 1]) * values[i + 1]
            nxt[i] = left + right
        values = nxt
    return values[:n_basis]


class TestSplineBasis(unittest.TestCase):
    def setUp(self):
        self.x = np.repeat(np.arange(9, dtype=float), 3)

    def test_six_columns(self):
        basis = bspline_basis(self.x)
        self.assertEqual(basis.n_columns, 6)
        self.assertEqual(basis.column_names("m")[0], "bs(m)[1]")
        self.assertEqual(len(basis.knots), 11)

    def test_matches_de_boor_recursion(self):
        knots = bspline_knots(self.x)
        np.testing.assert_allclose(knots[4:7], [2.0, 4.0, 6.0])
        grid = np.arange(9, dtype=float)
        expected = np.array([de_boor_basis(value, knots, 3) for value in grid])
        np.testing.assert_allclose(full_basis(grid, knots, 3), expected, atol=1e-12)
        np.testing.assert_allclose(bspline_basis(self.x).values[::3], expected[:, 1:], atol=1e-12)

    def test_partition_of_unity(self):
        rng = np.random.default_rng(4)
        x = rng.gamma(2.0, 1.5, size=200)
        basis = bspline_basis(x)
        full = full_basis(x, basis.knots, basis.degree)
        self.assertTrue(np.all(full >= -1e-14))
        np.testing.assert_allclose(full.sum(axis=1), 1.0, atol=1e-12)

    def test_uniform_knots(self):
        knots = bspline_knots(np.array([0.0, 1.0, 8.0]), knot_rule=KnotRule.UNIFORM)
        np.testing.assert_allclose(knots[4:7], [2.0, 4.0, 6.0])

    def test_evaluate_clips_outside_range(self):
        basis = bspline_basis(self.x)
        np.testing.assert_allclose(basis.evaluate([12.0]), basis.evaluate([8.0]))
        np.testing.assert_allclose(basis.evaluate(self.x), basis.values, atol=1e-14)

    def test_constant_input(self):
        with self.assertRaises(DegenerateInput):
            bspline_basis(np.full(10, 2.5))

    def test_too_few_values_for_quantiles(self):
        with self.assertRaises(DegenerateInput):
            bspline_basis(np.array([0.0, 0.0, 1.0, 2.0, 2.0]))


if __name__ == '__main__':
    unittest.main()
