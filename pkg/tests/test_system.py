#!/usr/bin/env python3
"""
System Model Tests
Validation of the single-agent spec and assembly of the n-pursuer group
"""

import os
import sys
import unittest

import numpy as np
from numpy.testing import assert_allclose

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigError
from src.model.system import MATRIX_FIELDS, SystemSpec, assemble, basic_example


def _matrices(**overrides):
    eye = np.eye(2)
    data = dict(A=np.zeros((2, 2)), B=eye, C=eye, F=eye, G=eye, H=eye, Q=eye, R=eye)
    data.update(overrides)
    return data


class TestSystemSpec(unittest.TestCase):
    """Test SystemSpec validation"""

    def test_basic_example(self):
        spec = basic_example(d=2, epsilon=0.1)
        self.assertEqual((spec.d, spec.m, spec.p), (2, 2, 2))
        self.assertEqual(spec.epsilon, 0.1)
        assert_allclose(spec.W, np.eye(2))
        assert_allclose(spec.R_inv, np.eye(2))

    def test_basic_example_rejects_bad_dimension(self):
        with self.assertRaises(ConfigError) as ctx:
            basic_example(d=0)
        self.assertEqual(ctx.exception.field, "d")

    def test_shape_mismatch_names_field(self):
        with self.assertRaises(ConfigError) as ctx:
            SystemSpec(**_matrices(B=np.eye(3)))
        self.assertEqual(ctx.exception.field, "B")

    def test_R_must_be_positive_definite(self):
        with self.assertRaises(ConfigError) as ctx:
            SystemSpec(**_matrices(R=np.diag([1.0, -1.0])))
        self.assertEqual(ctx.exception.field, "R")
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_Q_must_be_symmetric_psd(self):
        with self.assertRaises(ConfigError) as ctx:
            SystemSpec(**_matrices(Q=np.array([[1.0, 0.5], [0.0, 1.0]])))
        self.assertEqual(ctx.exception.field, "Q")
        with self.assertRaises(ConfigError):
            SystemSpec(**_matrices(Q=np.diag([1.0, -0.5])))

    def test_singular_measurement_noise(self):
        with self.assertRaises(ConfigError) as ctx:
            SystemSpec(**_matrices(H=np.diag([1.0, 0.0])))
        self.assertEqual(ctx.exception.field, "H")

    def test_negative_epsilon(self):
        with self.assertRaises(ConfigError) as ctx:
            basic_example(epsilon=-0.1)
        self.assertEqual(ctx.exception.field, "epsilon")

    def test_non_finite_entries(self):
        with self.assertRaises(ConfigError):
            SystemSpec(**_matrices(A=np.array([[np.nan, 0.0], [0.0, 0.0]])))

    def test_dict_round_trip(self):
        spec = SystemSpec(**_matrices(A=np.array([[0.0, 1.0], [-1.0, -0.5]])), epsilon=0.25)
        self.assertEqual(SystemSpec.from_dict(spec.to_dict()), spec)

    def test_from_dict_missing_matrix(self):
        data = basic_example().to_dict()
        del data["G"]
        with self.assertRaises(ConfigError) as ctx:
            SystemSpec.from_dict(data)
        self.assertEqual(ctx.exception.field, "G")

    def test_matrices_are_read_only(self):
        spec = basic_example()
        for name in MATRIX_FIELDS:
            self.assertFalse(getattr(spec, name).flags.writeable)

    def test_with_epsilon(self):
        spec = basic_example(epsilon=0.1)
        other = spec.with_epsilon(0.0)
        self.assertEqual(other.epsilon, 0.0)
        self.assertEqual(spec.epsilon, 0.1)
        self.assertNotEqual(spec, other)


class TestAssembly(unittest.TestCase):
    """Test Kronecker assembly of the n-pursuer system"""

    def test_block_diagonal_fields(self):
        spec = SystemSpec(**_matrices(A=np.array([[0.0, 1.0], [0.0, 0.0]])))
        sys_ = assemble(spec, 3)
        assert_allclose(sys_.A_n.dense, np.kron(np.eye(3), spec.A))
        assert_allclose(sys_.R_n_inv.dense, np.kron(np.eye(3), spec.R_inv))
        self.assertEqual(sys_.B_n.shape, (6, 6))

    def test_evader_noise_is_common(self):
        spec = basic_example(d=2, epsilon=0.3)
        sys_ = assemble(spec, 4)
        assert_allclose(sys_.W_n.dense, np.kron(np.ones((4, 4)), spec.W))
        assert_allclose(sys_.G_n.dense @ sys_.G_n.dense.T, sys_.W_n.dense)
        assert_allclose(sys_.process_noise.dense,
                        np.kron(np.ones((4, 4)), spec.W) + 0.3 * np.eye(8))

    def test_single_agent_collapses_to_blocks(self):
        spec = SystemSpec(**_matrices(A=np.array([[0.0, 1.0], [0.0, 0.0]])))
        sys_ = assemble(spec, 1)
        for name, block in (("A_n", spec.A), ("B_n", spec.B), ("C_n", spec.C), ("F_n", spec.F),
                            ("G_n", spec.G), ("H_n", spec.H), ("W_n", spec.W),
                            ("V_n", spec.V), ("R_n_inv", spec.R_inv)):
            assert_allclose(getattr(sys_, name).dense, block, err_msg=name)

    def test_measurement_information(self):
        sys_ = assemble(basic_example(), 3)
        assert_allclose(sys_.measurement_information.dense, np.eye(3))

    def test_rejects_bad_agent_count(self):
        for n in (0, -1, 2.5, True):
            with self.assertRaises(ConfigError):
                assemble(basic_example(), n)


if __name__ == "__main__":
    unittest.main(verbosity=2)
