import json

import numpy as np
import pytest
import sympy as sp

import oracles
from bekk_ergo import matcore
from bekk_ergo.catalog import EX2X2_LETTERS, get_example
from bekk_ergo.exceptions import ModelError
from bekk_ergo.model import (
    BekkModel,
    bekk_action,
    load_model,
    model_from_dict,
    model_hash,
    model_to_dict,
    save_model,
    vech_operator,
)

a, b, c, d, e, f, g, h = sp.symbols("a b c d e f g h")


def symbolic_operator(F):
    return sp.Matrix(vech_operator([np.array(F, dtype=object)]))


class TestSymbolic:
    def test_bivariate_arch_display(self):
        A = symbolic_operator([[a, c], [b, d]])
        expected = sp.Matrix([
            [a**2, 2 * a * c, c**2],
            [a * b, a * d + b * c, c * d],
            [b**2, 2 * b * d, d**2],
        ])
        assert sp.simplify(A - expected) == sp.zeros(3, 3)

    def test_bivariate_garch_display(self):
        B = symbolic_operator([[e, g], [f, h]])
        expected = sp.Matrix([
            [e**2, 2 * e * g, g**2],
            [e * f, e * h + f * g, g * h],
            [f**2, 2 * f * h, h**2],
        ])
        assert sp.simplify(B - expected) == sp.zeros(3, 3)

    def test_vec_form_kron(self):
        F = np.array([[e, g], [f, h]], dtype=object)
        Bt = sp.Matrix(np.kron(F, F))
        assert Bt[0, :] == sp.Matrix([[e**2, e * g, g * e, g**2]])
        assert Bt[3, :] == sp.Matrix([[f**2, f * h, h * f, h**2]])

    def test_catalog_example_numeric(self):
        m = get_example("ex-2x2").model()
        subs = {sp.Symbol(k): v for k, v in EX2X2_LETTERS.items()}
        A = symbolic_operator([[a, c], [b, d]]).subs(subs)
        B = symbolic_operator([[e, g], [f, h]]).subs(subs)
        np.testing.assert_allclose(m.vech_form.A[0], np.array(A, dtype=float), atol=1e-15)
        np.testing.assert_allclose(m.vech_form.B[0], np.array(B, dtype=float), atol=1e-15)


class TestForms:
    def test_vech_form_reproduces_action(self, rng):
        for _ in range(50):
            m = oracles.random_model(rng, d=3, p=2, q=2, l=2, s=1)
            G = rng.standard_normal((3, 3))
            M = G + G.T
            for i, lag in enumerate(m.A):
                np.testing.assert_allclose(
                    matcore.unvech(m.vech_form.A[i] @ matcore.vech(M)),
                    oracles.bekk_sum(lag, M), atol=1e-10,
                )
            for j, lag in enumerate(m.B):
                np.testing.assert_allclose(
                    matcore.unvec(m.vec_form.Btilde[j] @ matcore.vec(M)),
                    bekk_action(lag, M), atol=1e-10,
                )

    def test_companion_structure(self, rng):
        m = oracles.random_model(rng, d=2, p=3, q=2)
        h = m.h
        Bb = m.blocks.B_block
        assert Bb.shape == (3 * h, 3 * h)
        for j in range(3):
            np.testing.assert_array_equal(Bb[:h, j * h:(j + 1) * h], m.vech_form.B[j])
        np.testing.assert_array_equal(Bb[h:2 * h, :h], np.eye(h))
        np.testing.assert_array_equal(Bb[2 * h:, h:2 * h], np.eye(h))
        np.testing.assert_array_equal(Bb[h:, 2 * h:], 0)
        Bt = m.blocks.Btilde_block
        assert Bt.shape == (m.state_dim, m.state_dim)
        np.testing.assert_array_equal(Bt[3 * h:], 0)
        np.testing.assert_array_equal(m.blocks.scrC[:h], matcore.vech(m.C))
        np.testing.assert_array_equal(m.blocks.scrC[h:], 0)
        assert m.blocks.A_block.shape == (3 * h, 2 * h)

    def test_dimensions(self, rng):
        m = oracles.random_model(rng, d=3, p=2, q=1, l=3, s=2)
        assert (m.d, m.p, m.q, m.h) == (3, 2, 1, 6)
        assert m.state_dim == 2 * 6 + 3
        assert m.l == [3] and m.s == [2, 2]

    def test_transposed(self, rng):
        m = oracles.random_model(rng, d=2)
        mt = m.transposed()
        np.testing.assert_array_equal(mt.A[0][0], m.A[0][0].T)
        np.testing.assert_array_equal(mt.C, m.C)

    def test_arrays_read_only(self, rng):
        m = oracles.random_model(rng)
        with pytest.raises(ValueError):
            m.C[0, 0] = 3.0
        with pytest.raises(ValueError):
            m.vech_form.A[0][0, 0] = 3.0


class TestValidation:
    def test_c_not_pd(self):
        with pytest.raises(ModelError) as err:
            BekkModel(np.diag([1.0, -1.0]), [np.eye(2)], [np.eye(2)])
        assert err.value.field == "C"

    def test_c_not_symmetric(self):
        with pytest.raises(ModelError):
            BekkModel([[1.0, 0.5], [0.0, 1.0]], [np.eye(2)], [np.eye(2)])

    def test_wrong_shape(self):
        with pytest.raises(ModelError) as err:
            BekkModel(np.eye(2), [np.eye(3)], [np.eye(2)])
        assert err.value.field == "A[0]"

    def test_non_finite(self):
        with pytest.raises(ModelError):
            BekkModel(np.eye(2), [np.full((2, 2), np.nan)], [np.eye(2)])

    def test_empty_family(self):
        with pytest.raises(ModelError):
            BekkModel(np.eye(2), [], [np.eye(2)])


class TestSerialisation:
    def test_roundtrip(self, rng, tmp_path):
        m = oracles.random_model(rng, d=2, p=2, q=1, l=2)
        path = tmp_path / "m.json"
        save_model(m, path)
        m2 = load_model(path)
        assert model_hash(m2) == model_hash(m)
        for x, y in zip(m.all_A(), m2.all_A()):
            np.testing.assert_array_equal(x, y)

    def test_hash_changes(self, scalar_model):
        obj = model_to_dict(scalar_model)
        obj["C"] = [[1.5]]
        assert model_hash(model_from_dict(obj)) != model_hash(scalar_model)

    def test_hash_is_short_hex(self, scalar_model):
        hsh = model_hash(scalar_model)
        assert len(hsh) == 16
        int(hsh, 16)

    @pytest.mark.parametrize(
        "patch, field",
        [
            ({"format": "bekk-v0"}, "format"),
            ({"d": 0}, "d"),
            ({"q": 2}, "A"),
            ({"C": [[1.0, 0.0]]}, "C"),
            ({"B": [[["x"]]]}, "B[0]"),
        ],
    )
    def test_schema_errors(self, scalar_model, patch, field):
        obj = model_to_dict(scalar_model)
        obj.update(patch)
        with pytest.raises(ModelError) as err:
            model_from_dict(obj)
        assert err.value.field == field

    def test_missing_key(self, scalar_model):
        obj = model_to_dict(scalar_model)
        del obj["B"]
        with pytest.raises(ModelError) as err:
            model_from_dict(obj)
        assert err.value.field == "B"

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"format": "bekk-v1",')
        with pytest.raises(json.JSONDecodeError):
            load_model(p)
