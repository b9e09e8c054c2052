import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtrwols.exceptions import (
    DomainError,
    EmptyFile,
    InvalidData,
    MissingColumn,
    ParseError,
    TermSyntaxError,
)
from dtrwols.tabular import (
    Dataset,
    Exp,
    Interaction,
    Log,
    LogAbs,
    Pow,
    TermList,
    Var,
    build_design,
    load_csv,
    parse_term,
    write_csv,
)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_header_and_two_rows(self, tmp_path):
        data = load_csv(write(tmp_path, "y,x1,a1\n1.5,2,0\n3,4,1\n"))
        assert data.n == 2
        assert data.column_names == ("y", "x1", "a1")
        np.testing.assert_array_equal(data["x1"], [2.0, 4.0])
        assert data["y"].dtype == np.float64

    def test_missing_declared_column(self, tmp_path):
        path = write(tmp_path, "y,x1\n1,2\n")
        with pytest.raises(MissingColumn) as info:
            load_csv(path, schema=["y", "x1", "x2"])
        assert info.value.name == "x2"

    def test_non_numeric_token(self, tmp_path):
        path = write(tmp_path, "y,x1\n1,2\n3,abc\n")
        with pytest.raises(ParseError) as info:
            load_csv(path)
        assert (info.value.row, info.value.column, info.value.token) == (2, "x1", "abc")

    def test_non_finite_token_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(write(tmp_path, "y\nnan\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(write(tmp_path, "y,x\n1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyFile):
            load_csv(write(tmp_path, ""))

    def test_header_only(self, tmp_path):
        with pytest.raises(EmptyFile):
            load_csv(write(tmp_path, "y,x\n"))

    def test_schema_selects_columns_in_order(self, tmp_path):
        data = load_csv(write(tmp_path, "a,b,c\n1,2,3\n"), schema=["c", "a"])
        assert data.column_names == ("c", "a")

    def test_row_order_preserved_and_blank_lines_skipped(self, tmp_path):
        data = load_csv(write(tmp_path, "x\n3\n\n1\n2\n"))
        np.testing.assert_array_equal(data["x"], [3, 1, 2])

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(write(tmp_path, "x,x\n1,2\n"))

    def test_write_then_load_is_exact(self, tmp_path, rng):
        data = Dataset({"u": rng.standard_normal(50), "v": rng.random(50) * 1e-300})
        path = tmp_path / "out.csv"
        write_csv(data, path)
        assert load_csv(path) == data


class TestDataset:
    def test_rejects_ragged_columns(self):
        with pytest.raises(InvalidData):
            Dataset({"a": [1, 2], "b": [1]})

    def test_rejects_empty(self):
        with pytest.raises(InvalidData):
            Dataset({"a": []})

    def test_columns_are_read_only(self):
        data = Dataset({"a": [1.0, 2.0]})
        with pytest.raises(ValueError):
            data["a"][0] = 5.0

    def test_missing_column(self):
        with pytest.raises(MissingColumn):
            Dataset({"a": [1.0]})["b"]


class TestTerms:
    @pytest.mark.parametrize(
        "token, term",
        [
            ("x", Var("x")),
            ("x^2", Pow("x", 2)),
            ("I(x^4)", Pow("x", 4)),
            ("x**3", Pow("x", 3)),
            ("log(x)", Log("x")),
            ("log(abs(x))", LogAbs("x")),
            ("exp(2*x)", Exp(2.0, "x")),
            ("x:z", Interaction("x", "z")),
        ],
    )
    def test_parse_term(self, token, term):
        assert parse_term(token) == term

    def test_unknown_term(self):
        with pytest.raises(TermSyntaxError):
            parse_term("tan(x)")

    def test_parse_formula(self):
        t = TermList.parse("1 + x1 + log(x2)")
        assert t.labels == ("(Intercept)", "x1", "log(x2)")
        assert TermList.parse("x - 1").labels == ("x",)
        assert TermList.parse("y ~ x").labels == ("(Intercept)", "x")
        assert TermList.parse("1").n_columns == 1

    def test_duplicate_term(self):
        with pytest.raises(TermSyntaxError):
            TermList.parse("x + x")


class TestBuildDesign:
    def test_intercept_and_identity(self):
        X = build_design(Dataset({"x": [1.0, 2.0, 3.0]}), TermList.parse("1 + x"))
        np.testing.assert_array_equal(X.values, [[1, 1], [1, 2], [1, 3]])
        assert X.column_labels == ("(Intercept)", "x")

    def test_log_and_sin_at_one(self):
        X = build_design(Dataset({"x": [1.0]}), TermList.parse("log(x) + sin(x) - 1"))
        assert X.values[0, 0] == 0.0
        assert X.values[0, 1] == pytest.approx(math.sin(1.0), abs=1e-15)
        assert X.values[0, 1] == pytest.approx(0.8414709848078965, abs=1e-15)

    def test_log_of_negative(self):
        with pytest.raises(DomainError) as info:
            build_design(Dataset({"x": [2.0, -1.0]}), TermList.parse("log(x)"))
        assert info.value.row == 1

    def test_logabs_of_zero(self):
        with pytest.raises(DomainError):
            build_design(Dataset({"x": [0.0]}), TermList.parse("log(abs(x))"))

    def test_missing_variable(self):
        with pytest.raises(MissingColumn):
            build_design(Dataset({"x": [1.0]}), TermList.parse("1 + z"))

    def test_cos_pi_and_exp(self):
        X = build_design(Dataset({"x": [0.5, 1.0]}), TermList.parse("cos(pi*x) + exp(2*x) - 1"))
        np.testing.assert_allclose(X.values[:, 0], [np.cos(np.pi * 0.5), -1.0], atol=1e-15)
        np.testing.assert_allclose(X.values[:, 1], np.exp([1.0, 2.0]))


_TOKENS = ["x", "z", "x^2", "z^3", "log(abs(x))", "abs(z)", "sin(x)", "cos(z)", "cos(pi*x)", "exp(0.5*z)", "x:z"]


@settings(max_examples=60, deadline=None)
@given(
    chosen=st.lists(st.sampled_from(_TOKENS), unique=True, max_size=len(_TOKENS)),
    intercept=st.booleans(),
    seed=st.integers(0, 2**32 - 1),
)
def test_column_count_and_determinism(chosen, intercept, seed):
    rng = np.random.default_rng(seed)
    data = Dataset({"x": rng.uniform(0.1, 2, 20) * rng.choice([-1, 1], 20), "z": rng.standard_normal(20)})
    formula = " + ".join((["1"] if intercept else ["0"]) + chosen)
    terms = TermList.parse(formula)
    first = build_design(data, terms)
    second = build_design(data, TermList.parse(formula))
    assert first.shape == (20, len(chosen) + int(intercept))
    assert first.values.tobytes() == second.values.tobytes()
