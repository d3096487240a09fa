import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from capwave.errors import ParseError
from capwave.fourier import CoeffGrid
from capwave.io import (
    format_grid,
    format_manifest,
    format_matrix,
    ingest_nested_list,
    parse_grid,
    parse_manifest,
    parse_matrix,
    parse_nested_list,
    read_grid,
    read_matrix,
    write_grid,
    write_matrix,
)
from capwave.operators import AcalMatrix

from .conftest import grids, rationals


def test_nested_list_example():
    g = parse_grid("{{1/2,-1/3},{0,2}}")
    assert g.rows == ((mpq(1, 2), mpq(-1, 3)), (0, 2))


def test_nested_single_entry():
    assert parse_grid("{{1}}") == CoeffGrid([[1]])


def test_nested_list_with_decorations():
    text = "(* candidate *)\nu0hat = {{1,\n  -2/3},\n {4, 12345\\\n6789}};\n"
    assert parse_nested_list(text) == [[1, mpq(-2, 3)], [4, 123456789]]


@pytest.mark.parametrize("text, line", [
    ("{{1, 0.5}}", 1),
    ("{{1, 2},\n{3}}", 2),
    ("{{1, 2}", 1),
    ("{{1 2}}", 1),
    ("{{1,,2}}", 1),
    ("{{1, x}}", 1),
    ("{{1}}}", 1),
    ("{{1, 1/0}}", 1),
    ("{{{1}}}", 1),
])
def test_nested_list_errors(text, line):
    with pytest.raises(ParseError) as info:
        parse_nested_list(text, "f.m")
    assert info.value.line == line


def test_parse_error_reports_location():
    with pytest.raises(ParseError) as info:
        parse_nested_list("{{1, 2},\n {3, 4},\n {5, 6.0}}", "data.m")
    assert info.value.line == 3
    assert "data.m" in str(info.value)


def test_canonical_grid():
    g = parse_grid("2 3\n1 -1/2 0\n# comment\n3 4 5/7\n")
    assert g.shape == (2, 3) and g[1, 2] == mpq(5, 7)


@pytest.mark.parametrize("text", ["2 2\n1 2\n3\n", "2 2\n1 2\n", "x 2\n1 2\n", "1 1\n0.25\n", "1 1\n1e3\n", ""])
def test_canonical_grid_errors(text):
    with pytest.raises(ParseError):
        parse_grid(text)


def test_nested_matrix_is_transposed(tmp_path):
    # row J of the file lists the coefficients of A P_J
    text = "{{1,2,3,4},{5,6,7,8},{9,10,11,12},{13,14,15,16}}"
    acal = parse_matrix(text)
    assert acal.entries[1][0] == 2 and acal.entries[0][1] == 5
    assert parse_matrix(text, layout="columns").entries[0][1] == 2
    (tmp_path / "a.m").write_text(text)
    assert ingest_nested_list(tmp_path / "a.m", kind="acal") == acal


def test_matrix_must_be_square_of_square():
    with pytest.raises(ParseError):
        parse_matrix("{{1,2},{3,4},{5,6}}")
    with pytest.raises(ParseError):
        parse_matrix("2\n1 0\n0 1\n")


def test_ingest_grid(tmp_path):
    p = tmp_path / "u.m"
    p.write_text("{{1/2,-1/3},{0,2}}")
    assert ingest_nested_list(p) == CoeffGrid([[mpq(1, 2), mpq(-1, 3)], [0, 2]])
    with pytest.raises(ValueError):
        ingest_nested_list(p, kind="vector")


@given(grids(4, 4))
def test_grid_round_trip(g):
    assert parse_grid(format_grid(g)) == g


@given(st.integers(1, 3).flatmap(lambda mu: st.lists(
    st.lists(rationals, min_size=mu * mu, max_size=mu * mu), min_size=mu * mu, max_size=mu * mu)))
def test_matrix_round_trip(rows):
    acal = AcalMatrix(rows)
    assert parse_matrix(format_matrix(acal)) == acal


def test_file_round_trip(tmp_path):
    g = CoeffGrid([[mpq(-7, 3), 1], [0, mpq(10**30 + 1, 10**30)]])
    write_grid(g, tmp_path / "g.txt")
    assert read_grid(tmp_path / "g.txt") == g
    a = AcalMatrix.identity(2, mpq(3, 5))
    write_matrix(a, tmp_path / "a.txt")
    assert read_matrix(tmp_path / "a.txt") == a


# ---------------------------------------------------------------- manifests

def test_manifest_parsing(tmp_path):
    text = "omega = 69/40  # test frequency\nu0 = u.txt\nacal = a.txt\nk0 = 1/2\ndelta = 1/1000\nmtilde = 40\n"
    man = parse_manifest(text, tmp_path / "c.cert")
    assert man.rational("omega") == mpq(69, 40)
    assert man.integer("mtilde") == 40
    assert man.integer("mu") is None
    assert man.resolve("u0") == tmp_path / "u.txt"
    assert man.rational("rho_x", 7) == 7


@pytest.mark.parametrize("text, msg", [
    ("omega = 69/40\nu0 = u\nacal = a\nk0 = 1/2\n", "missing"),
    ("omega = 69/40\nomega = 1\nu0 = u\nacal = a\nk0 = 1/2\ndelta = 1\n", "duplicate"),
    ("colour = red\n", "unknown"),
    ("omega 69/40\n", "key = value"),
])
def test_manifest_errors(text, msg):
    with pytest.raises(ParseError) as info:
        parse_manifest(text, "c.cert")
    assert msg in str(info.value)


def test_manifest_rejects_decimals():
    man = parse_manifest("omega = 1.725\nu0 = u\nacal = a\nk0 = 1/2\ndelta = 1\n", "c.cert")
    with pytest.raises(ParseError) as info:
        man.rational("omega")
    assert info.value.line == 1


def test_manifest_formatting_orders_keys():
    text = format_manifest({"delta": mpq(1, 3), "omega": mpq(69, 40), "label": "x", "mtilde": None})
    assert text == "label = x\nomega = 69/40\ndelta = 1/3\n"
