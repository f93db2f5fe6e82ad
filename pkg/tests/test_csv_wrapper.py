import numpy as np
import pytest

from pysubbotin.core import Dataset, Graph
from pysubbotin.csv_wrapper import format_float, load_csv, parse_dataset, parse_edge_list, parse_json, save_csv, \
    serialize_coefficients, serialize_dataset, serialize_edge_list, serialize_path, serialize_profile, \
    serialize_profiles
from pysubbotin.errors import ParseError
from pysubbotin.stability import StabilityProfile


def try_helper(try_code, exception_str, exception):
    try:
        try_code()
        assert False
    except exception as e:
        assert str(e) == exception_str


class TestDataset:
    def test_header_detected(self):
        data, header = parse_dataset("a,b\n1,2\n3,4.5\n")
        assert header == ["a", "b"]
        assert np.array_equal(data.values, [[1.0, 2.0], [3.0, 4.5]])
        assert not data.standardized

    def test_no_header_and_blank_lines(self):
        data, header = parse_dataset("1,2\n\n-3e2,4\n")
        assert header is None
        assert data.values[1, 0] == -300.0

    def test_errors(self):
        try_helper(lambda: parse_dataset(""), "file is empty", ParseError)
        try_helper(lambda: parse_dataset("a,b\n"), "line 1: file has a header but no data rows", ParseError)
        try_helper(lambda: parse_dataset("1,2\n3\n"), "line 2: ragged row: expected 2 fields, got 1", ParseError)
        try_helper(lambda: parse_dataset("x,y\n1,2\n3,abc\n"), "line 3, column 2: not a number: 'abc'", ParseError)
        try_helper(lambda: parse_dataset("1,nan\n"), "line 1, column 2: non-finite value 'nan'", ParseError)

    def test_file_round_trip(self, tmp_path):
        values = np.array([[0.1, 1 / 3], [-2.5, 1e-300]])
        save_csv(tmp_path / "sub" / "data.csv", Dataset(values))
        assert np.array_equal(load_csv(tmp_path / "sub" / "data.csv").values, values)

    def test_serialize_default_header(self):
        assert serialize_dataset(np.array([[1.0, 2.0]])).splitlines()[0] == "x0,x1"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(tmp_path / "nope.csv")

    def test_format_float(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert float(format_float(1 / 3)) == 1 / 3


class TestEdgeList:
    def test_parse(self):
        graph = parse_edge_list("i,j\n2,0\n1,2\n", 3)
        assert graph.sorted_edges() == [(0, 2), (1, 2)]
        assert parse_edge_list("", 3).edge_count == 0

    def test_serialize(self):
        assert serialize_edge_list(Graph(3, frozenset([(2, 1), (0, 1)]))) == "i,j\n0,1\n1,2\n"

    def test_errors(self):
        try_helper(lambda: parse_edge_list("0,5\n", 3), "line 1: edge (0, 5) is invalid for 3 nodes", ParseError)
        try_helper(lambda: parse_edge_list("0,a\n", 3), "line 1: edge endpoints must be integers, got '0,a'",
                   ParseError)
        try_helper(lambda: parse_edge_list("0,1,2\n", 3), "line 1: expected 2 fields, got 3", ParseError)


class TestTables:
    def test_coefficients(self):
        text = serialize_coefficients(np.array([[0.0, 0.5], [0.25, 0.0]]))
        assert text.splitlines() == ["node,x0,x1", "0,0,0.5", "1,0.25,0"]

    def test_path(self):
        text = serialize_path([(1.0, Graph(2)), (0.5, Graph(2, frozenset([(0, 1)])))])
        assert text.splitlines() == ["lambda,edge_count", "1,0", "0.5,1"]

    def test_profiles(self):
        freq = np.array([[0, 0.5, 1], [0.5, 0, 0], [1, 0, 0]])
        prof = StabilityProfile(3, freq, 4, 4, 0.25)
        assert serialize_profile(prof).splitlines() == ["i,j,frequency", "0,1,0.5", "0,2,1", "1,2,0"]
        lines = serialize_profiles([prof]).splitlines()
        assert lines[0] == "nu,lambda,i,j,frequency"
        assert lines[1] == "4,0.25,0,1,0.5"


class TestJson:
    def test_parse_error_has_position(self):
        with pytest.raises(ParseError) as e:
            parse_json('{"a": }')
        assert e.value.line == 1 and e.value.column is not None
