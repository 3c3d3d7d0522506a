import json

import numpy as np
import pytest

from mongeo.core import MonotoneMap, PathGrid, SpaceGrid, TimeGrid, VelocityField
from mongeo.errors import MonotonicityViolation, ValidationError
from mongeo.io import (atomic_write, dumps, format_csv, from_envelope, map_from_csv, map_to_csv,
                       parse_csv, path_from_csv, path_to_csv, to_envelope, velocity_from_csv,
                       velocity_to_csv)


def _path():
    rng = np.random.default_rng(3)
    tg, g = TimeGrid(3, 0.7), SpaceGrid(5)
    rows = []
    for _ in range(4):
        inc = rng.random(5)
        rows.append(np.concatenate(([0.0], np.cumsum(inc) / inc.sum())))
    return PathGrid(tg, g, np.array(rows))


def test_header_format():
    text = path_to_csv(_path())
    assert text.splitlines()[0] == "# mongeo v1, n=5, m=3, T=0.69999999999999996"


def test_path_roundtrip_bit_exact():
    p = _path()
    q = path_from_csv(path_to_csv(p))
    assert np.array_equal(p.values, q.values)
    assert q.tgrid == p.tgrid and q.sgrid == p.sgrid


def test_map_roundtrip():
    phi = MonotoneMap(SpaceGrid(3), [0, 1 / 3, 0.7, 1])
    assert np.array_equal(map_from_csv(map_to_csv(phi)).values, phi.values)


def test_velocity_roundtrip():
    v = VelocityField.from_function(lambda t, x: np.sin(3 * x) * t, TimeGrid(2), SpaceGrid(4))
    assert np.array_equal(velocity_from_csv(velocity_to_csv(v)).values, v.values)


def test_non_monotone_row_named():
    text = format_csv(np.array([[0, 0.5, 0.4, 1]]))
    with pytest.raises(MonotonicityViolation, match="row 0, column 2"):
        map_from_csv(text)


@pytest.mark.parametrize("text", [
    "",
    "n=3\n0,1\n",
    "# mongeo v1, n=2, m=0, T=0\n0,0.5\n",
    "# mongeo v1, n=1, m=1, T=1\n0,1\n",
    "# mongeo v1, n=1, m=0, T=0\n0,x\n",
])
def test_bad_layout(text):
    with pytest.raises(ValidationError):
        parse_csv(text)


def test_comment_lines_skipped():
    values, n, m, T = parse_csv("# mongeo v1, n=1, m=0, T=0\n0,1\n# truncated: note\n")
    assert values.shape == (1, 2)


def test_envelope_roundtrip():
    p = _path()
    env = json.loads(dumps(to_envelope(p)))
    assert set(env) == {"n", "m", "T", "values"}
    assert np.array_equal(from_envelope(env).values, p.values)


def test_atomic_write_replaces(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    atomic_write(target, "one")
    atomic_write(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["f.txt"]
