import numpy as np
import pytest

from epispatial.fieldio import format_field, read_field, read_mask, write_field, write_mask
from epispatial.grid import build_grid, build_mask


def test_header_and_layout():
    g = build_grid(1, 1, 3, 2)
    text = format_field(np.arange(6.0).reshape(2, 3), g, "s", t=1.5)
    lines = text.splitlines()
    assert lines[0] == "field s nx 3 ny 2 hx 0.333333333333333 hy 0.5 t 1.5"
    assert lines[1].split() == ["0", "1", "2"]
    assert len(lines) == 3


def test_round_trip(tmp_path):
    g = build_grid(2, 1, 6, 4)
    rng = np.random.default_rng(1)
    f = rng.random(g.shape)
    write_field(tmp_path / "f.txt", f, g, "phi", t=3.0)
    values, header = read_field(tmp_path / "f.txt")
    np.testing.assert_allclose(values, f, rtol=1e-14)
    assert header["name"] == "phi" and header["nx"] == 6 and header["t"] == 3.0


def test_mask_round_trip(tmp_path):
    g = build_grid(1, 1, 8, 8)
    m = build_mask(g, {"kind": "disk", "cx": .5, "cy": .5, "radius": .3})
    write_mask(tmp_path / "mask.txt", m)
    assert set((tmp_path / "mask.txt").read_text().split("\n", 1)[1].split()) == {"0", "1"}
    back = read_mask(tmp_path / "mask.txt", g)
    np.testing.assert_array_equal(back.membership, m.membership)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("field s nx 2 ny 2 hx 0.5 hy 0.5 t 0\n1 2\n")
    with pytest.raises(ValueError):
        read_field(p)
