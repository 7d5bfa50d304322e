import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from energynorm.plot import PlotError, Series, bar_csv, bar_svg, mean_abs_log_ratio, scatter_csv, scatter_svg

NS = "{http://www.w3.org/2000/svg}"


def test_scatter_has_identity_axes_and_points():
    x = np.array([0.01, 0.1, 1.0])
    svg = scatter_svg([Series("s", x, x, ["a", "b", "c"])], "target [kWh]", "source [kWh]")
    root = ET.fromstring(svg)
    assert root.tag == NS + "svg"
    identity = [e for e in root.iter(NS + "line") if e.get("class") == "identity"]
    assert len(identity) == 1
    texts = [t.text for t in root.iter(NS + "text")]
    assert "target [kWh]" in texts and "source [kWh]" in texts
    circles = [c for c in root.iter(NS + "circle") if c.get("r") == "3"]
    assert len(circles) == 3
    # identity data lies on the identity line: for a y-down SVG the line is cx + cy = const
    line = identity[0]
    x1, y1, x2, y2 = (float(line.get(k)) for k in ("x1", "y1", "x2", "y2"))
    for c in circles:
        cx, cy = float(c.get("cx")), float(c.get("cy"))
        assert abs((cx - x1) * (y2 - y1) - (cy - y1) * (x2 - x1)) / np.hypot(x2 - x1, y2 - y1) < 0.05


def test_scatter_empty():
    with pytest.raises(PlotError):
        scatter_svg([Series("s", np.array([]), np.array([]))], "x", "y")


def test_scatter_csv():
    text = scatter_csv([Series("n", np.array([1.0]), np.array([2.0]), ["m"])])
    assert text.splitlines() == ["series,model_id,target_kwh,plotted_kwh", "n,m,1.0,2.0"]


def test_bar_structure():
    svg = bar_svg(["linear", "poly2", "svr"], {"R2": [0.9, 0.95, -0.2], "MSE": [0.1, 0.05, 1.0]},
                  {"R2": [0.01, 0.02, 0.3], "MSE": [None, None, None]})
    root = ET.fromstring(svg)
    panels = [g for g in root.iter(NS + "g") if g.get("class") == "panel"]
    assert [p.get("data-metric") for p in panels] == ["R2", "MSE"]
    for p in panels:
        assert len([r for r in p.iter(NS + "rect") if r.get("class") == "bar"]) == 3
    assert len(bar_csv(["a"], {"R2": [1.0]}).splitlines()) == 2


def test_bar_empty():
    with pytest.raises(PlotError):
        bar_svg([], {})


def test_mean_abs_log_ratio():
    assert mean_abs_log_ratio([1, 10], [1, 10]) == 0
    assert mean_abs_log_ratio([10, 1], [1, 10]) == 1


def test_svg_is_deterministic():
    s = [Series("s", np.array([0.3, 2.0]), np.array([0.5, 1.5]))]
    assert scatter_svg(s, "x", "y") == scatter_svg(s, "x", "y")
    assert not re.search(r"nan|inf", scatter_svg(s, "x", "y"))
