import xml.etree.ElementTree as ET

import numpy as np

from slmc.svg import line_plot, marching_squares, nice_ticks, scatter_plot

NS = "{http://www.w3.org/2000/svg}"


def _parse(text):
    root = ET.fromstring(text)
    assert root.tag == NS + "svg"
    assert (root.get("width"), root.get("height")) == ("800", "600")
    return root


def test_line_plot_valid():
    root = _parse(line_plot([("a", [0, 1, 2], [1, 0.1, 0.01]), ("b", [0, 2], [2, 3])], "t", "x", "y", logy=True))
    assert len(root.findall(f"{NS}polyline")) == 2


def test_line_plot_drops_nonpositive_on_log_axis():
    root = _parse(line_plot([("a", [0, 1, 2], [0.0, -1.0, 1.0])], logy=True))
    pts = root.find(f"{NS}polyline").get("points").split()
    assert len(pts) == 1


def test_empty_inputs_draw_axes():
    _parse(line_plot([]))
    _parse(scatter_plot([]))


def test_escaping():
    assert "&lt;b&gt;" in line_plot([("<b>", [0, 1], [0, 1])])


def test_deterministic_output():
    s = [("a", np.linspace(0, 1, 7), np.linspace(1, 2, 7) ** 2)]
    assert line_plot(s) == line_plot(s)


def test_nice_ticks():
    assert nice_ticks(0, 10) == [0, 2, 4, 6, 8, 10]
    assert nice_ticks(1, 1) == [1]


def test_marching_squares_circle():
    x = y = np.linspace(-2, 2, 81)
    X, Y = np.meshgrid(x, y)
    segs = marching_squares(x, y, X**2 + Y**2, 1.0)
    pts = np.array([p for seg in segs for p in seg])
    assert len(segs) > 50
    np.testing.assert_allclose(np.hypot(pts[:, 0], pts[:, 1]), 1.0, atol=2e-3)


def test_marching_squares_saddle():
    x = y = np.array([0.0, 1.0])
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert len(marching_squares(x, y, Z, 0.5)) == 2


def test_scatter_with_contour():
    x = y = np.linspace(-1, 1, 30)
    X, Y = np.meshgrid(x, y)
    pts = np.random.default_rng(0).standard_normal((10_000, 2))
    root = _parse(scatter_plot([("p", pts)], contour=(x, y, X**2 + Y**2, [0.25]), max_points=500))
    circles = root.findall(f".//{NS}circle")
    assert 0 < len(circles) <= 500
    assert root.findall(f".//{NS}line")
