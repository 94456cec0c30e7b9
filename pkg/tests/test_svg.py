import numpy as np

from spd.svg import line_plot, step_xy


def test_step_coordinates():
    x, y = step_xy([0, 1, 2], [3, 5])
    np.testing.assert_array_equal(x, [0, 1, 1, 2])
    np.testing.assert_array_equal(y, [3, 3, 5, 5])


def test_plot_is_deterministic_and_escaped():
    series = [{"x": [0, 1], "y": [0, 2], "label": "a<b"},
              {"x": [0, 1], "y": [1, np.nan], "label": "c", "dashed": True}]
    a = line_plot(series, title="t & u")
    assert a == line_plot(series, title="t & u")
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert "a&lt;b" in a and "t &amp; u" in a
    assert a.count('stroke-dasharray="2,3"') == 2  # polyline and legend swatch


def test_empty_series():
    assert "<polyline" not in line_plot([], title="none")
