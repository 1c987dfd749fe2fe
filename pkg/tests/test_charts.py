import xml.etree.ElementTree as ET

import numpy as np
import pytest

from paraqnn.charts import line_chart


def test_line_and_scatter_chart(tmp_path):
    x = np.linspace(0, 8, 200)
    path = line_chart(
        tmp_path / "chart.svg",
        [{"x": x, "y": np.sin(x), "label": "signal"},
         {"x": x, "y": np.sin(x) + 0.1, "label": "obs", "kind": "scatter"}],
        title="demo", xlabel="t", ylabel="P")
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    body = path.read_text()
    assert "<polyline" in body and "<circle" in body
    assert "demo" in body


def test_log_scale_requires_positive_values(tmp_path):
    with pytest.raises(ValueError, match="positive"):
        line_chart(tmp_path / "c.svg",
                   [{"x": [0, 1], "y": [-1.0, -2.0], "label": "bad"}],
                   log_y=True)


def test_log_scale_renders_decades(tmp_path):
    x = np.arange(100)
    y = 10.0 ** (-x / 25.0)
    path = line_chart(tmp_path / "c.svg",
                      [{"x": x, "y": y, "label": "loss"}], log_y=True)
    assert "1.00e-04" in path.read_text() or "1e-04" in path.read_text()


def test_empty_series_rejected(tmp_path):
    with pytest.raises(ValueError, match="no series"):
        line_chart(tmp_path / "c.svg", [])


def test_dense_scatter_is_subsampled(tmp_path):
    x = np.linspace(0, 1, 50_000)
    path = line_chart(tmp_path / "c.svg",
                      [{"x": x, "y": x, "label": "pts", "kind": "scatter"}])
    assert path.read_text().count("<circle") <= 2100
