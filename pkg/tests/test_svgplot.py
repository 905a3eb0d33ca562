"""SVG emission: structure, color blending, dimensionality guard."""

import numpy as np
import pytest

from indirectml import svgplot
from indirectml.errors import UnsupportedDimension


class TestColors:
    def test_pure_classes_map_to_palette(self):
        probs = np.eye(3)
        rgb = svgplot.probs_to_rgb(probs)
        assert np.allclose(rgb, svgplot.PALETTE[:3])

    def test_blend_is_convex(self):
        probs = np.array([[0.5, 0.25, 0.25]])
        rgb = svgplot.probs_to_rgb(probs)
        assert np.all(rgb >= 0.0) and np.all(rgb <= 1.0)

    def test_many_classes_cycle_palette(self):
        colors = svgplot.class_colors(25)
        assert colors.shape == (25, 3)


class TestLossCurve:
    def test_svg_structure(self):
        svg = svgplot.loss_curve_svg([3.0, 2.0, 1.5, 1.4])
        assert svg.startswith("<svg") and svg.endswith("</svg>")
        assert "polyline" in svg

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            svgplot.loss_curve_svg([])


class TestDecisionPlot:
    def test_two_dimensional(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((30, 2))

        def predict(grid):
            logits = np.stack([grid[:, 0], grid[:, 1], -grid[:, 0]], axis=1)
            e = np.exp(logits - logits.max(axis=1, keepdims=True))
            return e / e.sum(axis=1, keepdims=True)

        svg = svgplot.decision_plot_svg(predict, pts, predict(pts), grid=40)
        assert svg.count("<circle") == 30
        assert "#202020" in svg  # boundary cells present

    def test_dimension_guard(self):
        pts = np.zeros((5, 3))
        with pytest.raises(UnsupportedDimension):
            svgplot.decision_plot_svg(lambda g: g, pts, np.ones((5, 2)) / 2)
        with pytest.raises(UnsupportedDimension):
            svgplot.scatter_svg(pts, np.ones((5, 2)) / 2)

    def test_scatter(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0]])
        svg = svgplot.scatter_svg(pts, np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert svg.count("<circle") == 2
