"""Explainer base classes: one ``explain`` per method, one ``plot`` per output kind."""
from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from . import viz


class Explainer:
    """Common surface of all explainers.

    Hyperparameters live on ``self.params`` (a dataclass) and are exposed
    unchanged through :meth:`get_params`.
    """

    method: str = ""
    kind: str = ""

    def __init__(self, model, params):
        self.model = model
        self.params = params

    def get_params(self) -> dict:
        return asdict(self.params)

    def explain(self, x, **kwargs):
        raise NotImplementedError

    def plot(self, x, exp, path=None, style=None) -> str:
        svg = self._render(x, exp, style or viz.PlotStyle())
        if path is not None:
            Path(path).write_text(svg, encoding="utf-8")
        return svg

    def _render(self, x, exp, style):
        raise NotImplementedError


class FeatureAttribution(Explainer):
    kind = "attribution"

    def _render(self, x, exp, style):
        return viz.render_attribution(x, exp, style)


class InstanceBased(Explainer):
    kind = "counterfactual"

    def _render(self, x, exp, style):
        return viz.render_counterfactual(x, exp, style, original_label=self.model.predict_one(x))
