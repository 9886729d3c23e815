"""Render estimate/band JSON files into comparison panels.

Consumes only the stable schema_version-1 JSON emitted by the npdose CLI
("curves" and "bootstrap" kinds); it never re-runs estimation. Each input
file becomes one panel: estimated curves with a legend, optionally the
analytic truth of a named benchmark model, shaded pointwise confidence
intervals, and dashed uniform confidence bands.
"""

import json
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SUPPORTED_SCHEMA = 1

# analytic truth curves of the benchmark models, keyed by model name and
# whether the panel shows the curve itself or its derivative
_TRUTHS = {
    "single": (lambda t: t**2 + t + 1, lambda t: 2 * t + 1),
    "linear": (lambda t: t, lambda t: np.ones_like(t)),
    "nonlinear": (lambda t: t**2 + t, lambda t: 2 * t + 1),
}

_LABELS = {
    "m_theta": "integral estimator",
    "theta_C": "localized derivative",
    "m_RA": "naive RA",
    "theta_RA": "naive RA derivative",
}


class SchemaError(ValueError):
    """Input JSON does not match the supported schema."""


@dataclass
class FigureSpec:
    """What to draw: one panel per input JSON, left to right."""

    inputs: list
    truth: str | None = None
    out: str = "figure.png"
    ncols: int = 0  # 0: one row
    titles: list = field(default_factory=list)
    dpi: int = 130


def load_payload(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise SchemaError(f"{path}: schema_version {version!r}, expected {SUPPORTED_SCHEMA}")
    kind = payload.get("kind")
    if kind not in ("curves", "bootstrap"):
        raise SchemaError(f"{path}: unsupported kind {kind!r}")
    return payload


def _as_array(values):
    return np.array([np.nan if v is None else float(v) for v in values])


def _truth_for(tag: str, truth: str):
    m_fn, theta_fn = _TRUTHS[truth]
    return theta_fn if tag.startswith("theta") else m_fn


def _draw_bootstrap(ax, payload, truth):
    grid = _as_array(payload["grid"])
    values = _as_array(payload["values"])
    tag = payload["estimator"]
    plo, phi = _as_array(payload["pointwise_lo"]), _as_array(payload["pointwise_hi"])
    ulo, uhi = _as_array(payload["uniform_lo"]), _as_array(payload["uniform_hi"])
    ax.fill_between(grid, plo, phi, alpha=0.3, color="tab:blue", linewidth=0,
                    label="pointwise CI")
    ax.plot(grid, ulo, "--", color="tab:blue", linewidth=1.0, label="uniform band")
    ax.plot(grid, uhi, "--", color="tab:blue", linewidth=1.0)
    ax.plot(grid, values, color="tab:blue", linewidth=1.6, label=_LABELS.get(tag, tag))
    if truth:
        ax.plot(grid, _truth_for(tag, truth)(grid), color="black", linewidth=1.2,
                linestyle=":", label="truth")
    ax.set_title(f"{_LABELS.get(tag, tag)} (n={payload['n']}, B={payload['B']})")


def _draw_curves(ax, payload, truth):
    grid0 = None
    for k, curve in enumerate(payload["curves"]):
        grid = _as_array(curve["grid"])
        values = _as_array(curve["values"])
        tag = curve["estimator"]
        color = f"C{k}"
        ax.plot(grid, values, color=color, linewidth=1.6, label=_LABELS.get(tag, tag))
        grid0 = grid if grid0 is None else grid0
    if truth and payload["curves"]:
        tag = payload["curves"][0]["estimator"]
        ax.plot(grid0, _truth_for(tag, truth)(grid0), color="black", linewidth=1.2,
                linestyle=":", label="truth")
    ax.set_title(f"estimates (n={payload['n']})")


def render(spec: FigureSpec):
    """Draw every panel and write the image; returns the matplotlib figure."""
    if not spec.inputs:
        raise ValueError("no input files")
    if spec.truth is not None and spec.truth not in _TRUTHS:
        raise ValueError(f"unknown truth model {spec.truth!r}; expected one of {sorted(_TRUTHS)}")
    payloads = [load_payload(p) for p in spec.inputs]
    n = len(payloads)
    ncols = spec.ncols if spec.ncols > 0 else n
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.6 * ncols, 3.6 * nrows), squeeze=False)
    for k, payload in enumerate(payloads):
        ax = axes[k // ncols][k % ncols]
        if payload["kind"] == "bootstrap":
            _draw_bootstrap(ax, payload, spec.truth)
        else:
            _draw_curves(ax, payload, spec.truth)
        if k < len(spec.titles):
            ax.set_title(spec.titles[k])
        ax.set_xlabel("treatment level")
        ax.legend(fontsize=8)
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(spec.out, dpi=spec.dpi)
    return fig
