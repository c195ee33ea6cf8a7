"""Self-contained SVG bar charts for joint-action value tables.

The renderings are a convenience; the CSV emitted next to them is the
contract.  Charts are deterministic strings: no timestamps, no randomness.
Each joint action gets a pair of bars (exact value in grey, reconstructed
value coloured by its height) above or below a zero baseline.
"""

from __future__ import annotations

from typing import Optional, Sequence

MARGIN_LEFT = 56
MARGIN_RIGHT = 16
MARGIN_TOP = 34
MARGIN_BOTTOM = 28
PLOT_HEIGHT = 240


def _value_color(value: float, vmin: float, vmax: float) -> str:
    """Map a value to a hue from blue (low) to red (high)."""
    span = vmax - vmin
    norm = 0.5 if span <= 0 else (value - vmin) / span
    hue = 220.0 * (1.0 - norm)
    return f"hsl({hue:.0f},70%,45%)"


def _ticks(vmin: float, vmax: float, count: int = 5) -> list[float]:
    if vmax <= vmin:
        return [vmin]
    raw = (vmax - vmin) / count
    magnitude = 10.0 ** len(str(int(abs(raw)))) if abs(raw) >= 1 else 1.0
    step = raw
    for nice in (0.1, 0.2, 0.25, 0.5, 1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= nice * magnitude / 10.0:
            step = nice * magnitude / 10.0
            break
    first = step * round(vmin / step)
    ticks = []
    value = first
    while value <= vmax + 1e-9:
        if value >= vmin - 1e-9:
            ticks.append(round(value, 10))
        value += step
    return ticks or [vmin]


def bar_chart_svg(
    title: str,
    true_values: Sequence[float],
    approx_values: Optional[Sequence[float]] = None,
) -> str:
    """Render one value table (and optionally its reconstruction) as bars."""
    truth = [float(v) for v in true_values]
    approx = None if approx_values is None else [float(v) for v in approx_values]
    if approx is not None and len(approx) != len(truth):
        raise ValueError("series lengths disagree")
    everything = truth + (approx or [])
    vmin = min(0.0, min(everything))
    vmax = max(0.0, max(everything))
    if vmax == vmin:
        vmax = vmin + 1.0

    n = len(truth)
    group = 10 if n <= 80 else 4
    width = MARGIN_LEFT + MARGIN_RIGHT + group * n
    height = MARGIN_TOP + MARGIN_BOTTOM + PLOT_HEIGHT
    scale = PLOT_HEIGHT / (vmax - vmin)

    def y_of(value: float) -> float:
        return MARGIN_TOP + (vmax - value) * scale

    zero_y = y_of(0.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">',
        f'<text x="{MARGIN_LEFT}" y="18" font-size="13">{title}</text>',
    ]
    for tick in _ticks(vmin, vmax):
        ty = y_of(tick)
        parts.append(
            f'<line x1="{MARGIN_LEFT}" y1="{ty:.2f}" x2="{width - MARGIN_RIGHT}" '
            f'y2="{ty:.2f}" stroke="#ccc" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{ty + 4:.2f}" text-anchor="end">{tick:g}</text>'
        )

    bar = (group - 2) / 2 if approx is not None else group - 2
    for i, value in enumerate(truth):
        x = MARGIN_LEFT + i * group + 1
        top = min(y_of(value), zero_y)
        h = abs(y_of(value) - zero_y)
        parts.append(
            f'<rect x="{x:.2f}" y="{top:.2f}" width="{bar:.2f}" height="{h:.2f}" '
            f'fill="#999"/>'
        )
        if approx is not None:
            av = approx[i]
            atop = min(y_of(av), zero_y)
            ah = abs(y_of(av) - zero_y)
            parts.append(
                f'<rect x="{x + bar:.2f}" y="{atop:.2f}" width="{bar:.2f}" '
                f'height="{ah:.2f}" fill="{_value_color(av, vmin, vmax)}"/>'
            )
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{zero_y:.2f}" x2="{width - MARGIN_RIGHT}" '
        f'y2="{zero_y:.2f}" stroke="#000" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{MARGIN_LEFT}" y="{height - 8}">joint action index (0..{n - 1})</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)
