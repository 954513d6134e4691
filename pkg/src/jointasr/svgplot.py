"""Byte-deterministic SVG line plots of result tables.

Hand-rolled SVG text keeps identical tables producing identical bytes,
with no raster or plotting-library dependence. X is the condition axis
(SNR ascending with inf rightmost, or channel count ascending with the
sine-wave condition last), y is mean CER with +-1 std whiskers.
"""

from .experiments import condition_sort_key

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 20, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_plot(rows, path):
    """Write one experiment's rows as an SVG line plot."""
    if len(rows) < 2:
        raise ValueError("need at least two conditions to plot a line")
    experiments = {r.experiment for r in rows}
    if len(experiments) != 1:
        raise ValueError(f"rows mix experiments: {sorted(experiments)}")
    experiment = experiments.pop()

    ordered = sorted(rows, key=lambda r: condition_sort_key(r.condition))
    y_max = max(r.cer_mean + r.cer_std for r in ordered)
    y_max = max(y_max, 1e-6)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def x_at(i):
        return MARGIN_L + plot_w * i / (len(ordered) - 1)

    def y_at(v):
        return MARGIN_T + plot_h * (1.0 - v / y_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
    ]
    for tick in _ticks(0.0, y_max):
        ty = y_at(tick)
        parts.append(
            f'<line x1="{MARGIN_L - 4}" y1="{_fmt(ty)}" x2="{MARGIN_L}" '
            f'y2="{_fmt(ty)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{_fmt(ty + 4)}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{tick:.2f}</text>'
        )
    points = []
    for i, r in enumerate(ordered):
        px, py = x_at(i), y_at(r.cer_mean)
        points.append(f"{_fmt(px)},{_fmt(py)}")
        y_lo, y_hi = y_at(max(r.cer_mean - r.cer_std, 0.0)), y_at(r.cer_mean + r.cer_std)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y_lo)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(y_hi)}" stroke="steelblue"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{HEIGHT - MARGIN_B + 18}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{r.condition}</text>'
        )
    parts.append(
        f'<polyline points="{" ".join(points)}" fill="none" stroke="steelblue" stroke-width="2"/>'
    )
    for i, r in enumerate(ordered):
        parts.append(
            f'<circle cx="{_fmt(x_at(i))}" cy="{_fmt(y_at(r.cer_mean))}" r="3" fill="steelblue"/>'
        )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif">{experiment} condition</text>'
    )
    parts.append(
        f'<text x="14" y="{HEIGHT // 2}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 14 {HEIGHT // 2})">mean CER</text>'
    )
    parts.append("</svg>")
    data = "\n".join(parts) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(data)
