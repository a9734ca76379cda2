"""Minimal deterministic SVG emitters for waveform traces and hand heatmaps."""

from __future__ import annotations

from .analysis import Heatmap
from .handmap import BACKGROUND, HandMap
from .waveform import WaveformSamples


def waveform_svg(w: WaveformSamples, path, title: str = "") -> None:
    """Step plot of a current trace (mA over ms)."""
    width, height, pad = 640, 360, 40
    n = len(w.samples)
    dt = 1000.0 / w.sample_rate_hz
    t_max = n * dt
    lo = min(0.0, min(w.samples))
    hi = max(0.0, max(w.samples))
    span = (hi - lo) or 1.0

    def sx(t):
        return pad + (width - 2 * pad) * t / t_max

    def sy(v):
        return pad + (height - 2 * pad) * (hi - v) / span

    pts = [f"{sx(0):.2f},{sy(0):.2f}"]
    for i, s in enumerate(w.samples):
        pts.append(f"{sx(i * dt):.2f},{sy(s):.2f}")
        pts.append(f"{sx((i + 1) * dt):.2f},{sy(s):.2f}")
    pts.append(f"{sx(t_max):.2f},{sy(0):.2f}")

    with open(path, "w") as f:
        f.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                f'height="{height}" viewBox="0 0 {width} {height}">\n')
        f.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
        f.write(f'<line x1="{pad}" y1="{sy(0):.2f}" x2="{width - pad}" '
                f'y2="{sy(0):.2f}" stroke="#999" stroke-width="1"/>\n')
        f.write(f'<polyline points="{" ".join(pts)}" fill="none" '
                f'stroke="#c0392b" stroke-width="2"/>\n')
        f.write(f'<text x="{pad}" y="{pad - 12}" font-size="14" '
                f'font-family="sans-serif">{title}</text>\n')
        f.write(f'<text x="{pad}" y="{height - 8}" font-size="11" '
                f'font-family="sans-serif">0 ms</text>\n')
        f.write(f'<text x="{width - pad - 40}" y="{height - 8}" font-size="11" '
                f'font-family="sans-serif">{t_max:g} ms</text>\n')
        f.write(f'<text x="4" y="{sy(hi) + 4:.2f}" font-size="11" '
                f'font-family="sans-serif">{hi:g} mA</text>\n')
        f.write(f'<text x="4" y="{sy(lo) + 4:.2f}" font-size="11" '
                f'font-family="sans-serif">{lo:g} mA</text>\n')
        f.write('</svg>\n')


def heatmap_svg(heatmap: Heatmap, handmap: HandMap, path,
                cell_px: int = 8, title: str = "") -> None:
    """Hand outline with linear count shading, black dots at each strongest
    point and a white dot at their mean coordinate."""
    h, w = heatmap.counts.shape
    width, height = w * cell_px, h * cell_px + 24
    top = 24
    peak = int(heatmap.counts.max()) or 1
    with open(path, "w") as f:
        f.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                f'height="{height}" viewBox="0 0 {width} {height}">\n')
        f.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
        f.write(f'<text x="4" y="16" font-size="14" '
                f'font-family="sans-serif">{title}</text>\n')
        for r in range(h):
            for c in range(w):
                on_hand = handmap.raster[r, c] != BACKGROUND
                count = heatmap.counts[r, c]
                if not on_hand and count == 0:
                    continue
                if count > 0:
                    alpha = count / peak
                    fill = f'fill="rgb(214,69,65)" fill-opacity="{alpha:.3f}"'
                else:
                    fill = 'fill="#eeeeee"'
                f.write(f'<rect x="{c * cell_px}" y="{top + r * cell_px}" '
                        f'width="{cell_px}" height="{cell_px}" {fill}/>\n')
        for r, c in heatmap.strongest_points:
            f.write(f'<circle cx="{(c + 0.5) * cell_px:.1f}" '
                    f'cy="{top + (r + 0.5) * cell_px:.1f}" r="{cell_px * 0.3:.1f}" '
                    f'fill="black"/>\n')
        mr, mc = heatmap.mean_strongest
        f.write(f'<circle cx="{(mc + 0.5) * cell_px:.1f}" '
                f'cy="{top + (mr + 0.5) * cell_px:.1f}" r="{cell_px * 0.45:.1f}" '
                f'fill="white" stroke="black" stroke-width="1"/>\n')
        f.write('</svg>\n')
