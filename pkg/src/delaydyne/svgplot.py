"""Minimal self-contained SVG line plots (log-log axes)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ["#0173b2", "#de8f05", "#029e73", "#d55e00", "#cc78bc", "#ca9161", "#949494",
           "#56b4e9"]


@dataclass
class Series:
    label: str
    x: list
    y: list
    markers: bool = True
    dash: str | None = None
    color: str | None = None


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    width: int = 640
    height: int = 440

    def add(self, *args, **kwargs) -> None:
        self.series.append(Series(*args, **kwargs))

    def _points(self):
        for s in self.series:
            for x, y in zip(s.x, s.y):
                if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y):
                    yield x, y

    def render(self) -> str:
        pts = list(self._points())
        left, right, top, bottom = 80, 170, 40, 60
        pw, ph = self.width - left - right, self.height - top - bottom
        if pts:
            lx0 = math.floor(math.log10(min(p[0] for p in pts)))
            lx1 = math.ceil(math.log10(max(p[0] for p in pts)))
            ly0 = math.floor(math.log10(min(p[1] for p in pts)))
            ly1 = math.ceil(math.log10(max(p[1] for p in pts)))
        else:
            lx0, lx1, ly0, ly1 = 0, 1, 0, 1
        lx1 = max(lx1, lx0 + 1)
        ly1 = max(ly1, ly0 + 1)

        def sx(x):
            return left + (math.log10(x) - lx0) / (lx1 - lx0) * pw

        def sy(y):
            return top + ph - (math.log10(y) - ly0) / (ly1 - ly0) * ph

        out = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
            'font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="13">'
            f'{escape(self.title)}</text>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        ]
        for e in range(lx0, lx1 + 1):
            x = sx(10.0 ** e)
            out.append(f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" y2="{top + ph}" '
                       'stroke="#dddddd"/>')
            out.append(f'<text x="{x:.1f}" y="{top + ph + 16}" text-anchor="middle">1e{e}</text>')
        for e in range(ly0, ly1 + 1):
            y = sy(10.0 ** e)
            out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" '
                       'stroke="#dddddd"/>')
            out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
        out.append(f'<text x="{left + pw / 2:.1f}" y="{self.height - 18}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>')

        for i, s in enumerate(self.series):
            color = s.color or PALETTE[i % len(PALETTE)]
            xy = [(sx(x), sy(y)) for x, y in zip(s.x, s.y)
                  if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
            if len(xy) > 1:
                path = " ".join(f"{x:.1f},{y:.1f}" for x, y in xy)
                dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                           f'stroke-width="1.5"{dash}/>')
            if s.markers:
                out.extend(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2.5" fill="{color}"/>'
                           for x, y in xy)
            ly = top + 12 + 16 * i
            lx = left + pw + 12
            dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
            out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" '
                       f'stroke-width="1.5"{dash}/>')
            out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
