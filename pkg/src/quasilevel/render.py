"""Deterministic SVG figures: fixed 800x800 canvas, fixed palette, fixed number format."""
from __future__ import annotations

import hashlib
import math

import numpy as np

from .errors import UnrenderableRecordKind

SIZE = 800
MARGIN = 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
           "#bcbd22", "#7f7f7f", "#393b79", "#637939"]
GREY = "#b0b0b0"
INK = "#202020"


def _n(v):
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class Canvas:
    def __init__(self, title=""):
        self.parts = []
        self.title = title

    def add(self, s):
        self.parts.append(s)

    def path(self, pts, color, width=1.0, closed=False, dash=None):
        if len(pts) < 2:
            return
        d = "M" + " L".join(f"{_n(x)} {_n(y)}" for x, y in pts) + (" Z" if closed else "")
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="{_n(width)}"{extra}/>')

    def rect(self, x, y, w, h, fill, opacity=1.0):
        self.add(f'<rect x="{_n(x)}" y="{_n(y)}" width="{_n(w)}" height="{_n(h)}" fill="{fill}" '
                 f'fill-opacity="{_n(opacity)}"/>')

    def circle(self, x, y, r, fill):
        self.add(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="{_n(r)}" fill="{fill}"/>')

    def text(self, x, y, s, size=14, anchor="start"):
        s = str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self.add(f'<text x="{_n(x)}" y="{_n(y)}" font-family="monospace" font-size="{size}" '
                 f'text-anchor="{anchor}" fill="{INK}">{s}</text>')

    def svg(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
                f'viewBox="0 0 {SIZE} {SIZE}">')
        body = [head, f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/>']
        if self.title:
            body.append(f'<title>{self.title}</title>')
        return "\n".join(body + self.parts + ["</svg>", ""])


class _Map:
    """Data box -> canvas with equal or free aspect."""

    def __init__(self, lo, hi, equal=True):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        if equal:
            span[:] = span.max()
        self.lo, self.span = lo, span
        self.w = SIZE - 2 * MARGIN

    def __call__(self, P):
        P = np.atleast_2d(P)
        x = MARGIN + (P[:, 0] - self.lo[0]) / self.span[0] * self.w
        y = SIZE - MARGIN - (P[:, 1] - self.lo[1]) / self.span[1] * self.w
        return np.column_stack([x, y])


def label_color(label):
    if label is None:
        return GREY
    h = hashlib.sha256(repr(tuple(int(v) for v in label)).encode()).digest()
    return PALETTE[h[0] % len(PALETTE)]


def render_trajectories(trajs, title="level lines"):
    cv = Canvas(title)
    if not trajs:
        cv.text(SIZE / 2, SIZE / 2, "no trajectories", anchor="middle")
        return cv.svg()
    allv = np.vstack([np.asarray(t["vertices"], dtype=float) for t in trajs])
    m = _Map(allv.min(0), allv.max(0))
    for i, t in enumerate(trajs):
        v = np.asarray(t["vertices"], dtype=float)
        closed = bool(t["closed"])
        if closed and len(v) > 1 and np.allclose(v[0], v[-1]):
            v = v[:-1]
        cv.path(m(v), PALETTE[0] if closed else PALETTE[1], 1.2, closed=closed)
    cv.text(MARGIN, MARGIN / 2, title)
    return cv.svg()


def render_profile(p, title="c_t- and c_t+"):
    cv = Canvas(title)
    t = np.asarray(p["t"], dtype=float)
    lo = np.array([np.nan if v is None else v for v in p["lo"]], dtype=float)
    hi = np.array([np.nan if v is None else v for v in p["hi"]], dtype=float)
    fin = np.concatenate([lo[np.isfinite(lo)], hi[np.isfinite(hi)]])
    if not len(fin):
        cv.text(SIZE / 2, SIZE / 2, "no intervals", anchor="middle")
        return cv.svg()
    ylo, yhi = fin.min(), fin.max()
    pad = 0.1 * max(yhi - ylo, 1e-3)
    m = _Map([0.0, ylo - pad], [1.0, yhi + pad], equal=False)
    # stability zones: runs of one label
    labels = [None if l is None else tuple(l) for l in p["labels"]]
    dt = 1.0 / max(len(t), 1)
    i = 0
    while i < len(t):
        j = i
        while j + 1 < len(t) and labels[j + 1] == labels[i]:
            j += 1
        if labels[i] is not None:
            a = m([[t[i] - dt / 2 if i else 0.0, yhi + pad]])[0]
            b = m([[t[j] + dt / 2 if j + 1 < len(t) else 1.0, ylo - pad]])[0]
            cv.rect(max(a[0], MARGIN), a[1], min(b[0], SIZE - MARGIN) - max(a[0], MARGIN), b[1] - a[1],
                    label_color(labels[i]), 0.15)
        i = j + 1
    for arr, col in ((lo, PALETTE[0]), (hi, PALETTE[1])):
        ok = np.isfinite(arr)
        run = []
        for k in range(len(t)):
            if ok[k]:
                run.append((t[k], arr[k]))
            elif run:
                cv.path(m(run), col, 2.0)
                run = []
        if run:
            cv.path(m(run), col, 2.0)
    for key, col in (("min_hi", PALETTE[1]), ("max_lo", PALETTE[0])):
        v = p.get(key)
        if v is not None and math.isfinite(v):
            cv.path(m([[0.0, v], [1.0, v]]), col, 1.0, dash="6 4")
    cv.path(m([[0.0, ylo - pad], [1.0, ylo - pad]]), INK, 1.0)
    cv.path(m([[0.0, ylo - pad], [0.0, yhi + pad]]), INK, 1.0)
    cv.text(MARGIN, MARGIN / 2, f"{title}  case={p.get('case')}")
    cv.text(SIZE - MARGIN, SIZE - MARGIN / 3, "t", anchor="end")
    return cv.svg()


def render_zonemap(zm, title="stability zones"):
    """Two orthographic hemisphere disks (z >= 0 left, z < 0 right)."""
    cv = Canvas(title)
    r = (SIZE - 3 * MARGIN) / 4
    centres = [(MARGIN + r, SIZE / 2), (2 * MARGIN + 3 * r, SIZE / 2)]
    for cx, cy in centres:
        cv.add(f'<circle cx="{_n(cx)}" cy="{_n(cy)}" r="{_n(r)}" fill="none" stroke="{INK}" stroke-width="1.00"/>')
    n = max(len(zm["samples"]), 1)
    dot = max(0.8, min(4.0, 2.2 * r / math.sqrt(n)))
    for s in zm["samples"]:
        d = s["direction"]
        cx, cy = centres[0] if d[2] >= 0 else centres[1]
        kind = s["kind"]
        col = label_color(s["mu"]) if kind == "StableTCI" else (INK if kind in ("Skipped", "Missing") else GREY)
        cv.circle(cx + r * d[0], cy - r * d[1], dot, col)
    cv.text(MARGIN, MARGIN / 2, title)
    cv.text(centres[0][0], SIZE / 2 + r + 24, "z >= 0", anchor="middle")
    cv.text(centres[1][0], SIZE / 2 + r + 24, "z < 0", anchor="middle")
    return cv.svg()


def render_base(G, levels, title="f-bar on the base torus"):
    """Level lines of a periodic grid function, t horizontal, s vertical."""
    cv = Canvas(title)
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    m = _Map([0.0, 0.0], [1.0, 1.0])
    for k, c in enumerate(levels):
        col = PALETTE[k % len(PALETTE)]
        for i in range(n):
            for j in range(n):
                v = [G[i, j], G[i, (j + 1) % n], G[(i + 1) % n, (j + 1) % n], G[(i + 1) % n, j]]
                P = [(j, i), (j + 1, i), (j + 1, i + 1), (j, i + 1)]
                pts = []
                for e in range(4):
                    a, b = v[e] - c, v[(e + 1) % 4] - c
                    if (a > 0) != (b > 0):
                        s = a / (a - b)
                        pts.append(((P[e][0] + s * (P[(e + 1) % 4][0] - P[e][0])) / n,
                                    (P[e][1] + s * (P[(e + 1) % 4][1] - P[e][1])) / n))
                for q in range(0, len(pts) - 1, 2):
                    cv.path(m([pts[q], pts[q + 1]]), col, 1.0)
    cv.path(m([[0, 0], [1, 0], [1, 1], [0, 1]]), INK, 1.0, closed=True)
    cv.text(MARGIN, MARGIN / 2, title)
    return cv.svg()


def render_record(rec):
    """SVG for one result record (a ResultRecord or its JSON dict)."""
    d = rec.to_json() if hasattr(rec, "to_json") else rec
    op, p = d["operation"], d["payload"]
    if op == "trace":
        return render_trajectories(p["trajectories"], f"level c = {p['level']}")
    if op in ("profile4d",):
        return render_profile(p["profile"])
    if op == "zones":
        return render_zonemap(p["zonemap"])
    if op == "separator" and p.get("base_grid") is not None:
        return render_base(p["base_grid"], p["base_levels"])
    raise UnrenderableRecordKind(f"no figure for records of kind {op!r}")


def render(records):
    return [render_record(r) for r in records]
