"""Independent reference implementations used as test oracles.

None of these import the code under test; they re-derive results by brute
force or in exact arithmetic.
"""
from __future__ import annotations

import heapq
import math
from fractions import Fraction


class QSqrt2:
    """Exact number a + b*sqrt(2) with rational a, b."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    def __add__(self, other):
        return QSqrt2(self.a + other.a, self.b + other.b)

    def __sub__(self, other):
        return QSqrt2(self.a - other.a, self.b - other.b)

    def sign(self) -> int:
        a, b = self.a, self.b
        if a >= 0 and b >= 0:
            return 0 if a == 0 and b == 0 else 1
        if a <= 0 and b <= 0:
            return -1
        # opposite signs: compare a^2 with 2 b^2
        lhs, rhs = a * a, 2 * b * b
        if lhs == rhs:
            return 0
        return (1 if a > 0 else -1) if lhs > rhs else (1 if b > 0 else -1)

    def __eq__(self, other):
        return (self - other).sign() == 0

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __hash__(self):
        return hash((self.a, self.b))

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(2.0)

    def __repr__(self):
        return f"QSqrt2({self.a}, {self.b})"


def exact_edge(cost, a, b) -> QSqrt2:
    (ax, ay), (bx, by) = a, b
    mean = (Fraction(float(cost[ay][ax])) + Fraction(float(cost[by][bx]))) / 2
    if ax != bx and ay != by:
        return QSqrt2(0, mean)
    return QSqrt2(mean, 0)


def exact_path_cost(cells, cost) -> QSqrt2:
    total = QSqrt2()
    for a, b in zip(cells, cells[1:]):
        total = total + exact_edge(cost, a, b)
    return total


def dijkstra_exact(cost, lethal, start, goal):
    """Exact optimal 8-connected path cost, or None when the goal is unreachable.

    Edge weight: move length (1 or sqrt 2) times the mean endpoint cost.
    ``cost`` and ``lethal`` are indexed [y][x].
    """
    h, w = len(cost), len(cost[0])
    if lethal[start[1]][start[0]] or lethal[goal[1]][goal[0]]:
        return None
    dist = {start: QSqrt2()}
    done = set()
    heap = [(dist[start], 0, start)]
    counter = 0
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            return d
        ux, uy = u
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == dy == 0:
                    continue
                v = (ux + dx, uy + dy)
                if not (0 <= v[0] < w and 0 <= v[1] < h) or lethal[v[1]][v[0]] or v in done:
                    continue
                nd = d + exact_edge(cost, u, v)
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    counter += 1
                    heapq.heappush(heap, (nd, counter, v))
    return None


def debounce_oracle(readings, threshold: float, required: int) -> list:
    """Fires at i when readings[i-required+1..i] all exceed threshold and that
    window does not overlap the window of the previous firing."""
    fired = []
    last = -10 ** 9
    for i in range(len(readings)):
        window = readings[max(0, i - required + 1): i + 1]
        ok = (len(window) == required and all(r > threshold for r in window)
              and i - last >= required)
        if ok:
            last = i
        fired.append(ok)
    return fired


def servo_residuals(bearing: float, steps: int, f: float, px_half: float = 320.0,
                    angle_half: float = math.pi / 6) -> list:
    """Residual bearing after each incremental pan update for a pinhole camera."""
    out = []
    r = bearing
    for _ in range(steps):
        px = f * math.tan(r)
        r = r - angle_half / px_half * px
        out.append(r)
    return out


def unicycle_fine(x, y, theta, v, w, dt, n=20000):
    """Midpoint-rule integration of the unicycle model with ``n`` substeps."""
    h = dt / n
    for _ in range(n):
        tm = theta + 0.5 * w * h
        x += v * h * math.cos(tm)
        y += v * h * math.sin(tm)
        theta += w * h
    return x, y, theta


def brute_clearance(occ, resolution: float):
    """Distance from each cell center to the nearest occupied cell center, by exhaustive search."""
    h, w = len(occ), len(occ[0])
    pts = [(i, j) for j in range(h) for i in range(w) if occ[j][i]]
    out = [[math.inf] * w for _ in range(h)]
    for j in range(h):
        for i in range(w):
            if pts:
                out[j][i] = resolution * min(math.hypot(i - a, j - b) for a, b in pts)
    return out


def token_overlap_oracle(utterance: str, intents) -> object:
    """Best intent name by max-over-phrases token overlap (earlier wins ties), or None below 0.5."""
    import re
    toks = set(re.findall(r"[a-z0-9']+", utterance.lower()))
    best, best_s = None, -1.0
    for name, phrases in intents:
        s = 0.0
        for p in phrases:
            pt = set(re.findall(r"[a-z0-9']+", p.lower()))
            if pt:
                s = max(s, len(toks & pt) / len(pt))
        if s > best_s:
            best, best_s = name, s
    return best if best_s >= 0.5 else None


def dwa_oracle(x, y, theta, v0, w0, target, clear, origin, resolution, p):
    """Brute-force DWA choice: explicit loops over the sampled window, step-by-step arcs.

    ``p`` is a dict with dt, a_max, alpha_max, v_max, w_max, v_samples, w_samples,
    sim_time, sim_dt, radius, w_goal, w_vel, w_clear, clearance_max.
    Returns (v, w) of the best admissible sample, or None if every rollout collides.
    """
    v_lo = max(0.0, v0 - p["a_max"] * p["dt"])
    v_hi = min(p["v_max"], v0 + p["a_max"] * p["dt"])
    w_lo = max(-p["w_max"], w0 - p["alpha_max"] * p["dt"])
    w_hi = min(p["w_max"], w0 + p["alpha_max"] * p["dt"])
    nv, nw = p["v_samples"], p["w_samples"]
    h, wd = len(clear), len(clear[0])

    def lookup(px, py):
        i = math.floor((px - origin[0]) / resolution)
        j = math.floor((py - origin[1]) / resolution)
        return clear[j][i] if 0 <= i < wd and 0 <= j < h else 0.0

    d0 = lookup(x, y)
    best = None
    steps = round(p["sim_time"] / p["sim_dt"])
    for a in range(nv):
        v = v_lo + (v_hi - v_lo) * a / (nv - 1)
        for b in range(nw):
            w = w_lo + (w_hi - w_lo) * b / (nw - 1)
            ok = True
            dmin = math.inf
            px = py = pth = None
            for k in range(1, steps + 1):
                t = k * p["sim_dt"]
                if abs(w) < 1e-9:
                    px, py, pth = x + v * t * math.cos(theta), y + v * t * math.sin(theta), theta
                else:
                    pth = theta + w * t
                    px = x + v / w * (math.sin(pth) - math.sin(theta))
                    py = y - v / w * (math.cos(pth) - math.cos(theta))
                d = lookup(px, py)
                dmin = min(dmin, d)
                if d <= p["radius"] and (d0 > p["radius"] or d < d0):
                    ok = False
            if not ok:
                continue
            ang = math.atan2(target[1] - py, target[0] - px) - pth
            ang = abs(math.atan2(math.sin(ang), math.cos(ang)))
            score = (p["w_goal"] * (1 - ang / math.pi) + p["w_vel"] * v / p["v_max"]
                     + p["w_clear"] * min(dmin, p["clearance_max"]) / p["clearance_max"])
            key = (-round(score, 12), abs(w), v)
            if best is None or key < best[0]:
                best = (key, v, w)
    return None if best is None else (best[1], best[2])
