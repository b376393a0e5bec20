"""Independent brute-force oracles used to validate the fast paths.

Everything here is deliberately naive: pure-Python loops, exhaustive
enumeration, and quadrature. None of it shares code with the package.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np


# -- geometry ---------------------------------------------------------------


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def brute_hull_vertices(points):
    """Hull vertex set by exhaustive triangle containment: a point survives
    unless it lies strictly inside some triangle of other points."""
    pts = list(dict.fromkeys((float(x), float(y)) for x, y in points))
    kept = []
    for p in pts:
        others = [q for q in pts if q != p]
        inside = False
        n = len(others)
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    a, b, c = others[i], others[j], others[k]
                    d1 = _cross(a, b, p)
                    d2 = _cross(b, c, p)
                    d3 = _cross(c, a, p)
                    if (d1 > 0 and d2 > 0 and d3 > 0) or (
                        d1 < 0 and d2 < 0 and d3 < 0
                    ):
                        inside = True
                        break
                if inside:
                    break
            if inside:
                break
        if not inside:
            kept.append(p)
    cx = sum(p[0] for p in kept) / len(kept)
    cy = sum(p[1] for p in kept) / len(kept)
    kept.sort(key=lambda p: math.atan2(p[1] - cy, p[0] - cx))
    return kept


def point_in_polygon(x, y, vertices):
    """Scalar even-odd crossing test; boundary points count as inside."""
    inside = False
    n = len(vertices)
    for k in range(n):
        x1, y1 = vertices[k]
        x2, y2 = vertices[(k + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if (
            cross == 0.0
            and min(x1, x2) <= x <= max(x1, x2)
            and min(y1, y2) <= y <= max(y1, y2)
        ):
            return True
        if (y1 > y) != (y2 > y):
            xint = (x2 - x1) * (y - y1) / (y2 - y1) + x1
            if x < xint:
                inside = not inside
    return inside


def rasterize_oracle(vertices, width, height):
    """Per-pixel application of the scalar point-in-polygon test."""
    grid = np.zeros((height, width), dtype=bool)
    for i in range(height):
        for j in range(width):
            grid[i, j] = point_in_polygon(j + 0.5, i + 0.5, vertices)
    return grid


def fit_score_oracle(pred, roi):
    """Brute-force pixel counting on boolean grids."""
    h, w = roi.shape
    covered = 0
    roi_count = 0
    for i in range(h):
        for j in range(w):
            if roi[i, j]:
                roi_count += 1
                if pred[i, j]:
                    covered += 1
    return 100.0 * covered / roi_count


# -- distribution functions --------------------------------------------------


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _simpson(f, a, b, n):
    if n % 2:
        n += 1
    h = (b - a) / n
    s = f(a) + f(b)
    for k in range(1, n):
        s += (4.0 if k % 2 else 2.0) * f(a + k * h)
    return s * h / 3.0


def normal_cdf_oracle(x):
    """Phi(x) by composite Simpson from 0 (step ~0.0005)."""
    if x == 0.0:
        return 0.5
    n = max(8, int(abs(x) / 0.0005))
    integral = _simpson(_phi, 0.0, abs(x), n)
    return 0.5 + integral if x > 0 else 0.5 - integral


def normal_cdf_grid_oracle(xs):
    """Vectorized Simpson accumulation of Phi over a sorted symmetric grid."""
    return np.array([normal_cdf_oracle(float(x)) for x in xs])


def _adaptive_simpson(f, a, b, eps, whole, fa, fb, fm, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
        return left + right + (left + right - whole) / 15.0
    return _adaptive_simpson(
        f, a, m, eps / 2.0, left, fa, fm, flm, depth - 1
    ) + _adaptive_simpson(f, m, b, eps / 2.0, right, fm, fb, frm, depth - 1)


def integrate(f, a, b, eps=1e-13):
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _adaptive_simpson(f, a, b, eps, whole, fa, fb, fm, 50)


def t_cdf_oracle(t, df):
    """Student-t CDF by adaptive quadrature of the density."""
    const = math.exp(
        math.lgamma((df + 1.0) / 2.0)
        - math.lgamma(df / 2.0)
        - 0.5 * math.log(df * math.pi)
    )

    def density(u):
        return const * (1.0 + u * u / df) ** (-(df + 1.0) / 2.0)

    if t == 0.0:
        return 0.5
    integral = integrate(density, 0.0, abs(t))
    return 0.5 + integral if t > 0 else 0.5 - integral


def two_sided_t_p_oracle(t, df):
    return 2.0 * t_cdf_oracle(-abs(t), df)


# -- correlation / trend / Welch ---------------------------------------------


def ranks_oracle(values):
    """Average ranks via stable sort and run grouping."""
    indexed = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(indexed):
        j = i
        while j + 1 < len(indexed) and values[indexed[j + 1]] == values[indexed[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[indexed[k]] = avg
        i = j + 1
    return ranks


def pearson_oracle(x, y):
    """Definitional covariance ratio with fsum; (r, p)."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if 1.0 - r * r <= 0.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, two_sided_t_p_oracle(t, n - 2)


def spearman_oracle(x, y):
    return pearson_oracle(ranks_oracle(list(x)), ranks_oracle(list(y)))


def mann_kendall_oracle(series):
    """All-pairs S, tie-corrected variance, continuity-corrected z, p."""
    x = list(series)
    n = len(x)
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            if x[j] > x[i]:
                s += 1
            elif x[j] < x[i]:
                s -= 1
    var = n * (n - 1) * (2 * n + 5)
    for _, t in Counter(x).items():
        if t > 1:
            var -= t * (t - 1) * (2 * t + 5)
    var /= 18.0
    if var <= 0:
        return s, 0.0, 0.0, 1.0
    if s > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    p = 2.0 * (1.0 - normal_cdf_oracle(abs(z)))
    return s, var, z, min(1.0, p)


def welch_oracle(before, after):
    """First-principles t, df, p for Welch's test (after minus before)."""

    def mean_var(sample):
        n = len(sample)
        m = math.fsum(sample) / n
        v = math.fsum((s - m) ** 2 for s in sample) / (n - 1)
        return n, m, v

    nb, mb, vb = mean_var(before)
    na, ma, va = mean_var(after)
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return t, df, two_sided_t_p_oracle(t, df)


# -- aggregation -------------------------------------------------------------


def counting_oracle(posts, blm_tags, celebrity_threshold):
    """Naive single-pass count of every aggregate field (mirrors nothing:
    written from the definitions)."""
    out = {
        "n_posts": 0,
        "n_faces": 0,
        "n_masked": 0,
        "n_group_posts": 0,
        "n_faces_in_groups": 0,
        "n_masked_in_groups": 0,
        "n_masked_posts": 0,
        "n_celebrity_posts": 0,
        "n_celebrity_masked_posts": 0,
        "n_blm_posts": 0,
    }
    bins = [0] * 10
    for post in posts:
        out["n_posts"] += 1
        masked_faces = [f for f in post.faces if f.mask_label.value == "masked"]
        out["n_faces"] += len(post.faces)
        out["n_masked"] += len(masked_faces)
        if len(post.faces) >= 2:
            out["n_group_posts"] += 1
            out["n_faces_in_groups"] += len(post.faces)
            out["n_masked_in_groups"] += len(masked_faces)
        if masked_faces:
            out["n_masked_posts"] += 1
        if post.like_count > celebrity_threshold:
            out["n_celebrity_posts"] += 1
            if masked_faces:
                out["n_celebrity_masked_posts"] += 1
        if set(post.tags) & set(blm_tags):
            out["n_blm_posts"] += 1
        for f in post.faces:
            if f.fit_score is not None:
                s = f.fit_score
                b = 0 if s <= 10 else math.ceil(s / 10.0) - 1
                bins[b] += 1
    out["bins"] = bins
    return out
