"""Pure-Python implementations of the hot raster kernels.

Used when the compiled ``_ckernels`` extension is unavailable.  The two
backends implement the same algorithms and must agree bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

# Moore neighbourhood, clockwise on screen starting West: (drow, dcol).
DIRS = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
SQRT2 = math.sqrt(2.0)


def _find(parent: list[int], x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def _union(parent: list[int], a: int, b: int) -> int:
    ra, rb = _find(parent, a), _find(parent, b)
    if ra < rb:
        parent[rb] = ra
        return ra
    parent[ra] = rb
    return rb


def label(binary: np.ndarray, connectivity: int) -> tuple[np.ndarray, int]:
    """Two-pass union-find labeling; labels numbered by first raster encounter."""
    h, w = binary.shape
    img = binary.astype(bool).tolist()
    prov = [[0] * w for _ in range(h)]
    parent = [0]
    if connectivity == 8:
        back = ((-1, -1), (-1, 0), (-1, 1), (0, -1))
    else:
        back = ((-1, 0), (0, -1))
    for r in range(h):
        row = img[r]
        prow = prov[r]
        for c in range(w):
            if not row[c]:
                continue
            cur = 0
            for dr, dc in back:
                rr, cc = r + dr, c + dc
                if 0 <= rr and 0 <= cc < w:
                    n = prov[rr][cc]
                    if n:
                        cur = n if cur == 0 else _union(parent, cur, n)
            if cur == 0:
                cur = len(parent)
                parent.append(cur)
            prow[c] = cur

    final = [0] * len(parent)
    count = 0
    for r in range(h):
        prow = prov[r]
        for c in range(w):
            p = prow[c]
            if p:
                root = _find(parent, p)
                if final[root] == 0:
                    count += 1
                    final[root] = count
                prow[c] = final[root]
    return np.array(prov, dtype=np.int32).reshape(h, w), count


def trace_perimeter(labels: np.ndarray, lab: int, r0: int, c0: int, area: int) -> float:
    """Length of the outer Moore-neighbour contour of component ``lab``.

    ``(r0, c0)`` must be the component's first pixel in raster order.
    Straight steps count 1, diagonal steps sqrt(2); an isolated pixel has
    perimeter 4.
    """
    return _trace(labels.tolist(), lab, r0, c0, area)


def _trace(rows: list, lab: int, r0: int, c0: int, area: int) -> float:
    h, w = len(rows), len(rows[0])
    r, c = r0, c0
    back = 0
    first = None
    perim = 0.0
    for _ in range(16 * area + 64):
        found = -1
        for k in range(1, 9):
            idx = (back + k) & 7
            dr, dc = DIRS[idx]
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and rows[rr][cc] == lab:
                found = idx
                break
        if found < 0:
            return 4.0
        if first is None:
            first = (r, c, found)
        elif first == (r, c, found):
            return perim
        perim += SQRT2 if found & 1 else 1.0
        dr, dc = DIRS[found]
        r, c = r + dr, c + dc
        back = ((found >> 1) * 2 + 6) & 7
    raise RuntimeError(f"contour trace for label {lab} did not close")


def component_table(labels: np.ndarray, count: int):
    """Per-label area, bbox (r0, c0, r1, c1 inclusive) and contour length."""
    area = np.zeros(count, dtype=np.int64)
    bbox = np.zeros((count, 4), dtype=np.int64)
    perim = np.zeros(count, dtype=np.float64)
    if count == 0:
        return area, bbox, perim
    h, w = labels.shape
    start = [None] * count
    boxes = [[h, w, -1, -1] for _ in range(count)]
    areas = [0] * count
    rows = labels.tolist()
    for r in range(h):
        row = rows[r]
        for c in range(w):
            lab = row[c]
            if lab:
                i = lab - 1
                areas[i] += 1
                if start[i] is None:
                    start[i] = (r, c)
                b = boxes[i]
                if r < b[0]:
                    b[0] = r
                if c < b[1]:
                    b[1] = c
                if r > b[2]:
                    b[2] = r
                if c > b[3]:
                    b[3] = c
    area[:] = areas
    bbox[:] = boxes
    for i in range(count):
        r0, c0 = start[i]
        perim[i] = _trace(rows, i + 1, r0, c0, int(area[i]))
    return area, bbox, perim


def correlate_rows(padded: np.ndarray, k: np.ndarray, width: int) -> np.ndarray:
    """``out[r, c] = sum_i k[i] * padded[r, c + i]``, summed in tap order."""
    out = np.zeros((padded.shape[0], width))
    for i, wt in enumerate(k):
        out += wt * padded[:, i : i + width]
    return out
