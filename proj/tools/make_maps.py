#!/usr/bin/env python3
"""Regenerates the bundled 50 m x 50 m occupancy maps (0.25 m cells)."""

import argparse
import pathlib

import numpy as np

RES = 0.25
SIZE = 50.0
N = int(SIZE / RES)


def empty():
    grid = np.zeros((N, N), dtype=bool)  # [row=y, col=x], True = occupied
    return grid


def fill_rect(grid, x0, y0, x1, y1):
    c0, c1 = int(round(x0 / RES)), int(round(x1 / RES))
    r0, r1 = int(round(y0 / RES)), int(round(y1 / RES))
    grid[max(r0, 0):min(r1, N), max(c0, 0):min(c1, N)] = True


def border(grid):
    fill_rect(grid, 0, 0, SIZE, 0.5)
    fill_rect(grid, 0, SIZE - 0.5, SIZE, SIZE)
    fill_rect(grid, 0, 0, 0.5, SIZE)
    fill_rect(grid, SIZE - 0.5, 0, SIZE, SIZE)


def structured():
    g = empty()
    border(g)
    for y in (16.0, 33.5):
        fill_rect(g, 0, y, 12, y + 0.5)
        fill_rect(g, 16, y, 34, y + 0.5)
        fill_rect(g, 38, y, SIZE, y + 0.5)
    for x in (16.0, 33.5):
        fill_rect(g, x, 0, x + 0.5, 10)
        fill_rect(g, x, 40, x + 0.5, SIZE)
    for cx, cy in ((8, 25), (42, 25), (25, 8), (25, 42)):
        fill_rect(g, cx - 1, cy - 1, cx + 1, cy + 1)
    for x0, y0, x1, y1 in ((20, 19, 21, 23), (29, 27, 30, 31), (4, 38, 9, 39), (41, 11, 46, 12)):
        fill_rect(g, x0, y0, x1, y1)
    return g


def unstructured(seed=11):
    rng = np.random.default_rng(seed)
    g = empty()
    border(g)
    ys, xs = (np.mgrid[0:N, 0:N] + 0.5) * RES
    keep_clear = [(25, 25, 5.0), (4, 4, 4.0), (46, 4, 4.0), (4, 46, 4.0), (46, 46, 4.0)]
    placed = 0
    while placed < 45:
        cx, cy = rng.uniform(2, SIZE - 2, size=2)
        r = rng.uniform(0.5, 2.0)
        if any(np.hypot(cx - kx, cy - ky) < kr + r for kx, ky, kr in keep_clear):
            continue
        g |= (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
        placed += 1
    return g


def to_text(grid):
    lines = [f"{N} {N} {RES} 0 0"]
    for row in range(N):
        lines.append("".join("#" if v else "." for v in grid[row]))
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", type=pathlib.Path)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "structured.txt").write_text(to_text(structured()))
    (args.out_dir / "unstructured.txt").write_text(to_text(unstructured()))
    open_map = empty()
    border(open_map)
    (args.out_dir / "open.txt").write_text(to_text(open_map))


if __name__ == "__main__":
    main()
