#!/usr/bin/env python3
"""Regenerates the bundled world files under scenarios/worlds."""

import json
import math
import pathlib
import sys

LABELS = ["grass", "sidewalk", "tree", "water"]
LEGEND = {"g": "grass", "s": "sidewalk", "t": "tree", "w": "water"}


class Canvas:
    def __init__(self, rows, cols, res):
        self.rows, self.cols, self.res = rows, cols, res
        self.cells = [["g"] * cols for _ in range(rows)]

    def rect(self, x0, y0, x1, y1, sym):
        """Fills cells whose centres lie in [x0, x1) x [y0, y1)."""
        for r in range(self.rows):
            y = (r + 0.5) * self.res
            if not (y0 <= y < y1):
                continue
            for c in range(self.cols):
                x = (c + 0.5) * self.res
                if x0 <= x < x1:
                    self.cells[r][c] = sym

    def disc(self, cx, cy, radius, sym):
        for r in range(self.rows):
            for c in range(self.cols):
                x, y = (c + 0.5) * self.res, (r + 0.5) * self.res
                if math.hypot(x - cx, y - cy) <= radius:
                    self.cells[r][c] = sym

    def cell(self, x, y):
        return [int(y / self.res), int(x / self.res)]

    def document(self, stop_signs=(), stop_zones=()):
        return {
            "rows": self.rows,
            "cols": self.cols,
            "resolution": self.res,
            "labels": LABELS,
            "obstacle_labels": ["tree", "water"],
            "legend": LEGEND,
            "grid": ["".join(row) for row in self.cells],
            "stop_signs": list(stop_signs),
            "stop_zones": list(stop_zones),
        }


def campus():
    # 100 m square: two sidewalks, scattered trees, a pond and a hedge with one
    # opening guarded by a stop sign.
    w = Canvas(200, 200, 0.5)
    w.rect(0, 30, 100, 32, "s")
    w.rect(60, 0, 62, 70, "s")
    for cx, cy, rad in [(20, 45, 3), (35, 15, 2.5), (45, 50, 3), (75, 20, 3), (85, 45, 2.5), (15, 60, 2)]:
        w.disc(cx, cy, rad, "t")
    w.disc(30, 85, 7, "w")
    w.rect(0, 70, 80, 72, "t")
    w.rect(85, 70, 100, 72, "t")
    zone = {"name": "hedge_gate", "cells": [[140, 160, 140, 169]]}
    return w.document([w.cell(82.5, 73)], [zone])


def hedge():
    # 120 m square at 0.6 m: a north-south hedge with a single-cell corridor.
    w = Canvas(200, 200, 0.6)
    for r in range(34, 200):
        if 99 <= r <= 101:
            continue
        w.cells[r][100] = "t"
        w.cells[r][101] = "t"
    return w.document()


def lawn():
    return Canvas(40, 40, 0.5).document()


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "scenarios/worlds")
    out.mkdir(parents=True, exist_ok=True)
    for name, doc in [("campus", campus()), ("hedge", hedge()), ("lawn", lawn())]:
        text = json.dumps(doc, indent=1)
        (out / f"{name}.json").write_text(text + "\n")


if __name__ == "__main__":
    main()
