"""Regenerate the bundled 128x128 test image (``src/faustkit/data/shapes128.pgm``)."""

from pathlib import Path

import numpy as np

from faustkit.io import write_pgm


def make(size=128):
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    img = 60 + 90 * x + 40 * y
    img[(x - 0.3) ** 2 + (y - 0.3) ** 2 < 0.04] = 215
    img[(x - 0.72) ** 2 + (y - 0.65) ** 2 < 0.025] = 35
    img[(x > 0.55) & (x < 0.9) & (y > 0.1) & (y < 0.3)] = 180
    stripes = (x < 0.45) & (y > 0.62) & (y < 0.92)
    img[stripes] = 128 + 70 * np.sin(2 * np.pi * 6 * x[stripes])
    tri = (y > 0.45) & (y < 0.6) & (np.abs(x - 0.5) < (y - 0.45))
    img[tri] = 240
    return np.clip(np.rint(img), 0, 255)


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "faustkit" / "data" / "shapes128.pgm"
    write_pgm(out, make())
    print(out)
