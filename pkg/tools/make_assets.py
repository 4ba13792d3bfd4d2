"""Regenerate the committed grayscale test images under tests/assets/.

Sources come from scikit-image's bundled sample data, so this script needs
scikit-image installed.  It is a maintenance tool, not part of the package;
the generated PGM files are committed so the test suite has no dependency
on scikit-image.

512x512 sources are reduced to 256x256 by 2x2 block averaging to keep the
assets small and the acceptance runs fast.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from pglr.imgio import write_pgm

from skimage import data


ASSETS = pathlib.Path(__file__).resolve().parents[1] / "tests" / "assets"


def block_mean_2x2(img):
    h, w = img.shape
    h -= h % 2
    w -= w % 2
    v = img[:h, :w].astype(np.float64)
    return 0.25 * (v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2])


def prepare(img):
    out = img.astype(np.float64)
    if max(out.shape) > 384:
        out = block_mean_2x2(out)
    return out


def main():
    ASSETS.mkdir(parents=True, exist_ok=True)
    write_pgm(ASSETS / "camera_256.pgm", block_mean_2x2(data.camera()))
    for name in ("moon", "coins", "text", "brick", "grass", "page"):
        write_pgm(ASSETS / f"train_{name}.pgm", prepare(getattr(data, name)()))
    for path in sorted(ASSETS.glob("*.pgm")):
        print(path.name)


if __name__ == "__main__":
    main()
