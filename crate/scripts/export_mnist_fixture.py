"""Write a small MNIST subset as PGM files: <out>/{train,test}/<digit>/<n>.pgm.

Input is a .npy array of shape (N, 785) with pixels 0..255 followed by the label.
Ink is written dark on a white background.
"""
import sys
from pathlib import Path

import numpy as np


def main(src, out, classes=(0, 1, 2), n_train=60, n_test=20, seed=7):
    data = np.load(src)
    rng = np.random.default_rng(seed)
    out = Path(out)
    for c in classes:
        rows = np.flatnonzero(data[:, -1] == c)
        rng.shuffle(rows)
        for split, idx in (("train", rows[:n_train]), ("test", rows[n_train:n_train + n_test])):
            d = out / split / str(c)
            d.mkdir(parents=True, exist_ok=True)
            for k, r in enumerate(idx):
                img = 255 - data[r, :-1].reshape(28, 28).astype(np.uint8)
                (d / f"{k:03}.pgm").write_bytes(b"P5\n28 28\n255\n" + img.tobytes())


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
