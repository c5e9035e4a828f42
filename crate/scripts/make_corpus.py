"""Regenerate the bundled grayscale test corpus from scikit-image sample data.

All source images are public domain / CC0 (see the scikit-image data README).
Each output is an 8-bit grayscale PNG; RGB sources are converted with
Rec.601 weights, and larger sources are 2x area-averaged before cropping.
"""
import os
import sys

import numpy as np
from PIL import Image
import skimage.data as data

OUT = sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data/corpus"


def gray(a):
    if a.ndim == 3:
        a = a[..., :3].astype(np.float64) @ np.array([0.299, 0.587, 0.114])
        a = np.floor(a + 0.5)
    return a.astype(np.float64)


def halve(a):
    h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
    a = a[:h, :w]
    return np.floor((a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2]) / 4 + 0.5)


def crop(a, size=256):
    h, w = a.shape
    y0, x0 = (h - size) // 2, (w - size) // 2
    return a[y0:y0 + size, x0:x0 + size]


SOURCES = {
    "astronaut": lambda: halve(gray(data.astronaut())),
    "camera": lambda: halve(gray(data.camera())),
    "chelsea": lambda: crop(gray(data.chelsea())),
    "coffee": lambda: crop(halve(gray(data.coffee())), 192),
    "moon": lambda: halve(gray(data.moon())),
    "coins": lambda: crop(gray(data.coins())),
}

os.makedirs(OUT, exist_ok=True)
for name, make in SOURCES.items():
    img = np.clip(make(), 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="L").save(os.path.join(OUT, f"{name}.png"))
    print(name, img.shape)
