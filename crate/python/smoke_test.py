"""Smoke test for the mlzoom extension module.

Build and install first:  pip install ./crates/python
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import mlzoom

CORPUS = Path(__file__).resolve().parent.parent / "crates/core/tests/data/corpus"


def radial(n):
    c = (n - 1) / 2
    rmax = math.hypot(c, c)
    px = bytes(
        int(255 * math.hypot(x - c, y - c) / rmax + 0.5)
        for y in range(n)
        for x in range(n)
    )
    return mlzoom.GrayImage(n, n, px)


def main():
    img = radial(64)
    assert (img.width, img.height) == (64, 64)

    levels = mlzoom.build_pyramid(img)
    assert [lv.width for lv in levels] == [64, 32, 16, 8, 4, 2, 1]
    assert levels[1] == img.block_average()

    pairs = mlzoom.extract_pairs(img)
    assert len(pairs) == (4**6 - 1) // 3
    tree = mlzoom.RegressionTree.fit(pairs)
    score = tree.score(pairs)
    assert score["r2_uniform"] > 0.95, score

    again = mlzoom.RegressionTree.from_json(tree.to_json())
    assert again.to_json() == tree.to_json()
    assert json.loads(tree.to_json())["format_version"] == 1

    back = tree.upscale_once(img).block_average()
    assert mlzoom.psnr(back, img) >= 40

    for factor, side in [(2, 128), (3, 192), (4, 256)]:
        out, report = mlzoom.upscale(img, factor)
        assert (out.width, out.height) == (side, side)
        assert report["n_samples"] == len(pairs)

    bicubic = mlzoom.resample(img, 2, "bicubic")
    assert bicubic.width == 128

    camera = mlzoom.load_image(CORPUS / "camera.png")
    records = mlzoom.roundtrip_eval(camera, 2, "camera")
    methods = [r["method"] for r in records]
    assert methods == ["bicubic", "bilinear", "ml", "ml_noblur", "nearest"], methods

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "out.pgm"
        mlzoom.save_image(img, path)
        assert mlzoom.load_image(path) == img

    try:
        mlzoom.GrayImage(3, 3, b"\x00" * 8)
    except ValueError:
        pass
    else:
        raise AssertionError("short pixel buffer accepted")

    for r in records:
        print(f"camera x2 {r['method']:<10} {r['psnr_db']:.2f} dB")
    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
