#!/usr/bin/env python3
"""Regenerate the test photos, face tiles and reference annotations under assets/.

Needs numpy, scikit-image, matplotlib, scikit-learn (for their bundled sample
images) and an OpenCV 4.x build that still ships ``cv2.CascadeClassifier``.
OpenCV is only used as the reference detector that produces the annotation
files; nothing in the Rust workspace links against it.

    PYTHONPATH=/path/to/opencv4 python3 tools/make_assets.py
"""

import json
import os

import cv2
import matplotlib
import numpy as np
import skimage
import skimage.io as io
import sklearn

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "assets")
CASCADE = os.path.join(ROOT, "cascades", "haarcascade_frontalface_default.xml")
SK = os.path.join(os.path.dirname(skimage.__file__), "data")
MPL = os.path.join(matplotlib.get_data_path(), "sample_data")
SKL = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")

SCALE_FACTOR = 1.1
MIN_NEIGHBORS = 4


def gray(path):
    im = io.imread(path)
    if im.ndim == 3:
        im = cv2.cvtColor(np.ascontiguousarray(im[..., :3]), cv2.COLOR_RGB2GRAY)
    return np.ascontiguousarray(im.astype(np.uint8))


def shrink(img, max_side):
    h, w = img.shape
    s = max_side / max(h, w)
    if s >= 1.0:
        return img
    return cv2.resize(img, (round(w * s), round(h * s)), interpolation=cv2.INTER_AREA)


def write_pgm(path, img):
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def lfw_tile(lfw, idx, face=100, pad=40, fill=128):
    f = (lfw[idx] * 255).round().astype(np.uint8)
    big = cv2.resize(f, (face, face), interpolation=cv2.INTER_LINEAR)
    return cv2.copyMakeBorder(big, pad, pad, pad, pad, cv2.BORDER_CONSTANT, value=fill)


def paste(dst, src, x, y):
    h, w = src.shape
    dst[y : y + h, x : x + w] = src


def main():
    cc = cv2.CascadeClassifier(CASCADE)
    assert not cc.empty()
    os.makedirs(os.path.join(ROOT, "photos"), exist_ok=True)
    os.makedirs(os.path.join(ROOT, "faces"), exist_ok=True)
    os.makedirs(os.path.join(ROOT, "windows"), exist_ok=True)

    lfw = np.load(os.path.join(SK, "lfw_subset.npy"))
    astronaut = gray(os.path.join(SK, "astronaut.png"))
    hopper = gray(os.path.join(MPL, "grace_hopper.jpg"))

    # face crops lifted from the two real photos (reference rects + margin)
    def face_patch(img, size):
        (x, y, w, h), = cc.detectMultiScale(img, SCALE_FACTOR, MIN_NEIGHBORS)
        m = w // 2
        patch = img[max(0, y - m) : y + h + m, max(0, x - m) : x + w + m]
        return cv2.resize(patch, (size, size), interpolation=cv2.INTER_AREA)

    positives = {
        "astronaut": astronaut,
        "grace_hopper": hopper,
    }
    brick = gray(os.path.join(SK, "brick.png"))
    canvas = cv2.GaussianBlur(brick, (0, 0), 3)
    paste(canvas, face_patch(astronaut, 200), 150, 120)
    positives["astronaut_on_brick"] = canvas

    canvas = np.full((360, 480), 150, np.uint8)
    canvas[:, :] = np.linspace(90, 200, 480, dtype=np.float64).astype(np.uint8)[None, :]
    paste(canvas, face_patch(hopper, 160), 260, 80)
    positives["hopper_on_gradient"] = canvas

    canvas = np.full((240, 600), 128, np.uint8)
    for k, idx in enumerate([0, 1, 2]):
        paste(canvas, lfw_tile(lfw, idx), 10 + k * 195, 30)
    positives["lfw_group"] = canvas

    expected_faces = {name: 1 for name in positives}
    expected_faces["lfw_group"] = 3
    annotations = {}
    for name, img in positives.items():
        rects = cc.detectMultiScale(img, SCALE_FACTOR, MIN_NEIGHBORS)
        rects = sorted([list(map(int, r)) for r in rects])
        assert len(rects) == expected_faces[name], (name, rects)
        annotations[name] = rects
        write_pgm(os.path.join(ROOT, "photos", f"pos_{name}.pgm"), img)
        print("positive", name, img.shape, rects)

    negatives = {
        "brick": gray(os.path.join(SK, "brick.png")),
        "grass": gray(os.path.join(SK, "grass.png")),
        "gravel": gray(os.path.join(SK, "gravel.png")),
        "moon": gray(os.path.join(SK, "moon.png")),
        "text": gray(os.path.join(SK, "text.png")),
        "coffee": shrink(gray(os.path.join(SK, "coffee.png")), 512),
        "china": shrink(gray(os.path.join(SKL, "china.jpg")), 512),
        "hubble": shrink(gray(os.path.join(SK, "hubble_deep_field.jpg")), 512),
    }
    for name, img in negatives.items():
        rects = cc.detectMultiScale(img, SCALE_FACTOR, MIN_NEIGHBORS)
        assert len(rects) == 0, (name, rects)
        write_pgm(os.path.join(ROOT, "photos", f"neg_{name}.pgm"), img)
        print("negative", name, img.shape)

    with open(os.path.join(ROOT, "photos", "annotations.json"), "w") as f:
        json.dump(
            {
                "detector": f"opencv {cv2.__version__} detectMultiScale",
                "scale_factor": SCALE_FACTOR,
                "min_neighbors": MIN_NEIGHBORS,
                "positives": {f"pos_{k}.pgm": v for k, v in annotations.items()},
                "negatives": [f"neg_{k}.pgm" for k in negatives],
            },
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")

    # distinct identities for pipeline scenarios; each tile holds one face
    chosen = []
    for idx in range(0, 100):
        tile = lfw_tile(lfw, idx)
        if len(cc.detectMultiScale(tile, SCALE_FACTOR, MIN_NEIGHBORS)) == 1:
            chosen.append(idx)
        if len(chosen) == 8:
            break
    for k, idx in enumerate(chosen):
        write_pgm(os.path.join(ROOT, "faces", f"face{k}.pgm"), lfw_tile(lfw, idx))
    print("face tiles from lfw indices", chosen)

    # single 24x24 windows with the reference accept/reject decision
    rng = np.random.default_rng(7)
    windows, labels = [], []
    sources = list(positives.values()) + list(negatives.values())
    face_sources = [(img, r) for name, img in positives.items() for r in annotations[name]]
    while len(windows) < 600:
        if len(windows) % 3 == 0:
            img, (x, y, w, h) = face_sources[rng.integers(len(face_sources))]
            j = rng.uniform(-0.15, 0.15, size=3)
            s = int(round(w * (1 + j[2])))
            x0, y0 = int(round(x + j[0] * w)), int(round(y + j[1] * h))
        else:
            img = sources[rng.integers(len(sources))]
            s = int(rng.integers(24, min(img.shape) // 2))
            x0 = int(rng.integers(0, img.shape[1] - s))
            y0 = int(rng.integers(0, img.shape[0] - s))
        if x0 < 0 or y0 < 0 or x0 + s > img.shape[1] or y0 + s > img.shape[0]:
            continue
        win = cv2.resize(img[y0 : y0 + s, x0 : x0 + s], (24, 24), interpolation=cv2.INTER_AREA)
        hit = cc.detectMultiScale(win, SCALE_FACTOR, 0)
        windows.append(win)
        labels.append(bool(len(hit) == 1))
    write_pgm(os.path.join(ROOT, "windows", "windows_24.pgm"), np.vstack(windows))
    with open(os.path.join(ROOT, "windows", "windows_24.json"), "w") as f:
        json.dump({"window": 24, "accepted": labels}, f)
        f.write("\n")
    print("windows", len(labels), "accepted", sum(labels))


if __name__ == "__main__":
    main()
