"""File formats for pipeline artifacts.

All CSVs store floats as %.17g so a write/read round trip is bit-exact,
which is what makes running stages one at a time equivalent to running
them in one process.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

LABEL_NAMES = ("inlier", "class1", "class2")
LABEL_IDS = {name: i for i, name in enumerate(LABEL_NAMES)}


def save_matrix(path: str | Path, arr: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(arr, dtype=np.float64)), fmt="%.17g", delimiter=",")


def load_matrix(path: str | Path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def save_meta(path: str | Path, entries: dict) -> None:
    lines = [f"{key}={value}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_meta(path: str | Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def save_truth(path: str | Path, angles: np.ndarray, shifts: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("angle,shift,label\n")
        for a, s, lab in zip(angles, shifts, labels):
            fh.write(f"{a:.17g},{s:.17g},{LABEL_NAMES[int(lab)]}\n")


def load_truth(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    angles, shifts, labels = [], [], []
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "angle,shift,label":
            raise ValueError(f"{path}: not a truth table")
        for line in fh:
            a, s, lab = line.strip().split(",")
            angles.append(float(a))
            shifts.append(float(s))
            labels.append(LABEL_IDS[lab])
    return np.array(angles), np.array(shifts), np.array(labels, dtype=np.int64)


def save_clusters(path: str | Path, assignments: np.ndarray, discarded: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("assignment,discarded\n")
        for a, d in zip(assignments, discarded):
            fh.write(f"{int(a)},{int(bool(d))}\n")


def load_clusters(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    return data[:, 0], data[:, 1].astype(bool)


def save_poses(path: str | Path, poses) -> None:
    """Poses as CSV with angles in degrees (shifts stay in bins)."""
    with open(path, "w") as fh:
        fh.write("angle_deg,shift\n")
        for pose in poses:
            fh.write(f"{np.rad2deg(pose.angle):.17g},{pose.shift:.17g}\n")


def load_poses(path: str | Path):
    from .core import Pose

    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    return [Pose(np.deg2rad(a), s) for a, s in data]


def save_pgm(path: str | Path, image: np.ndarray) -> None:
    """16-bit big-endian binary PGM plus a `<path>.scale` sidecar.

    The sidecar records the linear scale as `scale=<min>,<max>` so the
    float image can be recovered from the integer samples.
    """
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        quant = np.round((image - lo) / (hi - lo) * 65535.0)
    else:
        quant = np.zeros_like(image)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n65535\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(quant.astype(">u2").tobytes())
    Path(f"{path}.scale").write_text(f"scale={lo:.17g},{hi:.17g}\n")


def load_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = fh.readline().split()
        maxval = int(fh.readline())
        w, h = int(dims[0]), int(dims[1])
        raw = np.frombuffer(fh.read(w * h * 2), dtype=">u2").reshape(h, w)
    scale_text = Path(f"{path}.scale").read_text().strip()
    lo, hi = (float(v) for v in scale_text.removeprefix("scale=").split(","))
    return lo + raw.astype(np.float64) / maxval * (hi - lo)
