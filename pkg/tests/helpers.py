"""Independent oracles and synthetic data for the test suite.

Nothing here calls into the package's algorithms; the oracles are plain
Python re-statements of the definitions.
"""
import math

import numpy as np


# ---------------------------------------------------------------- oracles


def flood_fill_labels(mask):
    """Label 4-connected regions by explicit-stack flood fill, ids in raster order."""
    h, w = len(mask), len(mask[0])
    labels = [[0] * w for _ in range(h)]
    nxt = 0
    for i in range(h):
        for j in range(w):
            if mask[i][j] and not labels[i][j]:
                nxt += 1
                labels[i][j] = nxt
                stack = [(i, j)]
                while stack:
                    r, c = stack.pop()
                    for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                        if 0 <= rr < h and 0 <= cc < w and mask[rr][cc] and not labels[rr][cc]:
                            labels[rr][cc] = nxt
                            stack.append((rr, cc))
    return np.array(labels), nxt


def pixel_sets(mask):
    labels, n = flood_fill_labels(mask.tolist())
    return [
        {(int(r), int(c)) for r, c in zip(*np.nonzero(labels == k))}
        for k in range(1, n + 1)
    ]


def brute_force_counts(pred_sets, gt_sets, t):
    """(tp, fp, fn) by scanning every component pair."""
    matched_p, matched_g = set(), set()
    for i, a in enumerate(pred_sets):
        for j, b in enumerate(gt_sets):
            inter = len(a & b)
            if inter and inter / len(a | b) >= t:
                matched_p.add(i)
                matched_g.add(j)
    return len(matched_p), len(pred_sets) - len(matched_p), len(gt_sets) - len(matched_g)


def ki_criterion_loop(counts):
    """Kittler-Illingworth J(t) by direct two-pass class statistics; None where degenerate."""
    total = sum(counts)
    out = []
    for t in range(256):
        vals = []
        for lo, hi in ((0, t + 1), (t + 1, 256)):
            n = sum(counts[lo:hi])
            if n == 0:
                vals = None
                break
            mu = sum(i * counts[i] for i in range(lo, hi)) / n
            var = sum(counts[i] * (i - mu) ** 2 for i in range(lo, hi)) / n
            if var <= 0:
                vals = None
                break
            vals.append((n / total, var))
        if vals is None:
            out.append(None)
            continue
        (p1, v1), (p2, v2) = vals
        out.append(
            1 + 2 * (p1 * math.log(math.sqrt(v1)) + p2 * math.log(math.sqrt(v2)))
            - 2 * (p1 * math.log(p1) + p2 * math.log(p2))
        )
    return out


def yen_criterion_loop(counts):
    total = sum(counts)
    p = [c / total for c in counts]
    out = []
    for t in range(256):
        p1 = sum(p[: t + 1])
        p2 = sum(p[t + 1:])
        if p1 == 0 or p2 == 0 or sum(counts[: t + 1]) == 0 or sum(counts[t + 1:]) == 0:
            out.append(None)
            continue
        a = sum((x / p1) ** 2 for x in p[: t + 1])
        b = sum((x / p2) ** 2 for x in p[t + 1:])
        out.append(-math.log(a) - math.log(b))
    return out


def scan_optima(values, maximize=False, rel=1e-9):
    """All levels whose criterion equals the scanned optimum (empty-bin plateaus tie)."""
    finite = [v for v in values if v is not None]
    best = max(finite) if maximize else min(finite)
    tol = rel * max(1.0, abs(best))
    return [t for t, v in enumerate(values) if v is not None and abs(v - best) <= tol]


# ---------------------------------------------------------------- synthetic data


def random_mask(rng, shape=(64, 64), density=0.3):
    return rng.random(shape) < density


def blob_mask(rng, shape=(128, 128), n=12, rmin=2, rmax=7):
    """Random union of disks; gives objects of realistic size for matching tests."""
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    m = np.zeros(shape, dtype=bool)
    for _ in range(n):
        cy, cx = rng.uniform(0, shape[0]), rng.uniform(0, shape[1])
        r = rng.uniform(rmin, rmax)
        m |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return m


def jitter_mask(rng, mask, drop=0.3, shift=2):
    """Perturb a mask: drop some objects, shift others, add a few new ones."""
    from scipy import ndimage as ndi

    lab, n = ndi.label(mask, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    out = np.zeros_like(mask)
    for k in range(1, n + 1):
        if rng.random() < drop:
            continue
        obj = lab == k
        dy, dx = rng.integers(-shift, shift + 1, size=2)
        out |= np.roll(np.roll(obj, dy, axis=0), dx, axis=1)
    out |= blob_mask(rng, mask.shape, n=int(rng.integers(0, 4)))
    return out


def rod_mask(length, radius, angle_deg, shape=(200, 200), center=None, bend=0.0):
    """Pixel centers within ``radius`` of a (possibly bent) segment: a rasterised spherocylinder."""
    cy, cx = center if center is not None else (shape[0] / 2 + 0.3, shape[1] / 2 + 0.1)
    t = np.deg2rad(angle_deg)
    u = np.array([np.sin(t), np.cos(t)])  # along the rod, (row, col)
    v = np.array([np.cos(t), -np.sin(t)])
    half = length / 2 - radius
    s = np.linspace(-half, half, 801)
    spine = np.array([cy, cx]) + np.outer(s, u) + np.outer(bend * s**2, v)
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    pts = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(float)
    from scipy.spatial import cKDTree

    d, _ = cKDTree(spine).query(pts)
    return (d <= radius).reshape(shape)


def derive_union_size(rows, beta, tol, max_size=2000):
    """Every integer denominator reproducing each printed l_ex within ``tol``.

    ``rows`` holds (fp, fn, printed_l_ex). Solving each row for the
    denominator and intersecting the admissible integer ranges gives the
    object-union size the table was computed with.
    """
    return [
        u
        for u in range(1, max_size + 1)
        if all(abs((beta * fp + (1 - beta) * fn) / u - l) <= tol for fp, fn, l in rows)
    ]


def rectangle_mask(length, width, angle_deg, shape=(200, 200), center=None):
    """Pixel centers inside a rotated ``length`` x ``width`` rectangle."""
    cy, cx = center if center is not None else (shape[0] / 2 + 0.3, shape[1] / 2 + 0.1)
    t = np.deg2rad(angle_deg)
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    dy, dx = yy - cy, xx - cx
    along = dx * np.cos(t) + dy * np.sin(t)
    across = -dx * np.sin(t) + dy * np.cos(t)
    return (np.abs(along) < length / 2) & (np.abs(across) < width / 2)


def disk_mask(radius, shape=(80, 80), center=None):
    cy, cx = center if center is not None else (shape[0] / 2 + 0.3, shape[1] / 2 + 0.1)
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius


# ---------------------------------------------------------------- synthetic runs


def paste_rod(mask, length, radius, angle_deg, center, bend=0.0):
    """OR a rod into ``mask`` around ``center`` (row, col); works on a local window."""
    half = int(np.ceil(length / 2 + 3))
    r0, c0 = int(center[0]) - half, int(center[1]) - half
    local = rod_mask(
        length, radius, angle_deg, shape=(2 * half, 2 * half),
        center=(center[0] - r0, center[1] - c0), bend=bend,
    )
    mask[r0: r0 + 2 * half, c0: c0 + 2 * half] |= local
    return mask


def synthetic_frame(rng, shape=(256, 256), n_cells=6, spacing=64, max_clusters=2):
    """Well separated rods on a jittered grid plus clusters sitting inside them.

    Returns (cell_image, cell_mask, fluor_image, cluster_mask) with 16-bit
    images. Cells get 0..max_clusters clusters; the first cell always gets
    ``max_clusters`` so the database width is fixed.
    """
    cells = np.zeros(shape, dtype=bool)
    clusters = np.zeros(shape, dtype=bool)
    fluor = rng.normal(300, 20, shape)
    rows = (shape[0] - spacing // 2) // spacing
    cols = (shape[1] - spacing // 2) // spacing
    slots = [(i, j) for i in range(rows) for j in range(cols)]
    order = rng.permutation(len(slots))[:n_cells]
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    for k, s in enumerate(order):
        i, j = slots[s]
        cy = spacing * (i + 1) + rng.uniform(-3, 3)
        cx = spacing * (j + 1) + rng.uniform(-3, 3)
        length = rng.uniform(0.45, 0.7) * spacing
        radius = rng.uniform(4, 6)
        angle = rng.uniform(0, 180)
        before = cells.copy()
        paste_rod(cells, length, radius, angle, (cy, cx), bend=rng.uniform(-0.004, 0.004))
        body = cells & ~before
        fluor[body] += rng.uniform(400, 800)
        n_cl = max_clusters if k == 0 else int(rng.integers(0, max_clusters + 1))
        t = np.deg2rad(angle)
        for q in range(n_cl):
            s_ax = (-1) ** q * rng.uniform(0.15, 0.4) * length
            py, px = cy + s_ax * np.sin(t), cx + s_ax * np.cos(t)
            spot = ((yy - py) ** 2 + (xx - px) ** 2 <= 2.2**2) & body
            clusters |= spot
            fluor += 2500 * np.exp(-((yy - py) ** 2 + (xx - px) ** 2) / 4.0) * body
    cell_img = np.clip(rng.normal(1000, 30, shape) + 3000 * cells, 0, 65535).astype(np.uint16)
    fluor = np.clip(np.rint(fluor), 0, 65535).astype(np.uint16)
    return cell_img, cells, fluor, clusters


def write_synthetic_run(directory, seed=7, n_frames=3, shape=(256, 256), n_cells=6, spacing=64, config=None):
    """Write frame images, masks and a manifest.json under ``directory``; return the manifest path."""
    import json
    import os

    from PIL import Image

    rng = np.random.default_rng(seed)
    os.makedirs(directory, exist_ok=True)
    frames = []
    for f in range(n_frames):
        cell_img, cells, fluor, clusters = synthetic_frame(rng, shape, n_cells, spacing)
        names = {
            "cell_image": f"f{f}_cells.tif",
            "cell_mask": f"f{f}_cells_mask.png",
            "gfp": f"f{f}_gfp.tif",
            "gfp_mask": f"f{f}_gfp_mask.png",
        }
        Image.fromarray(cell_img).save(os.path.join(directory, names["cell_image"]))
        Image.fromarray(fluor).save(os.path.join(directory, names["gfp"]))
        Image.fromarray(cells.astype(np.uint8) * 255).save(os.path.join(directory, names["cell_mask"]))
        Image.fromarray(clusters.astype(np.uint8) * 255).save(os.path.join(directory, names["gfp_mask"]))
        frames.append(
            {
                "frame_id": f,
                "cell_image": names["cell_image"],
                "cell_mask": names["cell_mask"],
                "channels": [{"name": "gfp", "image": names["gfp"], "cluster_mask": names["gfp_mask"]}],
            }
        )
    manifest = {"frames": frames, "config": dict(config or {"pixel_size_um": 0.1})}
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return path
