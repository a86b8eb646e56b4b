"""Two-phase marker detection.

Phase one finds square-looking dark outlines: adaptive threshold, outer
border following on each dark component, a 4-vertex polygon fit and
geometric filters. Phase two rectifies each candidate through a homography,
reads the cell grid and matches it against the dictionary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from boomtrack.fiducial.dictionary import MarkerDictionary
from boomtrack.frames import Frame, gray_array

# clockwise neighbour offsets (drow, dcol) in image orientation, starting west
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


@dataclass(frozen=True)
class DetectorParams:
    threshold_window: int = 15
    threshold_offset: float = 7.0
    min_perimeter: float = 40.0
    max_approx_error: float = 0.03  # fraction of perimeter
    min_corner_distance: float = 10.0
    min_aspect: float = 0.3  # shortest side / longest side
    min_edge_contrast: float = 15.0  # gray levels, outside minus inside the outline
    border_black_fraction: float = 0.85
    cell_samples: int = 5
    cell_margin: float = 0.3  # sampled span inside each cell is [margin, 1 - margin]
    refine_corners: bool = True


DEFAULT_PARAMS = DetectorParams()


@dataclass(frozen=True, eq=False)
class Candidate:
    """A convex quadrilateral, corners clockwise in image coordinates."""

    corners: np.ndarray
    perimeter: float

    @property
    def center(self) -> np.ndarray:
        return self.corners.mean(axis=0)


@dataclass(frozen=True, eq=False)
class MarkerObservation:
    id: int
    corners: np.ndarray  # (4, 2), clockwise from the decoded top-left corner
    hamming_corrections: int
    rotation: int = 0
    center: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.corners, dtype=float)
        object.__setattr__(self, "corners", c)
        object.__setattr__(self, "center", c.mean(axis=0))

    def bbox(self) -> tuple[float, float, float, float]:
        """Axis-aligned ``(cx, cy, w, h)`` enclosing the corners."""
        lo = self.corners.min(axis=0)
        hi = self.corners.max(axis=0)
        return (
            float((lo[0] + hi[0]) / 2),
            float((lo[1] + hi[1]) / 2),
            float(hi[0] - lo[0]),
            float(hi[1] - lo[1]),
        )


class RejectReason(enum.Enum):
    DEGENERATE_HOMOGRAPHY = "degenerate homography"
    BORDER = "border ring not dark enough"
    NO_CODE = "no code within correction radius"


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    detail: str = ""

    def __bool__(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# phase one: candidates
# ---------------------------------------------------------------------------


def adaptive_threshold(gray: np.ndarray, window: int, offset: float) -> np.ndarray:
    """Dark mask: sample below its local window mean minus ``offset``."""
    mean = ndimage.uniform_filter(gray, size=window, mode="nearest")
    return gray < mean - offset


def trace_outer_boundary(mask: np.ndarray) -> np.ndarray:
    """Moore-neighbour border following of the component containing the first
    foreground pixel in raster order. Returns ``(row, col)`` pairs, clockwise."""
    fg = np.argwhere(mask)
    if len(fg) == 0:
        return np.empty((0, 2), dtype=int)
    h, w = mask.shape
    start = (int(fg[0][0]), int(fg[0][1]))
    cur, back = start, 0  # entered from the west, which is background
    out = [start]
    first_state = None
    while True:
        for i in range(1, 9):
            d = (back + i) % 8
            r, c = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if 0 <= r < h and 0 <= c < w and mask[r, c]:
                p = _MOORE[(back + i - 1) % 8]
                prev = (cur[0] + p[0] - r, cur[1] + p[1] - c)
                nxt, back = (r, c), _MOORE_INDEX[prev]
                break
        else:
            return np.array(out)  # isolated pixel
        state = (cur, nxt)
        if first_state is None:
            first_state = state
        elif state == first_state:
            out.pop()
            return np.array(out)
        cur = nxt
        out.append(cur)


def _polygon_perimeter(pts: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())


def _point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def _fit_quad(contour: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Pick 4 contour points spanning the outline; returns (corners, their indices)."""
    c = contour.mean(axis=0)
    i0 = int(np.argmax(np.linalg.norm(contour - c, axis=1)))
    i2 = int(np.argmax(np.linalg.norm(contour - contour[i0], axis=1)))
    a, b = contour[i0], contour[i2]
    ab = b - a
    side = ab[0] * (contour[:, 1] - a[1]) - ab[1] * (contour[:, 0] - a[0])
    if side.max() <= 0 or side.min() >= 0:
        return None
    i1 = int(np.argmax(side))
    i3 = int(np.argmin(side))
    idx = np.array(sorted({i0, i1, i2, i3}))
    if len(idx) != 4:
        return None
    return contour[idx], idx


def order_clockwise(corners: np.ndarray) -> np.ndarray:
    """Clockwise on screen (y down), starting from the corner nearest the top-left."""
    c = corners.mean(axis=0)
    ang = np.arctan2(corners[:, 1] - c[1], corners[:, 0] - c[0])
    ordered = corners[np.argsort(ang)]  # increasing angle is clockwise when y points down
    start = int(np.argmin(ordered[:, 0] + ordered[:, 1]))
    return np.roll(ordered, -start, axis=0)


def _is_convex(q: np.ndarray) -> bool:
    cross = []
    for i in range(4):
        a, b, c = q[i], q[(i + 1) % 4], q[(i + 2) % 4]
        cross.append((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]))
    cross = np.array(cross)
    return bool(np.all(cross > 0) or np.all(cross < 0))


def _line_intersection(l1: tuple[np.ndarray, np.ndarray], l2: tuple[np.ndarray, np.ndarray]) -> np.ndarray | None:
    p, d = l1
    q, e = l2
    m = np.array([[d[0], -e[0]], [d[1], -e[1]]])
    if abs(np.linalg.det(m)) < 1e-9:
        return None
    t = np.linalg.solve(m, q - p)
    return p + t[0] * d


def _sample(gray: np.ndarray, xy: np.ndarray) -> np.ndarray:
    """Bilinear samples at continuous ``(x, y)`` points (pixel centers at +0.5)."""
    coords = np.vstack([xy[:, 1] - 0.5, xy[:, 0] - 0.5])
    return ndimage.map_coordinates(gray, coords, order=1, mode="nearest")


def _refine_corners(gray: np.ndarray, quad: np.ndarray) -> np.ndarray:
    """Sub-pixel corners from intensity edges.

    Each side is probed along its outward normal for the mid-level crossing
    between the dark outline and the light surround; a total-least-squares
    line through the crossings replaces the coarse side, and adjacent lines
    are intersected.
    """
    center = quad.mean(axis=0)
    side_len = min(np.linalg.norm(quad[(i + 1) % 4] - quad[i]) for i in range(4))
    reach = float(np.clip(side_len / 16.0, 1.5, 3.0))
    offsets = np.arange(reach, -reach - 1e-9, -0.25)  # outside -> inside
    lines = []
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        d = (b - a) / np.linalg.norm(b - a)
        n = np.array([d[1], -d[0]])
        if n @ ((a + b) / 2 - center) < 0:
            n = -n
        length = np.linalg.norm(b - a)
        ts = np.linspace(0.15, 0.85, int(np.clip(length * 0.7, 4, 40)))
        base = a[None] + ts[:, None] * (b - a)[None]
        probe = base[:, None, :] + offsets[None, :, None] * n[None, None, :]
        prof = _sample(gray, probe.reshape(-1, 2)).reshape(len(ts), len(offsets))
        pts = []
        for k in range(len(ts)):
            pr = prof[k]
            lo, hi = pr.min(), pr.max()
            if hi - lo < 20:
                continue
            level = (lo + hi) / 2
            below = np.nonzero(pr < level)[0]
            if len(below) == 0 or below[0] == 0:
                continue
            j = below[0]
            f = (pr[j - 1] - level) / (pr[j - 1] - pr[j])
            s = offsets[j - 1] + f * (offsets[j] - offsets[j - 1])
            pts.append(base[k] + s * n)
        if len(pts) < 3:
            # coarse outline runs through boundary pixel centers, half a pixel inside
            lines.append((a + 0.5 * n, d))
            continue
        pts = np.array(pts)
        m = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - m)
        lines.append((m, vt[0]))
    out = []
    for i in range(4):
        p = _line_intersection(lines[(i - 1) % 4], lines[i])
        if p is None or np.linalg.norm(p - quad[i]) > 3.0:
            return quad
        out.append(p)
    return np.array(out)


def _edge_contrast_ok(gray: np.ndarray, quad: np.ndarray, min_contrast: float) -> bool:
    """Outline must be dark inside and light outside along most of its length.

    Rejects outlines traced around light regions, such as the background
    ring enclosing a marker's white quiet zone.
    """
    center = quad.mean(axis=0)
    diffs = []
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        d = (b - a) / np.linalg.norm(b - a)
        n = np.array([d[1], -d[0]])
        if n @ ((a + b) / 2 - center) < 0:
            n = -n
        ts = np.linspace(0.2, 0.8, 8)
        base = a[None] + ts[:, None] * (b - a)[None] + 0.5 * n[None]
        inner = _sample(gray, base - 1.5 * n[None])
        outer = _sample(gray, base + 1.5 * n[None])
        diffs.append(outer - inner)
    diffs = np.concatenate(diffs)
    return bool(np.mean(diffs >= min_contrast) >= 0.75)


def _contains(quad: np.ndarray, pts: np.ndarray) -> np.ndarray:
    inside = np.ones(len(pts), dtype=bool)
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= cross >= 0
    return inside


def find_candidates(f: Frame, params: DetectorParams = DEFAULT_PARAMS) -> list[Candidate]:
    gray = gray_array(f)
    h, w = gray.shape
    dark = adaptive_threshold(gray, params.threshold_window, params.threshold_offset)
    labels, _ = ndimage.label(dark, structure=np.ones((3, 3), dtype=bool))
    found: list[Candidate] = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        r0, r1, c0, c1 = sl[0].start, sl[0].stop, sl[1].start, sl[1].stop
        if 2 * ((r1 - r0) + (c1 - c0)) < params.min_perimeter:
            continue
        if r0 == 0 or c0 == 0 or r1 == h or c1 == w:
            continue  # clipped by the frame edge
        mask = np.pad(labels[sl] == lab, 1)
        mask = ndimage.binary_fill_holes(mask)
        boundary = trace_outer_boundary(mask)
        if len(boundary) < 8:
            continue
        # (row, col) of padded mask -> continuous (x, y) of pixel centers
        contour = np.column_stack([boundary[:, 1] + c0 - 1 + 0.5, boundary[:, 0] + r0 - 1 + 0.5])
        perimeter = _polygon_perimeter(contour)
        if perimeter < params.min_perimeter:
            continue
        fit = _fit_quad(contour)
        if fit is None:
            continue
        quad, _ = fit
        quad = order_clockwise(quad)
        err = np.min(
            np.stack([_point_segment_distance(contour, quad[i], quad[(i + 1) % 4]) for i in range(4)]),
            axis=0,
        ).max()
        if err > params.max_approx_error * perimeter:
            continue
        if not _is_convex(quad):
            continue
        if not _edge_contrast_ok(gray, quad, params.min_edge_contrast):
            continue
        sides = np.linalg.norm(np.roll(quad, -1, axis=0) - quad, axis=1)
        if sides.min() / sides.max() < params.min_aspect:
            continue
        pair = [np.linalg.norm(quad[i] - quad[j]) for i in range(4) for j in range(i + 1, 4)]
        if min(pair) < params.min_corner_distance:
            continue
        if params.refine_corners:
            quad = _refine_corners(gray, quad)
            if not _is_convex(quad):
                continue
        found.append(Candidate(quad, _polygon_perimeter(quad)))

    # markers never nest, and near-duplicate outlines collapse to the larger one
    found.sort(key=lambda c: (-c.perimeter, c.center[0], c.center[1]))
    kept: list[Candidate] = []
    for cand in found:
        redundant = False
        for big in kept:
            if np.all(_contains(big.corners, cand.corners)):
                redundant = True
                break
            if np.mean(np.linalg.norm(big.corners - cand.corners, axis=1)) < params.min_corner_distance:
                redundant = True
                break
        if not redundant:
            kept.append(cand)
    kept.sort(key=lambda c: (c.center[1], c.center[0]))
    return kept


# ---------------------------------------------------------------------------
# phase two: decoding
# ---------------------------------------------------------------------------


def homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Direct linear solve from exactly four correspondences (h33 fixed to 1)."""
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * i], rhs[2 * i + 1] = u, v
    if not np.all(np.isfinite(a)) or np.linalg.cond(a) > 1e12:
        return None
    hvec = np.linalg.solve(a, rhs)
    return np.append(hvec, 1.0).reshape(3, 3)


def apply_homography(hmat: np.ndarray, pts: np.ndarray) -> np.ndarray:
    p = np.column_stack([pts, np.ones(len(pts))]) @ hmat.T
    return p[:, :2] / p[:, 2:3]


def otsu_threshold(values: np.ndarray) -> float:
    hist = np.bincount(np.clip(np.rint(values), 0, 255).astype(int), minlength=256).astype(float)
    total = hist.sum()
    levels = np.arange(256)
    w0 = np.cumsum(hist)
    w1 = total - w0
    s0 = np.cumsum(hist * levels)
    mu0 = np.divide(s0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(s0[-1] - s0, w1, out=np.zeros(256), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return float(np.argmax(between)) + 0.5


def read_cells(gray: np.ndarray, corners: np.ndarray, n: int, params: DetectorParams) -> np.ndarray | Rejection:
    """Binarized ``n x n`` cell matrix (1 = light) of the rectified quad."""
    canon = np.array([[0, 0], [n, 0], [n, n], [0, n]], dtype=float)
    hmat = homography(canon, corners)
    if hmat is None:
        return Rejection(RejectReason.DEGENERATE_HOMOGRAPHY)
    k = params.cell_samples
    offs = np.linspace(params.cell_margin, 1 - params.cell_margin, k)
    ou, ov = np.meshgrid(offs, offs)
    cols, rows = np.meshgrid(np.arange(n), np.arange(n))
    u = (cols[:, :, None] + ou.ravel()[None, None, :]).ravel()
    v = (rows[:, :, None] + ov.ravel()[None, None, :]).ravel()
    img_pts = apply_homography(hmat, np.column_stack([u, v]))
    if not np.all(np.isfinite(img_pts)):
        return Rejection(RejectReason.DEGENERATE_HOMOGRAPHY)
    vals = _sample(gray, img_pts)
    thr = otsu_threshold(vals)
    light = (vals > thr).reshape(n, n, k * k)
    return (light.sum(axis=2) * 2 > k * k).astype(np.uint8)


def decode_candidate(
    f: Frame,
    quad: Candidate | np.ndarray,
    d: MarkerDictionary,
    params: DetectorParams = DEFAULT_PARAMS,
    *,
    _gray: np.ndarray | None = None,
) -> MarkerObservation | Rejection:
    corners = quad.corners if isinstance(quad, Candidate) else np.asarray(quad, dtype=float)
    gray = gray_array(f) if _gray is None else _gray
    n = d.grid + 2
    cells = read_cells(gray, corners, n, params)
    if isinstance(cells, Rejection):
        return cells
    ring = np.concatenate([cells[0], cells[-1], cells[1:-1, 0], cells[1:-1, -1]])
    black = 1.0 - ring.mean()
    if black < params.border_black_fraction:
        return Rejection(RejectReason.BORDER, f"{black:.0%} of border cells dark")
    marker_id, rot, dist = d.match(cells[1:-1, 1:-1])
    if dist > d.correction_radius:
        return Rejection(RejectReason.NO_CODE, f"nearest code {marker_id} at distance {dist}")
    # the code's top-left cell shows up at canonical corner (4 - rot) % 4
    start = (4 - rot) % 4
    ordered = np.roll(corners, -start, axis=0)
    return MarkerObservation(marker_id, ordered, dist, rot)


def detect_markers(f: Frame, d: MarkerDictionary, params: DetectorParams = DEFAULT_PARAMS) -> list[MarkerObservation]:
    """All decoded markers in ``f``; at most one per id (fewest corrections wins)."""
    gray = gray_array(f)
    best: dict[int, MarkerObservation] = {}
    for cand in find_candidates(f, params):
        obs = decode_candidate(f, cand, d, params, _gray=gray)
        if isinstance(obs, Rejection):
            continue
        prev = best.get(obs.id)
        if prev is None or obs.hamming_corrections < prev.hamming_corrections:
            best[obs.id] = obs
    return [best[k] for k in sorted(best)]
