"""Synthetic logic-state images of a register array and the bit-extraction pipeline.

Forward model: every register cell is a ``cell_h x cell_w`` tile holding two
Gaussian spots on one diagonal for a stored 1 and on the other diagonal for a
stored 0, plus a data-independent landmark spot at the tile centre (stands in
for the always-visible layout structure that registration locks onto).

Inverse: translation registration against a reference, adaptive Wiener
filtering, grid segmentation and template correlation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage, signal

Site = tuple[float, float]  # (row, col) inside the cell


@dataclass(frozen=True)
class ImagingConfig:
    cell_h: int = 16
    cell_w: int = 16
    sites1: tuple[Site, Site] = ((4.0, 4.0), (11.0, 11.0))
    sites0: tuple[Site, Site] = ((4.0, 11.0), (11.0, 4.0))
    blob_sigma: float = 1.5
    amplitude: float = 0.8
    landmark: Site | None = (7.5, 7.5)
    landmark_amplitude: float = 0.4
    landmark_sigma: float = 1.0
    background: float = 0.1
    noise_sigma: float = 0.0
    drift: tuple[int, int] = (0, 0)  # (dx, dy): content moves right / down
    alternate_flip: bool = False
    margin: int = 8  # field of view beyond the array, so drift keeps cells in frame

    def __post_init__(self) -> None:
        if self.cell_h < 8 or self.cell_w < 8:
            raise ValueError("cells must be at least 8x8 pixels")
        if self.noise_sigma < 0 or self.blob_sigma <= 0:
            raise ValueError("noise_sigma must be >= 0 and blob_sigma > 0")
        for r, c in (*self.sites1, *self.sites0):
            if not (0 <= r <= self.cell_h - 1 and 0 <= c <= self.cell_w - 1):
                raise ValueError(f"site {(r, c)} lies outside the cell")
        object.__setattr__(self, "drift", (int(self.drift[0]), int(self.drift[1])))

    def flipped(self, col: int) -> bool:
        return self.alternate_flip and col % 2 == 1


@dataclass(frozen=True)
class SnapshotImage:
    pixels: np.ndarray  # (H, W) float in [0, 1]
    grid_shape: tuple[int, int]


@dataclass(frozen=True)
class TemplatePair:
    mask0: np.ndarray
    mask1: np.ndarray

    def __post_init__(self) -> None:
        if self.mask0.shape != self.mask1.shape:
            raise ValueError("template masks differ in shape")
        if np.array_equal(self.mask0, self.mask1):
            raise ValueError("template masks are identical")


@dataclass(frozen=True)
class CellDecision:
    bit: int
    score0: float
    score1: float
    tie: bool


@dataclass(frozen=True)
class XcorrPeak:
    score: float
    offset: tuple[int, int]  # (dy, dx) of the template's origin inside the image


# -- forward model -------------------------------------------------------------


def _gauss(shape: tuple[int, int], centre: Site, sigma: float, amp: float) -> np.ndarray:
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]]
    return amp * np.exp(-((yy - centre[0]) ** 2 + (xx - centre[1]) ** 2) / (2 * sigma**2))


def cell_signal(bit: int, cfg: ImagingConfig, flipped: bool = False) -> np.ndarray:
    """Noise-free tile for one stored bit (before clipping)."""
    shape = (cfg.cell_h, cfg.cell_w)
    out = np.full(shape, cfg.background, dtype=np.float64)
    for site in cfg.sites1 if bit else cfg.sites0:
        out += _gauss(shape, site, cfg.blob_sigma, cfg.amplitude)
    if cfg.landmark is not None:
        out += _gauss(shape, cfg.landmark, cfg.landmark_sigma, cfg.landmark_amplitude)
    return out[:, ::-1].copy() if flipped else out


def shift_image(img: np.ndarray, dx: int, dy: int, fill: float) -> np.ndarray:
    """Integer translation; uncovered pixels get ``fill``."""
    h, w = img.shape
    out = np.full_like(img, fill)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src = img[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
    out[max(0, dy) : max(0, dy) + src.shape[0], max(0, dx) : max(0, dx) + src.shape[1]] = src
    return out


def render_snapshot(bits: np.ndarray, cfg: ImagingConfig, rng: np.random.Generator | None = None,
                    noise: np.ndarray | None = None) -> SnapshotImage:
    """Image of a bit grid. ``noise`` may supply a unit-variance field to
    reuse (it is scaled by ``noise_sigma``); otherwise ``rng`` draws one."""
    bits = np.asarray(bits).astype(np.uint8)
    if bits.ndim != 2 or bits.size == 0:
        raise ValueError("bits must be a non-empty 2-D grid")
    rows, cols = bits.shape
    h, w, mg = cfg.cell_h, cfg.cell_w, cfg.margin
    canvas = np.full((rows * h + 2 * mg, cols * w + 2 * mg), cfg.background)
    tiles = {(b, f): cell_signal(b, cfg, f) for b in (0, 1) for f in (False, True)}
    for j in range(cols):
        f = cfg.flipped(j)
        block = np.concatenate([tiles[(int(b), f)] for b in bits[:, j]], axis=0)
        canvas[mg : mg + rows * h, mg + j * w : mg + (j + 1) * w] = block
    canvas = shift_image(canvas, cfg.drift[0], cfg.drift[1], cfg.background)
    if cfg.noise_sigma > 0:
        if noise is None:
            if rng is None:
                raise ValueError("noisy rendering needs an rng or a noise field")
            noise = rng.standard_normal(canvas.shape)
        canvas = canvas + cfg.noise_sigma * noise
    return SnapshotImage(np.clip(canvas, 0.0, 1.0), (rows, cols))


def blob_integral(cfg: ImagingConfig, bit: int) -> float:
    """Analytic total intensity of one tile (untruncated Gaussians)."""
    spots = 2 * cfg.amplitude * 2 * np.pi * cfg.blob_sigma**2
    mark = cfg.landmark_amplitude * 2 * np.pi * cfg.landmark_sigma**2 if cfg.landmark else 0.0
    return cfg.background * cfg.cell_h * cfg.cell_w + spots + mark


# -- filtering and correlation --------------------------------------------------


def wiener2(img: np.ndarray, window: int = 3, eps: float = 1e-12) -> np.ndarray:
    """Pixel-wise adaptive Wiener filter with noise power estimated as the
    mean local variance."""
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    img = np.asarray(img, dtype=np.float64)
    mu = ndimage.uniform_filter(img, window, mode="reflect")
    var = np.maximum(ndimage.uniform_filter(img * img, window, mode="reflect") - mu * mu, 0.0)
    noise = var.mean()
    gain = np.maximum(var - noise, 0.0) / np.maximum(var, eps)
    return mu + gain * (img - mu)


def xcorr2(img: np.ndarray, template: np.ndarray, max_shift: int | None = None) -> XcorrPeak:
    """Plain (un-normalized) 2-D cross-correlation peak.

    Offsets run over every partial overlap, or ``|dy|, |dx| <= max_shift``.
    """
    img = np.asarray(img, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    th, tw = template.shape
    if th > img.shape[0] or tw > img.shape[1]:
        raise ValueError("template larger than image")
    full = signal.correlate(img, template, mode="full", method="direct")
    oy, ox = th - 1, tw - 1  # index of offset (0, 0)
    if max_shift is not None:
        lo_y, lo_x = oy - max_shift, ox - max_shift
        full = full[max(lo_y, 0) : oy + max_shift + 1, max(lo_x, 0) : ox + max_shift + 1]
        oy, ox = oy - max(lo_y, 0), ox - max(lo_x, 0)
    k = np.unravel_index(np.argmax(full), full.shape)
    return XcorrPeak(float(full[k]), (int(k[0] - oy), int(k[1] - ox)))


def batch_peak(cells: np.ndarray, mask: np.ndarray, max_shift: int) -> np.ndarray:
    """Correlation peak of every cell in ``cells`` (N, h, w) against ``mask``
    over offsets ``|dy|, |dx| <= max_shift`` (zero padding outside the cell)."""
    n, h, w = cells.shape
    s = max_shift
    padded = np.zeros((n, h + 2 * s, w + 2 * s))
    padded[:, s : s + h, s : s + w] = cells
    best = np.full(n, -np.inf)
    m = mask.astype(np.float64)
    for dy in range(-s, s + 1):
        for dx in range(-s, s + 1):
            window = padded[:, s + dy : s + dy + h, s + dx : s + dx + w]
            best = np.maximum(best, np.einsum("nij,ij->n", window, m))
    return best


def register_translation(img: SnapshotImage | np.ndarray, reference: SnapshotImage | np.ndarray,
                         max_shift: int | None = None) -> tuple[int, int]:
    """``(dx, dy)`` such that ``img`` is ``reference`` moved right/down by it."""
    a = img.pixels if isinstance(img, SnapshotImage) else np.asarray(img)
    b = reference.pixels if isinstance(reference, SnapshotImage) else np.asarray(reference)
    if a.shape != b.shape:
        raise ValueError("images differ in size")
    a = a - a.mean()
    b = b - b.mean()
    full = signal.correlate(a, b, mode="full", method="fft")
    oy, ox = b.shape[0] - 1, b.shape[1] - 1
    if max_shift is not None:
        full = full[oy - max_shift : oy + max_shift + 1, ox - max_shift : ox + max_shift + 1]
        oy = ox = max_shift
    k = np.unravel_index(np.argmax(full), full.shape)
    return int(k[1] - ox), int(k[0] - oy)


# -- templates and classification --------------------------------------------------


def build_templates(cell0: np.ndarray, cell1: np.ndarray, threshold: float = 0.5,
                    window: int = 3) -> TemplatePair:
    """Binary masks where the filtered difference of labeled exemplars is
    strongly positive (logic 1) or strongly negative (logic 0)."""
    cell0 = np.asarray(cell0, dtype=np.float64)
    cell1 = np.asarray(cell1, dtype=np.float64)
    if cell0.shape != cell1.shape:
        raise ValueError("exemplar cells differ in shape")
    if np.array_equal(cell0, cell1):
        raise ValueError("exemplars are identical; no discriminating signal")
    diff = wiener2(cell1 - cell0, window)
    peak = np.abs(diff).max()
    if peak == 0:
        raise ValueError("exemplars do not differ after filtering")
    return TemplatePair(mask0=diff < -threshold * peak, mask1=diff > threshold * peak)


def classify_cells(cells: np.ndarray, t: TemplatePair, flipped: np.ndarray | bool = False,
                   max_shift: int = 2) -> list[CellDecision]:
    cells = np.asarray(cells, dtype=np.float64)
    flipped = np.broadcast_to(np.asarray(flipped, dtype=bool), (cells.shape[0],))
    cells = np.where(flipped[:, None, None], cells[:, :, ::-1], cells)
    cells = cells - cells.mean(axis=(1, 2), keepdims=True)
    s0 = batch_peak(cells, t.mask0, max_shift)
    s1 = batch_peak(cells, t.mask1, max_shift)
    return [
        CellDecision(int(a > b), float(b), float(a), bool(a == b)) for a, b in zip(s1, s0)
    ]


def classify_cell(cell: np.ndarray, t: TemplatePair, flipped: bool = False,
                  max_shift: int = 2) -> CellDecision:
    """1 iff the logic-1 mask correlates more strongly than the logic-0 mask."""
    return classify_cells(np.asarray(cell)[None], t, flipped, max_shift)[0]


def segment(img: np.ndarray, grid_shape: tuple[int, int], cfg: ImagingConfig) -> np.ndarray:
    """Cut an aligned image into ``(rows*cols, cell_h, cell_w)`` tiles, row-major."""
    rows, cols = grid_shape
    h, w, mg = cfg.cell_h, cfg.cell_w, cfg.margin
    core = img[mg : mg + rows * h, mg : mg + cols * w]
    return core.reshape(rows, h, cols, w).transpose(0, 2, 1, 3).reshape(-1, h, w)


@dataclass
class Extraction:
    bits: np.ndarray
    decisions: list[CellDecision] = field(default_factory=list)
    shift: tuple[int, int] = (0, 0)


def layout_image(reference: SnapshotImage, cfg: ImagingConfig) -> np.ndarray:
    """Data-independent picture of the array: every cell replaced by the
    mirror-symmetrized mean cell.

    Mirroring swaps the two diagonals, so the result carries equal weight on
    the logic-0 and logic-1 sites whatever bits the reference holds. Registering
    against it removes the whole-cell aliasing a raw reference would cause.
    """
    rows, cols = reference.grid_shape
    h, w, mg = cfg.cell_h, cfg.cell_w, cfg.margin
    mean_tile = segment(reference.pixels, reference.grid_shape, cfg).mean(axis=0)
    mean_tile = 0.5 * (mean_tile + mean_tile[:, ::-1])
    out = reference.pixels.copy()
    out[mg : mg + rows * h, mg : mg + cols * w] = np.tile(mean_tile, (rows, cols))
    return out


def extract_bits(snap: SnapshotImage, t: TemplatePair, cfg: ImagingConfig,
                 reference: SnapshotImage, wiener_window: int | None = 3) -> Extraction:
    """Register, undo the drift, filter, segment and classify every cell."""
    if snap.pixels.shape != reference.pixels.shape or snap.grid_shape != reference.grid_shape:
        raise ValueError("snapshot and reference geometry differ")
    search = max(cfg.cell_h, cfg.cell_w)
    dx, dy = register_translation(snap.pixels, layout_image(reference, cfg), max_shift=search)
    if abs(dx) >= cfg.cell_w / 2 or abs(dy) >= cfg.cell_h / 2:
        raise ValueError(f"estimated drift {(dx, dy)} exceeds half a cell; registration unreliable")
    aligned = shift_image(snap.pixels, -dx, -dy, cfg.background)
    if wiener_window:
        aligned = wiener2(aligned, wiener_window)
    cells = segment(aligned, snap.grid_shape, cfg)
    rows, cols = snap.grid_shape
    flips = np.array([cfg.flipped(j) for _ in range(rows) for j in range(cols)])
    decisions = classify_cells(cells, t, flips)
    bits = np.array([dcs.bit for dcs in decisions], dtype=np.uint8).reshape(rows, cols)
    return Extraction(bits, decisions, (dx, dy))


def templates_from_reference(reference: SnapshotImage, bits: np.ndarray, cfg: ImagingConfig,
                             threshold: float = 0.5) -> TemplatePair:
    """Average the labeled cells of a drift-free reference image into exemplars."""
    bits = np.asarray(bits).astype(np.uint8)
    if bits.min() == bits.max():
        raise ValueError("reference needs both logic values")
    cells = segment(reference.pixels, reference.grid_shape, cfg)
    rows, cols = reference.grid_shape
    flips = np.array([cfg.flipped(j) for _ in range(rows) for j in range(cols)])
    cells = np.where(flips[:, None, None], cells[:, :, ::-1], cells)
    flat = bits.reshape(-1)
    return build_templates(cells[flat == 0].mean(axis=0), cells[flat == 1].mean(axis=0), threshold)


def bits_to_grid(bits: Sequence[int], cols: int) -> np.ndarray:
    """Lay a bit vector out row-major, zero-padding the last row."""
    bits = np.asarray(bits, dtype=np.uint8)
    rows = -(-bits.size // cols)
    grid = np.zeros(rows * cols, np.uint8)
    grid[: bits.size] = bits
    return grid.reshape(rows, cols)


def accuracy_sweep(noise_levels: Sequence[float], n_snapshots: int, cfg: ImagingConfig,
                   n_bits: int = 720, cols: int = 30, seed: int = 0) -> list[float]:
    """Extraction accuracy per noise level.

    Bits, drift-free reference and unit noise fields are drawn once per
    snapshot and reused at every level, so levels differ only in noise scale.
    """
    rng = np.random.default_rng(seed)
    grids = [bits_to_grid(rng.integers(0, 2, n_bits), cols) for _ in range(n_snapshots)]
    ref_bits = bits_to_grid(rng.integers(0, 2, n_bits), cols)
    clean_cfg = replace(cfg, noise_sigma=0.0, drift=(0, 0))
    reference = render_snapshot(ref_bits, clean_cfg)
    templates = templates_from_reference(reference, ref_bits, clean_cfg)
    shape = reference.pixels.shape
    fields = [rng.standard_normal(shape) for _ in range(n_snapshots)]
    out = []
    for sigma in noise_levels:
        level_cfg = replace(cfg, noise_sigma=float(sigma))
        correct = 0
        for grid, z in zip(grids, fields):
            snap = render_snapshot(grid, level_cfg, noise=z)
            try:
                got = extract_bits(snap, templates, level_cfg, reference).bits
            except ValueError:
                continue  # registration failure counts as zero correct bits
            correct += int((got == grid).sum())
        out.append(correct / (n_snapshots * grids[0].size))
    return out


# -- file formats ---------------------------------------------------------------


def write_pgm(img: np.ndarray, path: str | Path) -> None:
    """16-bit binary PGM (big-endian samples), values scaled from [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    data = np.round(np.clip(img, 0.0, 1.0) * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace before the raster
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(raw, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    return data.astype(np.float64) / maxval


def write_extraction_csv(ex: Extraction, path: str | Path) -> None:
    rows, cols = ex.bits.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "bit", "score0", "score1", "tie_flag"])
        for k, dec in enumerate(ex.decisions):
            r, c = divmod(k, cols)
            w.writerow([r, c, dec.bit, f"{dec.score0:.6f}", f"{dec.score1:.6f}", int(dec.tie)])
