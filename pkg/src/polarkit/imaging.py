"""Image containers, PFM/PNG I/O, filter-array demosaicing, normal encoding.

Images are numpy float64 arrays, row-major, shape (H, W) for single channel
or (H, W, 3) for color, linear intensities with nominal range [0, 1].
Integer PNG inputs are linearized by plain division by the type maximum
(no gamma); PFM carries raw floats.
"""

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

MOSAIC_LAYOUTS = {
    # angle (degrees) of each position in the 2x2 superpixel:
    # (top-left, top-right, bottom-left, bottom-right)
    "sony": (90, 45, 135, 0),
    "aligned": (0, 45, 90, 135),
}
DEFAULT_LAYOUT = MOSAIC_LAYOUTS["sony"]
POLAR_ANGLES_DEG = (0, 45, 90, 135)


def validate_image(arr, name="image"):
    """Check the ImageBuffer contract: finite, non-negative, 2-D or (H, W, 3)."""
    arr = np.asarray(arr)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] not in (1, 3)):
        raise ValueError(f"{name}: expected (H, W) or (H, W, 3) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite values")
    if np.any(arr < 0):
        raise ValueError(f"{name}: negative intensities")
    return arr


def to_luminance(arr):
    """Channel mean of a color image; single-channel images pass through."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 3:
        return arr.mean(axis=2)
    return arr


@dataclass
class PolarStack:
    """Four co-registered intensity images at polarizer angles 0/45/90/135 deg."""

    i0: np.ndarray
    i45: np.ndarray
    i90: np.ndarray
    i135: np.ndarray

    def __post_init__(self):
        shapes = {c.shape for c in self.channels()}
        if len(shapes) != 1:
            raise ValueError(f"polar stack channels disagree in shape: {sorted(shapes)}")
        for name, c in zip(("i0", "i45", "i90", "i135"), self.channels()):
            validate_image(c, name)

    def channels(self):
        return (self.i0, self.i45, self.i90, self.i135)

    @property
    def shape(self):
        return self.i0.shape

    def scaled(self, factor):
        return PolarStack(*(factor * c for c in self.channels()))


@dataclass
class RawMosaic:
    """Single-channel sensor frame with a 2x2 polarization filter array."""

    data: np.ndarray
    layout: tuple = DEFAULT_LAYOUT

    def __post_init__(self):
        self.data = validate_image(np.asarray(self.data, dtype=float), "mosaic")
        if self.data.ndim != 2:
            raise ValueError("mosaic must be single-channel")
        h, w = self.data.shape
        if h % 2 or w % 2:
            raise ValueError(f"mosaic dimensions must be even, got {w}x{h}")
        if sorted(self.layout) != sorted(POLAR_ANGLES_DEG):
            raise ValueError(f"layout must be a permutation of {POLAR_ANGLES_DEG}")


@dataclass
class NormalMap:
    """Per-pixel unit normals in camera coordinates (+z toward camera).

    vectors: (H, W, 3); valid: (H, W) bool. Invalid pixels are excluded
    from every reduction and carry no meaningful vector.
    """

    vectors: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 3 or self.vectors.shape[2] != 3:
            raise ValueError(f"normal map must be (H, W, 3), got {self.vectors.shape}")
        if self.valid is None:
            self.valid = np.ones(self.vectors.shape[:2], dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.vectors.shape[:2]:
            raise ValueError("validity mask shape does not match normal map")

    @property
    def shape(self):
        return self.vectors.shape[:2]

    def check_unit(self, tol=1e-6):
        norms = np.linalg.norm(self.vectors[self.valid], axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > tol:
            raise ValueError("normal map contains non-unit valid normals")


# ---------------------------------------------------------------------------
# PFM (portable float map): lossless float32 interchange, little-endian,
# scanlines stored bottom-to-top.
# ---------------------------------------------------------------------------

def write_pfm(path, arr):
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 2:
        header = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports (H, W) or (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")  # negative scale = little-endian
        f.write(arr[::-1].astype("<f4").tobytes())


def read_pfm(path):
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        endian = "<" if scale < 0 else ">"
        count = w * h * (3 if header == b"PF" else 1)
        data = np.frombuffer(f.read(count * 4), dtype=endian + "f4", count=count)
    shape = (h, w, 3) if header == b"PF" else (h, w)
    return data.reshape(shape)[::-1].astype(np.float64)


# ---------------------------------------------------------------------------
# PNG via Pillow: 8/16-bit integers normalized to [0, 1] on read.
# ---------------------------------------------------------------------------

def read_image(path):
    """Read PNG (8/16-bit, normalized) or PFM (raw floats)."""
    p = str(path)
    if p.lower().endswith(".pfm"):
        return read_pfm(p)
    with Image.open(p) as im:
        arr = np.asarray(im)
    if arr.dtype == np.uint8:
        out = arr.astype(np.float64) / 255.0
    elif arr.dtype in (np.uint16, np.int32):
        # Pillow reads 16-bit grayscale as mode "I" (int32)
        out = arr.astype(np.float64) / 65535.0
    else:
        out = arr.astype(np.float64)
    if out.ndim == 3 and out.shape[2] == 4:
        out = out[:, :, :3]
    return out


def write_png(path, arr, bits=8):
    """Write [0, 1] intensities as an 8- or 16-bit PNG."""
    arr = np.clip(np.asarray(arr, dtype=float), 0.0, 1.0)
    if bits == 8:
        q = np.round(arr * 255.0).astype(np.uint8)
        im = Image.fromarray(q, mode="RGB" if q.ndim == 3 else "L")
    elif bits == 16:
        if arr.ndim == 3:
            raise ValueError("16-bit PNG output is single-channel only")
        q = np.round(arr * 65535.0).astype(np.uint16)
        im = Image.fromarray(q)
    else:
        raise ValueError("bits must be 8 or 16")
    im.save(str(path))


def load_polar_stack(paths):
    """Load four files (angle order 0, 45, 90, 135 deg) into a PolarStack.

    Files must decode to identical dimensions; integer inputs are
    normalized to [0, 1].
    """
    if len(paths) != 4:
        raise ValueError(f"expected four paths (0/45/90/135), got {len(paths)}")
    images = []
    for p in paths:
        try:
            images.append(read_image(p))
        except OSError as e:
            raise OSError(f"cannot read polarization image {p}: {e}") from e
    ref_shape = images[0].shape
    for p, img in zip(paths, images):
        if img.shape != ref_shape:
            raise ValueError(
                f"dimension mismatch: {p} is {img.shape}, expected {ref_shape} from {paths[0]}"
            )
    return PolarStack(*images)


# ---------------------------------------------------------------------------
# Demosaicing: each angle is sampled on a 2x2-strided lattice and bilinearly
# interpolated back to full resolution (edge-clamped), so sample sites
# reproduce the raw values exactly.
# ---------------------------------------------------------------------------

def _upsample_axis(arr, offset, size, axis):
    """Linear interpolation from samples at offset::2 to 0..size-1 along axis."""
    arr = np.moveaxis(arr, axis, 0)  # samples first
    n = arr.shape[0]
    pos = offset + 2 * np.arange(n)
    t = np.arange(size)
    j = np.clip((t - offset) // 2, 0, n - 2 if n > 1 else 0)
    if n == 1:
        out = arr[np.zeros(size, dtype=int)]
    else:
        frac = np.clip((t - pos[j]) / 2.0, 0.0, 1.0)  # clamp beyond first/last sample
        frac = frac.reshape((size,) + (1,) * (arr.ndim - 1))
        out = (1.0 - frac) * arr[j] + frac * arr[np.minimum(j + 1, n - 1)]
    return np.moveaxis(out, 0, axis)


def demosaic(raw: RawMosaic) -> PolarStack:
    """Interpolate each polarizer-angle channel of a mosaic to full resolution."""
    h, w = raw.data.shape
    offsets = {}  # angle -> (row offset, col offset) of its sample lattice
    for pos, angle in enumerate(raw.layout):
        offsets[angle] = (pos // 2, pos % 2)
    channels = {}
    for angle in POLAR_ANGLES_DEG:
        oy, ox = offsets[angle]
        samples = raw.data[oy::2, ox::2]
        up = _upsample_axis(samples, oy, h, axis=0)
        up = _upsample_axis(up, ox, w, axis=1)
        channels[angle] = up
    return PolarStack(channels[0], channels[45], channels[90], channels[135])


# ---------------------------------------------------------------------------
# Normal-map encoding: v -> (v + 1)/2 per channel; invalid pixels -> (0,0,0).
# ---------------------------------------------------------------------------

def encode_normal_map(n: NormalMap) -> np.ndarray:
    img = (n.vectors + 1.0) * 0.5
    img[~n.valid] = 0.0
    return np.clip(img, 0.0, 1.0)


def write_normal_pfm(path, n: NormalMap):
    """Normals as raw 3-channel PFM; invalid pixels stored as zero vectors."""
    v = n.vectors.copy()
    v[~n.valid] = 0.0
    write_pfm(path, v)


def read_normal_pfm(path) -> NormalMap:
    v = read_pfm(path)
    if v.ndim != 3:
        raise ValueError(f"{path}: normal PFM must be 3-channel")
    norms = np.linalg.norm(v, axis=2)
    valid = norms > 0.5  # unit normals; zero vectors mark invalid pixels
    v = np.where(valid[..., None], v / np.where(norms, norms, 1.0)[..., None], 0.0)
    return NormalMap(v, valid)


def decode_normal_map(img, renormalize=True) -> NormalMap:
    """Inverse of encode_normal_map. Pixels encoded as (0,0,0) are invalid."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("encoded normal map must be (H, W, 3)")
    valid = ~np.all(img == 0.0, axis=2)
    v = img * 2.0 - 1.0
    if renormalize:
        norms = np.linalg.norm(v, axis=2, keepdims=True)
        v = np.where(norms > 0, v / np.where(norms > 0, norms, 1.0), v)
    v[~valid] = 0.0
    return NormalMap(v, valid)
