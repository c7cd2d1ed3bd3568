"""Pixel kernels for the 21 augmentation transforms, cropping, and image I/O.

Images are ``uint8`` arrays of shape ``(height, width, 3)``. Every kernel
returns a new array and leaves its input untouched. Photometric math runs
in float64 on channels normalized to [0, 1] and is quantized back to 8 bits
with round-half-up; geometric kernels resample bilinearly and fill pixels
that map outside the source with mid-gray.
"""

import enum
import math

import numpy as np

from .errors import ParameterError
from .rng import as_generator

FILL = 128 / 255.0

# ITU-R BT.601 luma weights, also used by PIL's "L" conversion.
LUMA = np.array([0.299, 0.587, 0.114])


class TransformKind(enum.Enum):
    # value: (name, subset, magnitude range, identity-like endpoint)
    SAMPLE_PAIRING = ("sample_pairing", "color", (0.0, 0.2), 0.0)
    GAUSS_NOISE = ("gauss_noise", "color", (0.0, 0.2), 0.0)
    SATURATION = ("saturation", "color", (0.6, 1.4), 1.0)
    CONTRAST = ("contrast", "color", (0.6, 1.4), 1.0)
    BRIGHTNESS = ("brightness", "color", (0.6, 1.4), 1.0)
    SHARPNESS = ("sharpness", "color", (0.6, 1.4), 1.0)
    COLOR_CASTING = ("color_casting", "color", (-30.0, 30.0), 0.0)
    EQUALIZE = ("equalize", "color", None, None)
    EQUALIZE_YUV = ("equalize_yuv", "color", None, None)
    POSTERIZE = ("posterize", "color", (0.0, 3.0), 3.0)
    AUTOCONTRAST = ("autocontrast", "color", None, None)
    SOLARIZE = ("solarize", "color", (128.0, 255.0), 255.0)
    VIGNETTING = ("vignetting", "color", (0.0, 0.6), 0.0)
    ROTATE = ("rotate", "shape", (-40.0, 40.0), 0.0)
    FLIP = ("flip", "shape", None, None)
    SHEAR_X = ("shear_x", "shape", (-15.0, 15.0), 0.0)
    SHEAR_Y = ("shear_y", "shape", (-15.0, 15.0), 0.0)
    DISTORTION = ("distortion", "shape", (0.0, 0.6), 0.0)
    SCALE = ("scale", "shape", (0.8, 1.2), 1.0)
    SCALE_DIFF = ("scale_diff", "shape", (0.8, 1.2), 1.0)
    CUTOUT = ("cutout", "shape", (0.0, 50.0), 0.0)

    def __init__(self, label, subset, magnitude_range, identity):
        self.label = label
        self.subset = subset
        self.magnitude_range = magnitude_range
        self.identity = identity

    @classmethod
    def from_label(cls, label):
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ParameterError(f"unknown transform {label!r}") from None

    @property
    def has_magnitude(self):
        return self.magnitude_range is not None

    @property
    def two_sided(self):
        lo, hi = self.magnitude_range
        return lo < self.identity < hi


COLOR_KINDS = tuple(k for k in TransformKind if k.subset == "color")
SHAPE_KINDS = tuple(k for k in TransformKind if k.subset == "shape")

# Hard limits used when magnitudes are extrapolated past the nominal range.
_DOMAIN = {
    TransformKind.SAMPLE_PAIRING: (0.0, 1.0),
    TransformKind.GAUSS_NOISE: (0.0, math.inf),
    TransformKind.SATURATION: (0.0, math.inf),
    TransformKind.CONTRAST: (0.0, math.inf),
    TransformKind.BRIGHTNESS: (0.0, math.inf),
    TransformKind.SHARPNESS: (0.0, math.inf),
    TransformKind.COLOR_CASTING: (-255.0, 255.0),
    TransformKind.POSTERIZE: (0.0, 8.0),
    TransformKind.SOLARIZE: (0.0, 255.0),
    TransformKind.VIGNETTING: (0.0, 1.0),
    TransformKind.ROTATE: (-360.0, 360.0),
    TransformKind.SHEAR_X: (-89.0, 89.0),
    TransformKind.SHEAR_Y: (-89.0, 89.0),
    TransformKind.DISTORTION: (0.0, math.inf),
    TransformKind.SCALE: (1e-3, math.inf),
    TransformKind.SCALE_DIFF: (1e-3, 2.0 - 1e-3),
    TransformKind.CUTOUT: (0.0, math.inf),
}


def magnitude_domain(kind, extrapolate=False):
    if not kind.has_magnitude:
        return None
    return _DOMAIN[kind] if extrapolate else kind.magnitude_range


def check_image(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ParameterError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ParameterError(f"expected uint8 pixels, got {img.dtype}")
    return img


def to_float(img):
    return img.astype(np.float64) / 255.0


# absorbs float error from the /255 normalization so exact .5 ties still round up
_TIE_EPS = 1e-9


def quantize(f):
    """Round-half-up back to 8 bits, clamping to [0, 255]."""
    return np.clip(np.floor(f * 255.0 + (0.5 + _TIE_EPS)), 0, 255).astype(np.uint8)


def _luma(f):
    return f @ LUMA


def rgb_to_yuv(f):
    y = _luma(f)
    u = 0.492 * (f[..., 2] - y)
    v = 0.877 * (f[..., 0] - y)
    return y, u, v


def yuv_to_rgb(y, u, v):
    r = y + v / 0.877
    b = y + u / 0.492
    g = (y - LUMA[0] * r - LUMA[2] * b) / LUMA[1]
    return np.stack([r, g, b], axis=-1)


# -- resampling ---------------------------------------------------------------

def _bilinear(f, sx, sy, fill=FILL):
    """Sample ``f`` at float source coordinates; outside pixels get ``fill``."""
    h, w = f.shape[:2]
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x = np.clip(sx, 0, w - 1)
    y = np.clip(sy, 0, h - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = (x - x0)[..., None]
    ay = (y - y0)[..., None]
    top = f[y0, x0] * (1 - ax) + f[y0, x1] * ax
    bottom = f[y1, x0] * (1 - ax) + f[y1, x1] * ax
    out = top * (1 - ay) + bottom * ay
    out[~inside] = fill
    return out


def _grid(h, w):
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return xs, ys, (w - 1) / 2.0, (h - 1) / 2.0


def _warp_affine(f, a, b, c, d):
    """Inverse-map output pixels through ``src = M (p - center) + center``.

    ``M = [[a, b], [c, d]]``.
    """
    h, w = f.shape[:2]
    xs, ys, cx, cy = _grid(h, w)
    dx, dy = xs - cx, ys - cy
    sx = a * dx + b * dy + cx
    sy = c * dx + d * dy + cy
    return _bilinear(f, sx, sy)


def resize(img, height, width):
    """Bilinear resize with half-pixel centers; edges are clamped, not filled."""
    img = check_image(img)
    h, w = img.shape[:2]
    if (h, w) == (height, width):
        return img.copy()
    f = to_float(img)
    sy = np.clip((np.arange(height) + 0.5) * h / height - 0.5, 0, h - 1)
    sx = np.clip((np.arange(width) + 0.5) * w / width - 0.5, 0, w - 1)
    gx, gy = np.meshgrid(sx, sy)
    return quantize(_bilinear(f, gx, gy))


# -- photometric kernels ------------------------------------------------------

def _blend(base, f, m):
    return base + m * (f - base)


def _sample_pairing(f, m, rng, partner):
    if partner is None:
        raise ParameterError("sample_pairing needs a partner image")
    partner = check_image(partner)
    if partner.shape != (f.shape[0], f.shape[1], 3):
        partner = resize(partner, f.shape[0], f.shape[1])
    return (1.0 - m) * f + m * to_float(partner)


def _gauss_noise(f, m, rng, partner):
    return f + m * rng.standard_normal(f.shape)


def _saturation(f, m, rng, partner):
    return _blend(_luma(f)[..., None], f, m)


def _contrast(f, m, rng, partner):
    return _blend(_luma(f).mean(), f, m)


def _brightness(f, m, rng, partner):
    return f * m


def _smooth(f):
    # PIL's SMOOTH kernel [[1,1,1],[1,5,1],[1,1,1]] / 13; border pixels kept.
    out = f.copy()
    if f.shape[0] < 3 or f.shape[1] < 3:
        return out
    acc = 4.0 * f[1:-1, 1:-1]
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            acc = acc + f[dy:dy + f.shape[0] - 2, dx:dx + f.shape[1] - 2]
    out[1:-1, 1:-1] = acc / 13.0
    return out


def _sharpness(f, m, rng, partner):
    return _blend(_smooth(f), f, m)


def _vignetting(f, m, rng, partner):
    h, w = f.shape[:2]
    xs, ys, cx, cy = _grid(h, w)
    r_max = math.hypot(cx, cy)
    if r_max == 0:
        return f.copy()
    r2 = ((xs - cx) ** 2 + (ys - cy) ** 2) / r_max ** 2
    return f * (1.0 - m * r2)[..., None]


def _equalize_channel(ch):
    """PIL ``ImageOps.equalize`` on one uint8 channel."""
    hist = np.bincount(ch.ravel(), minlength=256)
    used = np.flatnonzero(hist)
    if used.size <= 1:
        return ch.copy()
    step = (hist.sum() - hist[used[-1]]) // 255
    if step == 0:
        return ch.copy()
    before = np.concatenate([[0], np.cumsum(hist)[:-1]])
    lut = np.minimum((before + step // 2) // step, 255).astype(np.uint8)
    return lut[ch]


def equalize(img):
    img = check_image(img)
    return np.stack([_equalize_channel(img[..., c]) for c in range(3)], axis=-1)


def equalize_yuv(img):
    img = check_image(img)
    y, u, v = rgb_to_yuv(to_float(img))
    y8 = quantize(y)
    y_eq = _equalize_channel(y8).astype(np.float64) / 255.0
    return quantize(yuv_to_rgb(y_eq, u, v))


def autocontrast(img):
    img = check_image(img)
    out = img.copy()
    for c in range(3):
        ch = img[..., c].astype(np.float64)
        lo, hi = ch.min(), ch.max()
        if hi > lo:
            out[..., c] = np.clip(np.floor((ch - lo) * 255.0 / (hi - lo) + 0.5), 0, 255)
    return out


def posterize(img, bits):
    img = check_image(img)
    bits = int(np.clip(math.floor(bits + 0.5), 0, 8))
    mask = (0xFF << (8 - bits)) & 0xFF
    return img & np.uint8(mask)


def solarize(img, threshold):
    img = check_image(img)
    return np.where(img > threshold, 255 - img, img).astype(np.uint8)


def color_casting(img, offset, rng):
    img = check_image(img)
    channel = int(rng.integers(3))
    out = img.copy()
    shifted = np.floor(img[..., channel].astype(np.float64) + offset + 0.5)
    out[..., channel] = np.clip(shifted, 0, 255)
    return out


# -- geometric kernels --------------------------------------------------------

def _rotate(f, m, rng, partner):
    t = math.radians(m)
    cos, sin = math.cos(t), math.sin(t)
    # counter-clockwise on screen (y axis points down)
    return _warp_affine(f, cos, -sin, sin, cos)


def _shear_x(f, m, rng, partner):
    return _warp_affine(f, 1.0, math.tan(math.radians(m)), 0.0, 1.0)


def _shear_y(f, m, rng, partner):
    return _warp_affine(f, 1.0, 0.0, math.tan(math.radians(m)), 1.0)


def _scale(f, m, rng, partner):
    return _warp_affine(f, 1.0 / m, 0.0, 0.0, 1.0 / m)


def _scale_diff(f, m, rng, partner):
    # horizontal factor m, vertical factor mirrored about 1
    return _warp_affine(f, 1.0 / m, 0.0, 0.0, 1.0 / (2.0 - m))


def _distortion(f, m, rng, partner):
    h, w = f.shape[:2]
    amp = m * min(h, w) / 10.0
    xs, ys, _, _ = _grid(h, w)
    sx = xs + amp * np.sin(2 * math.pi * ys / h)
    sy = ys + amp * np.sin(2 * math.pi * xs / w)
    return _bilinear(f, sx, sy)


def flip(img, rng):
    img = check_image(img)
    if rng.integers(2) == 0:
        return img[:, ::-1].copy()
    return img[::-1, :].copy()


def cutout(img, side, rng):
    img = check_image(img)
    h, w = img.shape[:2]
    side = int(math.floor(side + 0.5))
    cy, cx = int(rng.integers(h)), int(rng.integers(w))
    out = img.copy()
    if side <= 0:
        return out
    y0, x0 = max(cy - side // 2, 0), max(cx - side // 2, 0)
    y1, x1 = min(cy - side // 2 + side, h), min(cx - side // 2 + side, w)
    out[y0:y1, x0:x1] = 128
    return out


_FLOAT_KERNELS = {
    TransformKind.SAMPLE_PAIRING: _sample_pairing,
    TransformKind.GAUSS_NOISE: _gauss_noise,
    TransformKind.SATURATION: _saturation,
    TransformKind.CONTRAST: _contrast,
    TransformKind.BRIGHTNESS: _brightness,
    TransformKind.SHARPNESS: _sharpness,
    TransformKind.VIGNETTING: _vignetting,
    TransformKind.ROTATE: _rotate,
    TransformKind.SHEAR_X: _shear_x,
    TransformKind.SHEAR_Y: _shear_y,
    TransformKind.DISTORTION: _distortion,
    TransformKind.SCALE: _scale,
    TransformKind.SCALE_DIFF: _scale_diff,
}


def apply_transform(img, kind, magnitude=None, rng=None, partner=None, extrapolate=False):
    """Apply one transform and return a new image of the same shape.

    Args:
        img: ``uint8`` array ``(H, W, 3)``.
        kind: a :class:`TransformKind` or its lowercase name.
        magnitude: strength inside ``kind.magnitude_range``; ignored for
            equalize, equalize_yuv, autocontrast and flip.
        rng: seed or ``np.random.Generator`` for the stochastic kernels
            (gauss_noise, color_casting, flip, cutout).
        partner: second image, required by sample_pairing.
        extrapolate: accept magnitudes past the nominal range (up to each
            kind's hard limit), as produced by magnitude levels above 10.

    Raises:
        ParameterError: magnitude out of range, or a missing partner.
    """
    img = check_image(img)
    if isinstance(kind, str):
        kind = TransformKind.from_label(kind)
    rng = as_generator(rng)
    if kind.has_magnitude:
        if magnitude is None:
            raise ParameterError(f"{kind.label} needs a magnitude")
        lo, hi = magnitude_domain(kind, extrapolate)
        if not lo <= magnitude <= hi:
            raise ParameterError(f"{kind.label} magnitude {magnitude} outside [{lo}, {hi}]")
    if kind is TransformKind.SAMPLE_PAIRING and partner is None:
        raise ParameterError("sample_pairing needs a partner image")

    if kind in _FLOAT_KERNELS:
        return quantize(_FLOAT_KERNELS[kind](to_float(img), float(magnitude), rng, partner))
    if kind is TransformKind.EQUALIZE:
        return equalize(img)
    if kind is TransformKind.EQUALIZE_YUV:
        return equalize_yuv(img)
    if kind is TransformKind.AUTOCONTRAST:
        return autocontrast(img)
    if kind is TransformKind.POSTERIZE:
        return posterize(img, magnitude)
    if kind is TransformKind.SOLARIZE:
        return solarize(img, magnitude)
    if kind is TransformKind.COLOR_CASTING:
        return color_casting(img, magnitude, rng)
    if kind is TransformKind.FLIP:
        return flip(img, rng)
    return cutout(img, magnitude, rng)


# -- cropping -----------------------------------------------------------------

def upscale_for_crop(img, size):
    """Upscale so the shorter side is at least ``size``, keeping aspect ratio."""
    img = check_image(img)
    h, w = img.shape[:2]
    short = min(h, w)
    if short >= size:
        return img
    factor = size / short
    nh = size if h == short else max(size, int(math.floor(h * factor + 0.5)))
    nw = size if w == short else max(size, int(math.floor(w * factor + 0.5)))
    return resize(img, nh, nw)


def crop_at(img, size, x, y):
    img = upscale_for_crop(img, size)
    h, w = img.shape[:2]
    if not (0 <= x <= w - size and 0 <= y <= h - size):
        raise ParameterError(f"crop origin ({x}, {y}) outside a {w}x{h} image")
    return img[y:y + size, x:x + size].copy()


def crop_slack(shape, size):
    """Largest valid crop origin ``(x, y)`` for an image of ``shape`` after upscaling."""
    h, w = shape[:2]
    short = min(h, w)
    if short < size:
        factor = size / short
        h = size if h == short else max(size, int(math.floor(h * factor + 0.5)))
        w = size if w == short else max(size, int(math.floor(w * factor + 0.5)))
    return w - size, h - size


def draw_crop_offset(shape, size, rng):
    sx, sy = crop_slack(shape, size)
    rng = as_generator(rng)
    return int(rng.integers(sx + 1)), int(rng.integers(sy + 1))


def random_crop(img, size, rng):
    if size < 1:
        raise ParameterError("crop size must be >= 1")
    img = check_image(img)
    x, y = draw_crop_offset(img.shape, size, rng)
    return crop_at(img, size, x, y)


def grid_origins(extent, size, per_axis):
    slack = extent - size
    if per_axis == 1:
        return [0]
    return [int(math.floor(i * slack / (per_axis - 1) + 0.5)) for i in range(per_axis)]


def multi_crop_grid(img, size, k=16):
    """Return ``k`` crops on an evenly spaced square grid, row-major from the top-left."""
    per_axis = math.isqrt(k)
    if per_axis * per_axis != k or k < 1:
        raise ParameterError(f"crop count {k} is not a perfect square")
    img = upscale_for_crop(img, size)
    h, w = img.shape[:2]
    xs = grid_origins(w, size, per_axis)
    ys = grid_origins(h, size, per_axis)
    return [img[y:y + size, x:x + size].copy() for y in ys for x in xs]


# -- I/O ----------------------------------------------------------------------

def read_image(path):
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img, jpeg_quality=95):
    """Write PNG or JPEG by extension; JPEG uses ``jpeg_quality`` (1-95)."""
    from PIL import Image

    img = check_image(img)
    im = Image.fromarray(img, mode="RGB")
    suffix = str(path).lower().rsplit(".", 1)[-1]
    if suffix in ("jpg", "jpeg"):
        im.save(path, format="JPEG", quality=int(jpeg_quality))
    elif suffix == "png":
        im.save(path, format="PNG")
    else:
        raise ParameterError(f"unsupported image format {suffix!r}; use png or jpg")
