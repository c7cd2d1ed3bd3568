"""Modified RandAugment: per-image transform plans and their execution.

A plan is drawn once per image from a seeded stream and records everything
needed to replay it (kind, execute flag, magnitude, kernel seed, partner
index, crop origin), so augmentation can be logged and reproduced exactly.
"""

import csv
import dataclasses
import json
import re
from dataclasses import dataclass

import numpy as np

from . import imaging
from .errors import DataError, ParameterError
from .imaging import COLOR_KINDS, SHAPE_KINDS, TransformKind
from .rng import as_generator, substream

ALL_KINDS = tuple(TransformKind)
SUBSETS = {"color": COLOR_KINDS, "shape": SHAPE_KINDS, "any": ALL_KINDS}
MAGNITUDE_MODES = ("full_random", "cm", "rm")


@dataclass(frozen=True)
class PolicyConfig:
    """Knobs of the augmentation policy.

    ``order`` names the subset each slot draws from; its length is the
    number of draws ``n``. ``magnitude_mode`` is ``full_random`` (uniform
    over the whole nominal range) or ``cm``/``rm`` at integer ``level``,
    where level 10 reaches the end of the nominal range.
    """

    n: int = 2
    p_exec: float = 0.7
    order: tuple = ("color", "shape")
    magnitude_mode: str = "full_random"
    level: int = 10
    crop_size: int = 224
    with_replacement: bool = True

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if self.n < 0:
            raise ParameterError("n must be >= 0")
        if len(self.order) != self.n:
            raise ParameterError(f"order has {len(self.order)} slots but n={self.n}")
        bad = [s for s in self.order if s not in SUBSETS]
        if bad:
            raise ParameterError(f"unknown subset(s) {bad}; use color, shape or any")
        if not 0.0 <= self.p_exec <= 1.0:
            raise ParameterError("p_exec must lie in [0, 1]")
        if self.magnitude_mode not in MAGNITUDE_MODES:
            raise ParameterError(f"magnitude_mode must be one of {MAGNITUDE_MODES}")
        if self.magnitude_mode != "full_random" and (int(self.level) != self.level or self.level < 1):
            raise ParameterError("level must be an integer >= 1")
        if self.crop_size < 1:
            raise ParameterError("crop_size must be >= 1")

    @property
    def extrapolates(self):
        return self.magnitude_mode != "full_random" and self.level > 10

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def parse_magnitude_mode(text):
    """``"full_random"``, ``"cm(5)"`` or ``"rm(10)"`` -> (mode, level)."""
    text = text.strip().lower()
    if text == "full_random":
        return "full_random", 10
    m = re.fullmatch(r"(cm|rm)\((\d+)\)", text)
    if not m:
        raise ParameterError(f"bad magnitude mode {text!r}")
    return m.group(1), int(m.group(2))


@dataclass(frozen=True)
class Draw:
    kind: TransformKind
    executed: bool
    magnitude: float = None
    seed: int = 0
    partner: int = None


@dataclass(frozen=True)
class TransformPlan:
    draws: tuple
    crop_offset: tuple = (0, 0)
    extrapolate: bool = False


def _extreme(kind, rng):
    lo, hi = kind.magnitude_range
    if kind.two_sided:
        return hi if rng.random() < 0.5 else lo
    return lo if kind.identity == hi else hi


def level_to_magnitude(kind, level, mode, rng=None):
    """Magnitude at a discrete strength level.

    ``cm`` returns the point ``level/10`` of the way from the identity-like
    endpoint to the extreme endpoint (random side for two-sided ranges);
    ``rm`` returns a uniform draw between the identity endpoint and that
    point. Levels above 10 extrapolate past the nominal range and are
    clipped to the kernel's hard limits.
    """
    if isinstance(kind, str):
        kind = TransformKind.from_label(kind)
    if not kind.has_magnitude:
        raise ParameterError(f"{kind.label} has no magnitude")
    if level < 1:
        raise ParameterError("level must be >= 1")
    if mode not in ("cm", "rm"):
        raise ParameterError(f"mode must be cm or rm, got {mode!r}")
    rng = as_generator(rng)
    target = kind.identity + (level / 10.0) * (_extreme(kind, rng) - kind.identity)
    if mode == "rm":
        target = kind.identity + rng.random() * (target - kind.identity)
    lo, hi = imaging.magnitude_domain(kind, extrapolate=True)
    return float(min(max(target, lo), hi))


def _draw_magnitude(kind, cfg, rng):
    if not kind.has_magnitude:
        return None
    if cfg.magnitude_mode == "full_random":
        lo, hi = kind.magnitude_range
        return float(rng.uniform(lo, hi))
    return level_to_magnitude(kind, cfg.level, cfg.magnitude_mode, rng)


def sample_plan(cfg, rng, image_shape=None, pool_size=1):
    """Draw one image's plan.

    Each slot picks a kind uniformly from its subset, executes with
    probability ``cfg.p_exec`` and gets a magnitude per the configured
    mode. ``image_shape`` fixes the range of the random crop origin;
    without it the image is assumed to already be ``crop_size`` square.
    ``pool_size`` is the number of candidate sample_pairing partners.
    """
    rng = as_generator(rng)
    used = set()
    draws = []
    for subset in cfg.order:
        candidates = SUBSETS[subset]
        if not cfg.with_replacement:
            candidates = tuple(k for k in candidates if k not in used) or SUBSETS[subset]
        kind = candidates[int(rng.integers(len(candidates)))]
        used.add(kind)
        executed = bool(rng.random() < cfg.p_exec)
        magnitude = _draw_magnitude(kind, cfg, rng)
        seed = int(rng.integers(2**63))
        partner = int(rng.integers(pool_size)) if kind is TransformKind.SAMPLE_PAIRING else None
        draws.append(Draw(kind, executed, magnitude, seed, partner))
    shape = image_shape or (cfg.crop_size, cfg.crop_size)
    offset = imaging.draw_crop_offset(shape, cfg.crop_size, rng)
    return TransformPlan(tuple(draws), offset, cfg.extrapolates)


def execute_plan(img, plan, dataset=None, crop_size=224):
    """Apply the executed draws in order, then crop at the plan's origin.

    ``dataset`` is any indexable of images supplying sample_pairing
    partners (the whole dataset by default, or just the current batch).
    Without one, sample_pairing blends the image with itself.
    """
    out = imaging.check_image(img)
    for d in plan.draws:
        if not d.executed:
            continue
        partner = None
        if d.kind is TransformKind.SAMPLE_PAIRING:
            partner = out if dataset is None else dataset[d.partner]
        out = imaging.apply_transform(out, d.kind, d.magnitude, np.random.default_rng(d.seed),
                                      partner=partner, extrapolate=plan.extrapolate)
    return imaging.crop_at(out, crop_size, *plan.crop_offset)


def augment(img, cfg, seed, index, epoch=0, dataset=None):
    """Plan and execute for image ``index`` using its own reproducible stream."""
    rng = substream(seed, "policy", index, epoch)
    pool = len(dataset) if dataset is not None else 1
    plan = sample_plan(cfg, rng, image_shape=np.shape(img), pool_size=pool)
    return execute_plan(img, plan, dataset, cfg.crop_size), plan


# -- plan log -----------------------------------------------------------------

def plan_log_header(n):
    cols = ["image_id", "crop_x", "crop_y", "extrapolate"]
    for i in range(n):
        cols += [f"kind_{i}", f"executed_{i}", f"magnitude_{i}", f"seed_{i}", f"partner_{i}"]
    return cols


def _plan_row(image_id, plan):
    row = [image_id, plan.crop_offset[0], plan.crop_offset[1], int(plan.extrapolate)]
    for d in plan.draws:
        row += [d.kind.label, int(d.executed),
                "" if d.magnitude is None else repr(d.magnitude),
                d.seed, "" if d.partner is None else d.partner]
    return row


def write_plan_log(fh, records, n):
    """Write ``(image_id, plan)`` pairs as CSV with a ``plan_log_header(n)`` header.

    Magnitudes are written with ``repr`` so they parse back to the same
    float and replay is bit-exact.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(plan_log_header(n))
    for image_id, plan in records:
        writer.writerow(_plan_row(image_id, plan))


def read_plan_log(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    if not header or header[:4] != ["image_id", "crop_x", "crop_y", "extrapolate"]:
        raise DataError("not a plan log (bad header)", line=1)
    n = (len(header) - 4) // 5
    if header != plan_log_header(n):
        raise DataError("plan log header does not match the documented layout", line=1)
    records = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            draws = []
            for i in range(n):
                kind, executed, mag, seed, partner = row[4 + 5 * i: 9 + 5 * i]
                draws.append(Draw(TransformKind.from_label(kind), executed == "1",
                                  float(mag) if mag else None, int(seed),
                                  int(partner) if partner else None))
            plan = TransformPlan(tuple(draws), (int(row[1]), int(row[2])), row[3] == "1")
        except (ValueError, ParameterError) as exc:
            raise DataError(str(exc), line=lineno) from None
        records.append((row[0], plan))
    return records
