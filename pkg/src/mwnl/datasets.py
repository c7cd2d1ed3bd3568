"""Manifests, class statistics and stratified splits.

Two manifest layouts are read:

* ``path,label_name`` rows, with an optional ``path,label`` header. Class
  names are the sorted distinct labels.
* one-hot rows ``image,CLASS1,CLASS2,...`` (the ISIC ground-truth layout)
  where the header names the classes and each row holds exactly one 1.0.

Feature-vector datasets use ``sample_id,label,f_0,...,f_{D-1}`` rows with a
header; the label is an integer class index.
"""

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .loss import ClassStats
from .rng import as_generator


@dataclass
class Manifest:
    entries: list  # (sample id or path, label index)
    class_names: tuple
    layout: str = "label"
    header: bool = True
    base_dir: str = field(default="", compare=False)

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("class names are not unique")
        c = len(self.class_names)
        for sid, label in self.entries:
            if not 0 <= label < c:
                raise DataError(f"label {label} of {sid!r} outside [0, {c})")

    @property
    def num_classes(self):
        return len(self.class_names)

    @property
    def labels(self):
        return np.array([lab for _, lab in self.entries], dtype=np.intp)

    @property
    def ids(self):
        return [sid for sid, _ in self.entries]

    def resolve(self, sid):
        return os.path.join(self.base_dir, sid)

    def subset(self, indices):
        return Manifest([self.entries[i] for i in indices], self.class_names,
                        self.layout, self.header, self.base_dir)


def _parse_onehot(rows, lineno0):
    header = rows[0][1]
    names = tuple(h.strip() for h in header[1:])
    entries = []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            flags = [float(v) for v in row[1:]]
        except ValueError:
            raise DataError("indicator values must be numbers", line=lineno) from None
        hot = [i for i, v in enumerate(flags) if v == 1.0]
        if any(v not in (0.0, 1.0) for v in flags):
            raise DataError("indicators must be 0.0 or 1.0", line=lineno)
        if len(hot) > 1:
            raise DataError(f"multi-hot row for {row[0]!r}", line=lineno)
        if not hot:
            raise DataError(f"no class set for {row[0]!r}", line=lineno)
        entries.append((row[0].strip(), hot[0]))
    return Manifest(entries, names, layout="onehot", header=True)


def _parse_labels(rows, has_header, known=None):
    body = rows[1:] if has_header else rows
    for lineno, row in body:
        if len(row) != 2:
            raise DataError(f"expected path,label but got {len(row)} fields", line=lineno)
    names = tuple(known) if known else tuple(sorted({row[1].strip() for _, row in body}))
    index = {n: i for i, n in enumerate(names)}
    entries = []
    for lineno, row in body:
        label = row[1].strip()
        if label not in index:
            raise DataError(f"unknown label {label!r}", line=lineno)
        entries.append((row[0].strip(), index[label]))
    return Manifest(entries, names, layout="label", header=has_header)


def parse_manifest(text, class_names=None):
    """Parse manifest text; ``class_names`` fixes the label order for ``path,label`` files."""
    rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text)), start=1)
            if r and any(f.strip() for f in r)]
    if not rows:
        raise DataError("manifest is empty")
    first = rows[0][1]
    if len(first) > 2:
        return _parse_onehot(rows, rows[0][0])
    has_header = len(first) == 2 and first[1].strip().lower() in ("label", "label_name", "class")
    return _parse_labels(rows, has_header, class_names)


def load_manifest(path, class_names=None):
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc.strerror}") from None
    m = parse_manifest(text, class_names)
    m.base_dir = os.path.dirname(os.path.abspath(path))
    return m


def dump_manifest(m):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if m.layout == "onehot":
        writer.writerow(["image"] + list(m.class_names))
        for sid, label in m.entries:
            writer.writerow([sid] + ["1.0" if i == label else "0.0" for i in range(m.num_classes)])
    else:
        if m.header:
            writer.writerow(["path", "label"])
        for sid, label in m.entries:
            writer.writerow([sid, m.class_names[label]])
    return out.getvalue()


def class_stats(m):
    """Per-class counts in ``class_names`` order; raises if a class is empty."""
    counts = np.bincount(m.labels, minlength=m.num_classes)
    empty = [m.class_names[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise DataError(f"class(es) {empty} have no samples; their weights are undefined")
    return ClassStats(tuple(counts.tolist()))


def stratified_indices(labels, fraction, rng, class_names=None):
    """Split indices per class: ``round(N_i * fraction)`` (half up) go to the first side.

    Each side keeps at least one sample of every class. Both index arrays
    are returned sorted.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    labels = np.asarray(labels, dtype=np.intp)
    rng = as_generator(rng)
    first, second = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            name = class_names[c] if class_names is not None else c
            raise DataError(f"class {name!r} has {idx.size} sample(s); a split needs at least 2")
        k = int(np.floor(idx.size * fraction + 0.5))
        k = min(max(k, 1), idx.size - 1)
        perm = rng.permutation(idx)
        first.append(perm[:k])
        second.append(perm[k:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def stratified_split(m, fraction, seed):
    a, b = stratified_indices(m.labels, fraction, seed, m.class_names)
    return m.subset(a), m.subset(b)


# -- feature-vector datasets --------------------------------------------------

@dataclass
class FeatureDataset:
    x: np.ndarray  # (n, d)
    y: np.ndarray  # (n,)
    num_classes: int
    y_clean: np.ndarray = None  # labels before injected noise, when known
    ids: list = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.intp)
        if self.ids is None:
            self.ids = [str(i) for i in range(len(self.y))]

    def __len__(self):
        return len(self.y)

    def stats(self):
        return ClassStats.from_labels(self.y, self.num_classes)

    def subset(self, idx):
        return FeatureDataset(self.x[idx], self.y[idx], self.num_classes,
                              None if self.y_clean is None else self.y_clean[idx],
                              [self.ids[i] for i in idx])


def read_features(path, num_classes=None):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read features {path}: {exc.strerror}") from None
    ids, ys, xs = [], [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 3:
            raise DataError("expected header sample_id,label,f_0,...", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                ys.append(int(row[1]))
                xs.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise DataError(f"malformed value ({exc})", line=lineno) from None
            ids.append(row[0])
    if not ids:
        raise DataError("feature file has no rows")
    y = np.array(ys, dtype=np.intp)
    if y.min() < 0:
        raise DataError("negative class label")
    c = num_classes or int(y.max()) + 1
    return FeatureDataset(np.array(xs), y, c, ids=ids)


def write_features(path, ds):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "label"] + [f"f_{i}" for i in range(ds.x.shape[1])])
        for sid, label, row in zip(ds.ids, ds.y, ds.x):
            writer.writerow([sid, int(label)] + [repr(float(v)) for v in row])
