"""Model and data persistence.

Container format: a length-prefixed UTF-8 text header followed by raw
float blocks. The header is

    line 1..k: "key=value" metadata (always includes format and family)
    one "array=<name> <dim0> <dim1> ..." line per stored array

serialised as UTF-8 and prefixed with an 8-byte little-endian length.
The payload is one row-major little-endian IEEE-754 float64 block per
array, in header order. The format is trivially parseable from any
language and byte-exact round-trippable.

Also provides binary PGM (P5) image I/O at 8 or 16 bits.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = [
    "save_container",
    "load_container",
    "save_model",
    "load_model",
    "save_matrix",
    "load_matrix",
    "save_whitener",
    "load_whitener",
    "write_pgm",
    "read_pgm",
]

FORMAT_VERSION = "1"


def save_container(path, family, arrays, meta=None):
    """Write arrays (dict name -> ndarray) with metadata to ``path``."""
    lines = [f"format={FORMAT_VERSION}", f"family={family}"]
    for key in sorted(meta or {}):
        value = (meta or {})[key]
        lines.append(f"meta.{key}={value}")
    names = list(arrays)
    blocks = []
    for name in names:
        arr = np.ascontiguousarray(np.asarray(arrays[name], dtype="<f8"))
        dims = " ".join(str(d) for d in arr.shape) if arr.ndim else "0"
        lines.append(f"array={name} {dims}")
        blocks.append(arr.tobytes())
    header = "\n".join(lines).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for block in blocks:
            fh.write(block)


def load_container(path):
    """Read a container: (family, arrays dict, meta dict)."""
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = fh.read(hlen).decode("utf-8")
        lines = header.split("\n")
        kv = {}
        specs = []
        for line in lines:
            key, _, value = line.partition("=")
            if key == "array":
                parts = value.split()
                name = parts[0]
                shape = tuple(int(d) for d in parts[1:])
                if shape == (0,):
                    shape = ()
                specs.append((name, shape))
            else:
                kv[key] = value
        if kv.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported container format {kv.get('format')!r}")
        arrays = {}
        for name, shape in specs:
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"truncated payload for array {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        meta = {k[len("meta."):]: v for k, v in kv.items() if k.startswith("meta.")}
        return kv["family"], arrays, meta


# -- model families ------------------------------------------------------------


def save_model(path, model):
    """Persist any model family; shape metadata rides in the header."""
    from .boltzmann import BoltzmannMachine
    from .models import BssIcaEnergy, SigmoidNetEnergy
    from .pot import PotModel

    meta = {}
    if isinstance(model, PotModel):
        family = "pot"
        arrays = dict(model.params)
        if "W" not in arrays and model.hierarchical:
            arrays["W"] = model.W
        meta["hierarchical"] = str(int(model.hierarchical))
        meta["train_w"] = str(int(model.train_W))
        if model.grid is not None:
            meta["grid"] = f"{model.grid[0]}x{model.grid[1]}"
    elif isinstance(model, BoltzmannMachine):
        family = "bm"
        arrays = dict(model.params)
        meta["nonneg_j"] = str(int(model.nonneg_J))
        if model.grid is not None:
            meta["grid"] = f"{model.grid[0]}x{model.grid[1]}"
    elif isinstance(model, BssIcaEnergy):
        family = "bss"
        arrays = dict(model.params)
    elif isinstance(model, SigmoidNetEnergy):
        family = "sigmoid"
        arrays = dict(model.params)
    else:
        raise TypeError(f"cannot persist model of type {type(model).__name__}")
    save_container(path, family, arrays, meta)


def load_model(path):
    from .boltzmann import BoltzmannMachine
    from .models import BssIcaEnergy, SigmoidNetEnergy
    from .pot import PotModel

    family, arrays, meta = load_container(path)
    grid = None
    if "grid" in meta:
        r, _, c = meta["grid"].partition("x")
        grid = (int(r), int(c))
    if family == "pot":
        hier = meta.get("hierarchical") == "1"
        return PotModel(arrays["J"], alpha=arrays["alpha"],
                        W=arrays.get("W") if hier else None,
                        train_W=meta.get("train_w") == "1", grid=grid)
    if family == "bm":
        return BoltzmannMachine(arrays["J"], K=arrays["K"],
                                bias_v=arrays["bias_v"], bias_h=arrays["bias_h"],
                                nonneg_J=meta.get("nonneg_j") == "1", grid=grid)
    if family == "bss":
        return BssIcaEnergy(arrays["J"])
    if family == "sigmoid":
        return SigmoidNetEnergy(arrays["J"], arrays["b"], arrays["a"])
    raise ValueError(f"unknown model family {family!r}")


def save_matrix(path, data, meta=None):
    """Raw-matrix container (datasets, sample dumps)."""
    save_container(path, "matrix", {"data": np.atleast_2d(data)}, meta)


def load_matrix(path):
    family, arrays, meta = load_container(path)
    if family != "matrix":
        raise ValueError(f"expected a matrix container, found {family!r}")
    return arrays["data"], meta


def save_whitener(path, transform):
    from .pipeline import WhiteningTransform  # noqa: F401 (type reference)

    arrays = {
        "forward": transform.forward,
        "inverse": transform.inverse,
        "mean": transform.mean,
        "eigenvalues": transform.eigenvalues,
    }
    save_container(path, "whitener", arrays,
                   {"mode": transform.mode,
                    "eig_floor": repr(float(transform.eig_floor))})


def load_whitener(path):
    from .pipeline import WhiteningTransform

    family, arrays, meta = load_container(path)
    if family != "whitener":
        raise ValueError(f"expected a whitener container, found {family!r}")
    return WhiteningTransform(forward=arrays["forward"], inverse=arrays["inverse"],
                              mean=arrays["mean"], eigenvalues=arrays["eigenvalues"],
                              mode=meta["mode"], eig_floor=float(meta["eig_floor"]))


# -- PGM images ------------------------------------------------------------------


def write_pgm(path, image, maxval=255):
    """Binary P5 PGM. ``image`` is float in [0, 1] or integer grayscale."""
    img = np.asarray(image)
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    if np.issubdtype(img.dtype, np.floating):
        img = np.clip(np.rint(img * maxval), 0, maxval)
    img = img.astype(">u2" if maxval == 65535 else "u1")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode())
        fh.write(img.tobytes())


def read_pgm(path):
    """Read binary P5 PGM into floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError("not a binary (P5) PGM file")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    img = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return img.reshape(height, width).astype(float) / maxval
