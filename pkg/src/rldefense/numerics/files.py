"""Binary checkpoint formats.

Each file starts with one ASCII header line terminated by ``\\n``; the
payload is little-endian float64:

* ``RDNET v1 <sizes> relu`` -- sizes comma-joined; W0, b0, W1, b1, ... row-major.
* ``RDPCA v1 <d> <k>`` -- mean, components (k x d), explained variance,
  followed by one trailing float holding the total variance.
* ``RDOBS v1 <n> <d>`` -- an n x d observation matrix.
"""

from __future__ import annotations

import os

import numpy as np

from .mlp import MlpParams, MlpSpec
from .pca import PcaModel

_F64 = np.dtype("<f8")


class FormatError(ValueError):
    pass


def _write(path, header: str, arrays) -> None:
    payload = b"".join(np.ascontiguousarray(a, dtype=_F64).tobytes() for a in arrays)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(payload)
    os.replace(tmp, path)


def _read(path, magic: str) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    fields = raw[:nl].decode("ascii", errors="replace").split()
    if len(fields) < 2 or fields[0] != magic or fields[1] != "v1":
        raise FormatError(f"{path}: expected '{magic} v1' header, got {raw[:nl][:60]!r}")
    body = raw[nl + 1 :]
    if len(body) % 8:
        raise FormatError(f"{path}: payload is not a whole number of float64 values")
    return fields[2:], np.frombuffer(body, dtype=_F64).astype(np.float64)


def _take(flat: np.ndarray, pos: int, shape) -> tuple[np.ndarray, int]:
    size = int(np.prod(shape))
    if pos + size > flat.size:
        raise FormatError("payload shorter than header implies")
    return flat[pos : pos + size].reshape(shape).copy(), pos + size


def save_mlp(path, params: MlpParams) -> None:
    sizes = ",".join(str(s) for s in params.spec.layer_sizes)
    _write(path, f"RDNET v1 {sizes} {params.spec.hidden_activation}", params.arrays())


def load_mlp(path) -> MlpParams:
    fields, flat = _read(path, "RDNET")
    if len(fields) != 2:
        raise FormatError(f"{path}: malformed RDNET header")
    try:
        sizes = tuple(int(s) for s in fields[0].split(","))
    except ValueError as exc:
        raise FormatError(f"{path}: bad layer sizes {fields[0]!r}") from exc
    spec = MlpSpec(sizes, hidden_activation=fields[1])
    pos, weights, biases = 0, [], []
    for l in range(spec.n_layers):
        w, pos = _take(flat, pos, (sizes[l + 1], sizes[l]))
        b, pos = _take(flat, pos, (sizes[l + 1],))
        weights.append(w)
        biases.append(b)
    if pos != flat.size:
        raise FormatError(f"{path}: trailing data after parameters")
    return MlpParams(spec, weights, biases)


def save_pca(path, model: PcaModel) -> None:
    _write(
        path,
        f"RDPCA v1 {model.dim} {model.k}",
        [model.mean, model.components, model.explained_variance, np.array([model.total_variance])],
    )


def load_pca(path) -> PcaModel:
    fields, flat = _read(path, "RDPCA")
    d, k = (int(f) for f in fields[:2])
    mean, pos = _take(flat, 0, (d,))
    comps, pos = _take(flat, pos, (k, d))
    var, pos = _take(flat, pos, (k,))
    total = float(flat[pos]) if pos < flat.size else float(var.sum())
    return PcaModel(mean, comps, var, total)


def save_observations(path, data) -> None:
    data = np.asarray(data, dtype=np.float64).reshape(-1, 25) if np.size(data) == 0 else np.asarray(data, dtype=np.float64)
    _write(path, f"RDOBS v1 {data.shape[0]} {data.shape[1]}", [data])


def load_observations(path) -> np.ndarray:
    fields, flat = _read(path, "RDOBS")
    n, d = (int(f) for f in fields[:2])
    data, pos = _take(flat, 0, (n, d))
    if pos != flat.size:
        raise FormatError(f"{path}: trailing data after observations")
    return data
