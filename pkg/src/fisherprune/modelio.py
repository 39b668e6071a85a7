"""Model container: magic, structured-text header, raw float32 blob.

Layout on disk:

    bytes 0..4    magic b"LDAP1"
    bytes 5..12   header length (unsigned 64-bit little-endian)
    header        UTF-8 JSON: input shape, layer chain, tensor directory
                  (name -> shape + byte offset), provenance, and an
                  optional classifier section (kind tag + its own tensors)
    blob          all tensors back to back, little-endian float32

Load failures are told apart: a wrong magic, a blob shorter than the
directory demands, and a layer chain whose shapes do not compose each
raise their own error type.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import BadMagicError, ShapeChainError, TruncatedBlobError
from .network import LayerSpec, Network

MAGIC = b"LDAP1"


def _collect_tensors(net: Network, classifier=None):
    """Flatten all parameter arrays into (header_layers, directory, blobs)."""
    layers = []
    directory = {}
    blobs = []
    offset = 0

    def put(name, arr):
        nonlocal offset
        a = np.ascontiguousarray(arr, dtype="<f4")
        directory[name] = {"shape": list(a.shape), "offset": offset}
        blobs.append(a.tobytes())
        offset += a.nbytes
        return name

    for i, layer in enumerate(net.layers):
        entry = {"kind": layer.kind}
        if layer.kind == "conv":
            entry["stride"] = layer.stride
            entry["pad"] = layer.pad
            entry["weights"] = put(f"layer{i}.weights", layer.weights)
            entry["bias"] = put(f"layer{i}.bias", layer.bias)
        elif layer.kind == "dense":
            entry["weights"] = put(f"layer{i}.weights", layer.weights)
            entry["bias"] = put(f"layer{i}.bias", layer.bias)
        elif layer.kind == "maxpool":
            entry["window"] = layer.window
            entry["stride"] = layer.stride
        layers.append(entry)

    clf_section = None
    if classifier is not None:
        clf_section = {"kind": classifier["kind"], "meta": classifier.get("meta", {}),
                       "tensors": {}}
        for name, arr in classifier["tensors"].items():
            clf_section["tensors"][name] = put(f"classifier.{name}", arr)

    return layers, directory, blobs, clf_section


def save_model(net: Network, path, provenance=None, classifier=None):
    """Write the network (and optional classifier head) to one file.

    provenance is a JSON-serializable dict recorded verbatim in the header.
    classifier, when given, is {"kind": str, "meta": dict, "tensors": {name: array}}.
    """
    layers, directory, blobs, clf = _collect_tensors(net, classifier)
    header = {
        "format": "LDAP1",
        "input_shape": list(net.input_shape),
        "layers": layers,
        "tensors": directory,
        "provenance": provenance or {},
    }
    if clf is not None:
        header["classifier"] = clf
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


def _read_tensor(blob, directory, name):
    if name not in directory:
        raise ShapeChainError(f"header references missing tensor {name!r}")
    meta = directory[name]
    shape = tuple(int(s) for s in meta["shape"])
    count = int(np.prod(shape)) if shape else 1
    start = int(meta["offset"])
    end = start + count * 4
    if end > len(blob):
        raise TruncatedBlobError(
            f"tensor {name!r} needs bytes [{start},{end}) but blob has {len(blob)}"
        )
    arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
    return arr.reshape(a if (a := shape) else ()).copy()


def load_model(path):
    """Read a model file back into a Network.

    Returns (net, info) where info carries the provenance dict and, when
    present, the classifier section with its tensors materialized.
    Raises BadMagicError / TruncatedBlobError / ShapeChainError on the
    corresponding defects.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: not a model file (bad magic)")
    (hlen,) = struct.unpack_from("<Q", data, len(MAGIC))
    hstart = len(MAGIC) + 8
    if hstart + hlen > len(data):
        raise TruncatedBlobError(f"{path}: header length {hlen} overruns file")
    try:
        header = json.loads(data[hstart:hstart + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadMagicError(f"{path}: header is not valid JSON ({exc})") from None
    blob = data[hstart + hlen:]

    directory = header.get("tensors", {})
    layers = []
    for i, entry in enumerate(header.get("layers", [])):
        kind = entry.get("kind")
        if kind == "conv":
            w = _read_tensor(blob, directory, entry["weights"])
            b = _read_tensor(blob, directory, entry["bias"])
            if w.ndim != 4:
                raise ShapeChainError(f"layer {i}: conv weights rank {w.ndim}")
            layers.append(LayerSpec.conv(w, b, stride=int(entry.get("stride", 1)),
                                         pad=int(entry.get("pad", 0))))
        elif kind == "dense":
            w = _read_tensor(blob, directory, entry["weights"])
            b = _read_tensor(blob, directory, entry["bias"])
            if w.ndim != 2:
                raise ShapeChainError(f"layer {i}: dense weights rank {w.ndim}")
            layers.append(LayerSpec.dense(w, b))
        elif kind == "maxpool":
            layers.append(LayerSpec.maxpool(int(entry["window"]), int(entry["stride"])))
        elif kind in ("relu", "flatten", "softmax"):
            layers.append(LayerSpec(kind))
        else:
            raise ShapeChainError(f"layer {i}: unknown kind {kind!r}")

    net = Network(tuple(int(s) for s in header.get("input_shape", [])), layers)
    try:
        net.infer_shapes()
    except Exception as exc:
        raise ShapeChainError(f"{path}: layer shapes do not compose: {exc}") from None

    info = {"provenance": header.get("provenance", {}), "classifier": None}
    if "classifier" in header:
        sec = header["classifier"]
        tensors = {name: _read_tensor(blob, directory, ref)
                   for name, ref in sec.get("tensors", {}).items()}
        info["classifier"] = {"kind": sec.get("kind"), "meta": sec.get("meta", {}),
                              "tensors": tensors}
    return net, info


def model_param_count(path):
    """Parameter totals of a saved model, split at the last conv layer.

    Everything after the last conv (dense heads and any future parametric
    layer) counts as fc. Returns {"conv": n, "fc": n, "total": n}.
    """
    net, _ = load_model(path)
    conv, fc = net.param_count()
    return {"conv": int(conv), "fc": int(fc), "total": int(conv + fc)}
