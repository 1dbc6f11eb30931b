"""Binary model container.

Layout: magic "HCN1", little-endian u32 header length, UTF-8 JSON header
(dims, hyperparameters, vocabulary, entity defs, template catalog, masks,
version), then the raw float64 parameter arrays in fixed order. Loading a
saved model reproduces it bit for bit.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..compiler.dialogs import ActionTemplate
from ..compiler.masks import ActionMask
from ..errors import BadMagicError, DimMismatchError, TruncatedFileError
from ..flow.model import EntityDef, OptionValue
from .featurizer import Featurizer
from .model import Hyperparams, PolicyModel
from .network import PARAM_ORDER, param_shapes

MAGIC = b"HCN1"


def _entities_to_dicts(entities: list[EntityDef]) -> list[dict]:
    return [{"name": e.name, "kind": e.kind,
             "values": [{"value": v.value, "synonyms": list(v.synonyms)}
                        for v in e.values]}
            for e in entities]


def _entities_from_dicts(raw: list[dict]) -> list[EntityDef]:
    return [EntityDef(name=d["name"], kind=d["kind"],
                      values=tuple(OptionValue(value=v["value"],
                                               synonyms=tuple(v["synonyms"]))
                                   for v in d.get("values", ())))
            for d in raw]


def save_model(model: PolicyModel) -> bytes:
    """Model content only; registry versioning lives in the manifest, so the
    same training inputs always serialize to the same bytes."""
    featurizer = model.featurizer
    header = {
        "format_version": 1,
        "dims": {
            "vocab": featurizer.vocab_size,
            "embedding_dim": featurizer.embedding_dim,
            "hidden": model.hyper.hidden_size,
            "templates": featurizer.template_count,
            "entities": featurizer.entity_count,
            "input": featurizer.input_size,
        },
        "hyper": model.hyper.to_dict(),
        "featurizer": featurizer.to_dict(),
        "templates": [t.to_dict() for t in model.templates],
        "masks": [m.to_dict() for m in model.masks],
        "entity_defs": _entities_to_dicts(model.entities),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    shapes = param_shapes(featurizer.vocab_size, featurizer.embedding_dim,
                          model.hyper.hidden_size, featurizer.template_count,
                          featurizer.input_size)
    for name in PARAM_ORDER:
        array = model.params[name]
        if array.shape != shapes[name] or array.dtype != np.float64:
            raise DimMismatchError(f"parameter '{name}' has shape {array.shape}, "
                                   f"expected {shapes[name]}")
        parts.append(array.astype("<f8", copy=False).tobytes(order="C"))
    return b"".join(parts)


def load_model(data: bytes, version: int = 0) -> PolicyModel:
    if len(data) < 8:
        raise TruncatedFileError("file shorter than the fixed prelude")
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    (header_len,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + header_len:
        raise TruncatedFileError("file truncated inside the header")
    try:
        header = json.loads(data[8:8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedFileError(f"unreadable header: {exc}") from exc

    dims = header["dims"]
    featurizer = Featurizer.from_dict(header["featurizer"])
    hyper = Hyperparams.from_dict(header["hyper"])
    if (featurizer.vocab_size != dims["vocab"]
            or featurizer.embedding_dim != dims["embedding_dim"]
            or featurizer.entity_count != dims["entities"]
            or featurizer.template_count != dims["templates"]
            or featurizer.input_size != dims["input"]
            or hyper.hidden_size != dims["hidden"]):
        raise DimMismatchError("dims header disagrees with the embedded catalog")

    shapes = param_shapes(dims["vocab"], dims["embedding_dim"], dims["hidden"],
                          dims["templates"], dims["input"])
    params: dict[str, np.ndarray] = {}
    offset = 8 + header_len
    for name in PARAM_ORDER:
        shape = shapes[name]
        count = int(np.prod(shape))
        nbytes = count * 8
        chunk = data[offset:offset + nbytes]
        if len(chunk) < nbytes:
            raise TruncatedFileError(f"file truncated inside parameter '{name}'")
        params[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(data):
        raise DimMismatchError(f"{len(data) - offset} unexpected trailing bytes")

    return PolicyModel(
        featurizer=featurizer,
        params=params,
        hyper=hyper,
        templates=[ActionTemplate.from_dict(t) for t in header["templates"]],
        masks=[ActionMask.from_dict(m) for m in header["masks"]],
        entities=_entities_from_dicts(header["entity_defs"]),
        version=version,
    )
