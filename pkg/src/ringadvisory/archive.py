"""Binary model archives: JSON header + shape-tagged float64 blob + checksum.

Layout: magic "RADV", u32 format version, u32 header length, header JSON
(UTF-8), parameter blob (arrays concatenated little-endian in header
order), 32-byte sha256 over header+blob.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from . import advisory
from .dti import DtiModel
from .nn import PerceptronNet

MAGIC = b"RADV"
FORMAT_VERSION = 1


class ArchiveError(RuntimeError):
    pass


def save_archive(path, header: dict, params: dict[str, np.ndarray]):
    header = dict(header)
    header["params"] = [[name, list(np.asarray(arr).shape)] for name, arr in params.items()]
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for arr in params.values())
    digest = hashlib.sha256(header_bytes + blob).digest()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)
        fh.write(digest)


def load_archive(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ArchiveError("not a model archive (bad magic)")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise ArchiveError(f"archive format version {version} unsupported")
    header_bytes = raw[12:12 + hlen]
    blob = raw[12 + hlen:-32]
    digest = raw[-32:]
    if hashlib.sha256(header_bytes + blob).digest() != digest:
        raise ArchiveError("checksum mismatch, archive corrupted")
    header = json.loads(header_bytes.decode("utf-8"))
    params = {}
    offset = 0
    for name, shape in header["params"]:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(shape)
        params[name] = arr.astype(np.float64)
        offset += n * 8
    if offset != len(blob):
        raise ArchiveError("parameter blob length mismatch")
    return header, params


# -- policy archives ---------------------------------------------------


def save_policy(policy: advisory.PolicyModel, path, extra: dict | None = None):
    header = {
        "model": "policy",
        "kind": policy.kind,
        "delta": policy.delta,
        "grid": policy.grid.as_dict(),
        "layout_version": policy.layout_version,
    }
    if extra:
        header["extra"] = extra
    params = {} if policy.net is None else {
        name: p.data for name, p in policy.net.param_dict().items()
    }
    if policy.net is not None:
        header["sizes"] = policy.net.sizes
    save_archive(path, header, params)


def load_policy(path, expect_kind: str | None = None) -> advisory.PolicyModel:
    header, params = load_archive(path)
    if header.get("model") != "policy":
        raise ArchiveError(f"expected a policy archive, got {header.get('model')!r}")
    kind = header["kind"]
    if expect_kind is not None and kind != expect_kind:
        raise ArchiveError(f"archive holds a {kind!r} policy, expected {expect_kind!r}")
    if header["layout_version"] != advisory.INPUT_LAYOUT_VERSION:
        raise ArchiveError(
            f"input layout {header['layout_version']!r} does not match this build "
            f"({advisory.INPUT_LAYOUT_VERSION!r}); retrain or convert the archive"
        )
    grid = advisory.ActionGrid(**header["grid"])
    policy = advisory.PolicyModel(kind=kind, delta=int(header["delta"]), grid=grid)
    if kind != advisory.KIND_OSL:
        net = PerceptronNet(header["sizes"], np.random.default_rng(0))
        for name, p in net.param_dict().items():
            p.data = params[name].copy()
        policy.net = net
    policy.validate()
    return policy


# -- trait-model archives ----------------------------------------------


def save_dti(model: DtiModel, path, extra: dict | None = None):
    header = {
        "model": "dti",
        "hidden": model.hidden,
        "latent_dim": model.latent_dim,
        "window": model.window,
        "beta_recon": model.beta_recon,
        "beta_kl": model.beta_kl,
    }
    if extra:
        header["extra"] = extra
    save_archive(path, header, {name: p.data for name, p in model.param_dict().items()})


def load_dti(path) -> DtiModel:
    header, params = load_archive(path)
    if header.get("model") != "dti":
        raise ArchiveError(f"expected a trait-model archive, got {header.get('model')!r}")
    model = DtiModel(hidden=int(header["hidden"]), latent_dim=int(header["latent_dim"]),
                     window=int(header["window"]), beta_recon=header["beta_recon"],
                     beta_kl=header["beta_kl"])
    for name, p in model.param_dict().items():
        p.data = params[name].copy()
    return model
