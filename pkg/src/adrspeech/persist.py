"""Versioned on-disk formats for models and the feature cache.

Models are JSON containers carrying a magic string, a schema version, and the
feature-table version; loaders refuse any mismatch so a model can never be
applied to features laid out differently.

The combined feature cache is binary: an 8-byte magic, one format version
byte, one feature-table version byte, then length-prefixed records of
float64 frame matrices.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .adr import SOMCodebook, StandardizationStats
from .errors import ModelFormatError
from .features import FEATURE_COUNT, FEATURE_TABLE_VERSION, FrameFeatureMatrix
from .models import KdeNaiveBayesModel, SvrModel

MODEL_MAGIC = "adrspeech-model"
MODEL_SCHEMA_VERSION = 1
CACHE_MAGIC = b"ADRSFEAT"
CACHE_VERSION = 1


def _save(path: str | Path, kind: str, payload: dict) -> None:
    doc = {"magic": MODEL_MAGIC, "schema_version": MODEL_SCHEMA_VERSION,
           "feature_table_version": FEATURE_TABLE_VERSION,
           "kind": kind, "payload": payload}
    Path(path).write_text(json.dumps(doc))


def _load(path: str | Path, kind: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if doc.get("magic") != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {doc.get('magic')!r}")
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(f"{path}: schema version {doc.get('schema_version')} "
                               f"unsupported (want {MODEL_SCHEMA_VERSION})")
    if doc.get("feature_table_version") != FEATURE_TABLE_VERSION:
        raise ModelFormatError(
            f"{path}: feature table version {doc.get('feature_table_version')} "
            f"does not match this build ({FEATURE_TABLE_VERSION})")
    if doc.get("kind") != kind:
        raise ModelFormatError(f"{path}: model kind {doc.get('kind')!r}, expected {kind!r}")
    return doc["payload"]


def save_adr_model(path: str | Path, stats: StandardizationStats,
                   codebook: SOMCodebook) -> None:
    _save(path, "adr", {
        "mean": stats.mean.tolist(), "std": stats.std.tolist(),
        "constant_columns": stats.constant_columns,
        "weights": codebook.weights.tolist(),
        "epochs": codebook.epochs, "seed": codebook.seed,
        "qe_initial": codebook.quantization_error_initial,
        "qe_final": codebook.quantization_error_final,
    })


def load_adr_model(path: str | Path) -> tuple[StandardizationStats, SOMCodebook]:
    p = _load(path, "adr")
    stats = StandardizationStats(mean=np.array(p["mean"]), std=np.array(p["std"]),
                                 constant_columns=list(p["constant_columns"]))
    codebook = SOMCodebook(weights=np.array(p["weights"]), epochs=p["epochs"],
                           seed=p["seed"],
                           quantization_error_initial=p["qe_initial"],
                           quantization_error_final=p["qe_final"])
    return stats, codebook


def save_nb_model(path: str | Path, model: KdeNaiveBayesModel) -> None:
    _save(path, "nb", {
        "classes": model.classes, "priors": model.priors.tolist(),
        "values": [v.tolist() for v in model.values],
        "bandwidths": model.bandwidths.tolist(),
    })


def load_nb_model(path: str | Path) -> KdeNaiveBayesModel:
    p = _load(path, "nb")
    return KdeNaiveBayesModel(classes=list(p["classes"]),
                              priors=np.array(p["priors"]),
                              values=[np.array(v) for v in p["values"]],
                              bandwidths=np.array(p["bandwidths"]))


def save_svr_model(path: str | Path, model: SvrModel) -> None:
    _save(path, "svr", {
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "bias": model.bias, "gamma": model.gamma, "epsilon": model.epsilon,
        "c_box": model.c_box, "scaler_mean": model.scaler_mean.tolist(),
        "scaler_std": model.scaler_std.tolist(),
        "clamp": list(model.clamp) if model.clamp else None,
        "converged": model.converged, "iterations": model.iterations,
        "kkt_residual": model.kkt_residual,
        "dual_objective": model.dual_objective,
    })


def load_svr_model(path: str | Path) -> SvrModel:
    p = _load(path, "svr")
    return SvrModel(
        support_vectors=np.array(p["support_vectors"], dtype=np.float64).reshape(
            len(p["support_vectors"]), -1),
        dual_coef=np.array(p["dual_coef"]), bias=p["bias"], gamma=p["gamma"],
        epsilon=p["epsilon"], c_box=p["c_box"],
        scaler_mean=np.array(p["scaler_mean"]), scaler_std=np.array(p["scaler_std"]),
        clamp=tuple(p["clamp"]) if p["clamp"] else None,
        converged=p["converged"], iterations=p["iterations"],
        kkt_residual=p["kkt_residual"], dual_objective=p["dual_objective"])


def write_feature_cache(path: str | Path, matrices: list[FrameFeatureMatrix]) -> None:
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<BB", CACHE_VERSION, FEATURE_TABLE_VERSION))
        fh.write(struct.pack("<I", len(matrices)))
        for m in matrices:
            rid = m.recording_id.encode()
            fh.write(struct.pack("<H", len(rid)))
            fh.write(rid)
            fh.write(struct.pack("<IH", m.values.shape[0], m.values.shape[1]))
            fh.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())


def read_feature_cache(path: str | Path) -> list[FrameFeatureMatrix]:
    with open(path, "rb") as fh:
        if fh.read(8) != CACHE_MAGIC:
            raise ModelFormatError(f"{path}: not a feature cache")
        version, ftv = struct.unpack("<BB", fh.read(2))
        if version != CACHE_VERSION:
            raise ModelFormatError(f"{path}: cache version {version} unsupported")
        if ftv != FEATURE_TABLE_VERSION:
            raise ModelFormatError(f"{path}: feature table version {ftv} does not "
                                   f"match this build ({FEATURE_TABLE_VERSION})")
        count, = struct.unpack("<I", fh.read(4))
        out = []
        for _ in range(count):
            id_len, = struct.unpack("<H", fh.read(2))
            rid = fh.read(id_len).decode()
            n_frames, n_feat = struct.unpack("<IH", fh.read(6))
            if n_feat != FEATURE_COUNT:
                raise ModelFormatError(f"{path}: record {rid} has {n_feat} features")
            data = np.frombuffer(fh.read(8 * n_frames * n_feat), dtype="<f8")
            out.append(FrameFeatureMatrix(recording_id=rid,
                                          values=data.reshape(n_frames, n_feat).copy()))
        return out
