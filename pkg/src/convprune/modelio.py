"""On-disk formats: models (structured text), tensors (binary), prune reports.

Models are JSON with flat row-major weight lists, so they stay readable and
diffable; floats round-trip exactly through repr.  Tensors use a small
binary container: magic "PKT1", little-endian u32 rank, u32 dims, then the
float64 payload in row-major order.  Reports echo the run configuration,
every committed round, and the per-round heatmap table as embedded CSV; the
encoder is deterministic (sorted keys, no timestamps) so identical runs
produce byte-identical files.
"""
from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .metrics import ModelStats, count_stats, reduction_report
from .nets import ConvLayer, DimensionError, Network
from .search import PruneConfig, PruneResult, PruneRound

MODEL_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
TENSOR_MAGIC = b"PKT1"
_U32_MAX = 2**32 - 1


class ModelIOError(ValueError):
    """Anything wrong with a model, tensor, or report file."""


class SchemaError(ModelIOError):
    """File declares a schema version this code does not understand."""


class TensorFormatError(ModelIOError):
    """Malformed binary tensor container."""


# --------------------------------------------------------------------------
# models


def _layer_to_json(layer: ConvLayer) -> dict:
    if not np.all(np.isfinite(layer.weights)):
        raise ModelIOError("layer weights contain non-finite values")
    entry = {
        "in_channels": layer.in_channels,
        "out_channels": layer.out_channels,
        "kernel_size": layer.kernel_size,
        "activation": layer.activation,
        "weights": layer.weights.ravel().tolist(),
        "comp": None,
    }
    if layer.comp is not None:
        if not np.all(np.isfinite(layer.comp)):
            raise ModelIOError("layer comp map contains non-finite values")
        entry["comp"] = {
            "shape": list(layer.comp.shape),
            "data": layer.comp.ravel().tolist(),
        }
    return entry


def _layer_from_json(entry: dict, index: int) -> ConvLayer:
    try:
        n = int(entry["out_channels"])
        m = int(entry["in_channels"])
        k = int(entry["kernel_size"])
        activation = entry["activation"]
        flat = entry["weights"]
        comp_entry = entry.get("comp")
    except (KeyError, TypeError) as exc:
        raise ModelIOError(f"layer {index}: missing or malformed field ({exc})") from None
    expected = n * m * k * k
    if len(flat) != expected:
        raise ModelIOError(
            f"layer {index}: weights hold {len(flat)} values, expected {expected}"
        )
    weights = np.asarray(flat, dtype=np.float64).reshape(n, m, k, k)
    comp = None
    if comp_entry is not None:
        try:
            rows, cols = (int(v) for v in comp_entry["shape"])
            comp_flat = comp_entry["data"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelIOError(f"layer {index}: malformed comp map ({exc})") from None
        if len(comp_flat) != rows * cols:
            raise ModelIOError(
                f"layer {index}: comp map holds {len(comp_flat)} values, "
                f"expected {rows * cols}"
            )
        comp = np.asarray(comp_flat, dtype=np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(weights)) or (
        comp is not None and not np.all(np.isfinite(comp))
    ):
        raise ModelIOError(f"layer {index}: non-finite values")
    try:
        return ConvLayer(weights=weights, comp=comp, activation=activation)
    except (DimensionError, ValueError) as exc:
        raise ModelIOError(f"layer {index}: {exc}") from None


def write_model(net: Network, input_shape: tuple[int, int, int], path) -> None:
    m0, h, w = (int(v) for v in input_shape)
    if m0 != net.in_channels:
        raise ModelIOError(
            f"input shape declares {m0} channels, network expects {net.in_channels}"
        )
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "input_shape": [m0, h, w],
        "layers": [_layer_to_json(layer) for layer in net.layers],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_model(path) -> tuple[Network, tuple[int, int, int]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"not a model file: {exc}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ModelIOError("not a model file: no schema_version")
    if doc["schema_version"] != MODEL_SCHEMA_VERSION:
        raise SchemaError(
            f"model schema {doc['schema_version']} unsupported "
            f"(expected {MODEL_SCHEMA_VERSION})"
        )
    try:
        shape = tuple(int(v) for v in doc["input_shape"])
        entries = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed model file: {exc}") from None
    if len(shape) != 3:
        raise ModelIOError(f"input_shape must have 3 entries, got {shape}")
    layers = [_layer_from_json(entry, i) for i, entry in enumerate(entries)]
    try:
        net = Network(layers)
    except DimensionError as exc:
        raise ModelIOError(f"incompatible layer chain: {exc}") from None
    if net.in_channels != shape[0]:
        raise ModelIOError(
            f"input_shape declares {shape[0]} channels, network expects "
            f"{net.in_channels}"
        )
    return net, shape


# --------------------------------------------------------------------------
# tensors


def write_tensor(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        raise TensorFormatError("rank-0 tensors are not supported")
    if any(d > _U32_MAX for d in arr.shape) or arr.ndim > _U32_MAX:
        raise TensorFormatError(f"dimensions {arr.shape} overflow the container")
    header = struct.pack("<4sI", TENSOR_MAGIC, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != TENSOR_MAGIC:
        raise TensorFormatError("bad magic: not a tensor file")
    (rank,) = struct.unpack_from("<I", blob, 4)
    if rank == 0:
        raise TensorFormatError("rank-0 tensors are not supported")
    if len(blob) < 8 + 4 * rank:
        raise TensorFormatError("truncated tensor header")
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    count = math.prod(dims)
    if count == 0:
        raise TensorFormatError(f"empty dimensions {dims}")
    payload = len(blob) - 8 - 4 * rank
    if count * 8 != payload:
        raise TensorFormatError(
            f"payload holds {payload // 8} values, dims {dims} require {count}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=8 + 4 * rank)
    return data.reshape(dims).astype(np.float64)


def read_dataset(path) -> np.ndarray:
    """A dataset file is a rank-4 tensor: (examples, channels, H, W)."""
    data = read_tensor(path)
    if data.ndim != 4:
        raise TensorFormatError(
            f"dataset tensor must have rank 4, got rank {data.ndim}"
        )
    return data


# --------------------------------------------------------------------------
# prune reports


@dataclass(frozen=True)
class PruneReport:
    config: dict
    status: str
    rounds: tuple[PruneRound, ...]
    before: dict
    after: dict
    param_drop_pct: float
    flops_drop_pct: float


def _stats_dict(stats: ModelStats) -> dict:
    return {
        "params": stats.params,
        "flops": stats.flops,
        "per_layer": [
            {
                "params": s.params,
                "flops": s.flops,
                "out_channels": s.out_channels,
                "width": s.width,
            }
            for s in stats.per_layer
        ],
    }


def build_report(
    cfg: PruneConfig,
    result: PruneResult,
    original: Network,
    input_shape: tuple[int, int, int],
) -> PruneReport:
    before = count_stats(original, input_shape)
    after = count_stats(result.network, input_shape)
    drops = reduction_report(before, after)
    return PruneReport(
        config=dataclasses.asdict(cfg),
        status=result.status,
        rounds=result.rounds,
        before=_stats_dict(before),
        after=_stats_dict(after),
        param_drop_pct=drops.param_drop_pct,
        flops_drop_pct=drops.flops_drop_pct,
    )


def _encode_error(e: float):
    return None if math.isinf(e) else float(e)


def _round_to_json(r: PruneRound) -> dict:
    return {
        "t": r.t,
        "errors": [_encode_error(e) for e in r.errors],
        "chosen_layer": None if r.chosen_layer is None else r.chosen_layer + 1,
        "retained": list(r.retained),
        "param_reduction": r.param_reduction,
        "forward_passes": r.forward_passes,
        "skipped_refs": r.skipped_refs,
    }


def _round_from_json(entry: dict) -> PruneRound:
    chosen = entry["chosen_layer"]
    return PruneRound(
        t=int(entry["t"]),
        errors=tuple(math.inf if e is None else float(e) for e in entry["errors"]),
        chosen_layer=None if chosen is None else int(chosen) - 1,
        retained=tuple(int(v) for v in entry["retained"]),
        param_reduction=float(entry["param_reduction"]),
        forward_passes=int(entry["forward_passes"]),
        skipped_refs=int(entry["skipped_refs"]),
    )


def heatmap_csv(report: PruneReport) -> str:
    """Per-round, per-layer table: relative error and cumulative pruned %.

    Layers are numbered from 1; rows are sorted by (round, layer).  Layers
    without a finite error that round print "inf".
    """
    originals = [entry["out_channels"] for entry in report.before["per_layer"]]
    lines = ["round,layer,relative_error,pruned_percent"]
    for r in sorted(report.rounds, key=lambda r: r.t):
        for c, n0 in enumerate(originals):
            err = "inf" if math.isinf(r.errors[c]) else repr(float(r.errors[c]))
            pct = round(100.0 * (1.0 - r.retained[c] / n0), 1)
            lines.append(f"{r.t},{c + 1},{err},{pct}")
    return "\n".join(lines) + "\n"


def write_report(report: PruneReport, path) -> None:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": report.config,
        "status": report.status,
        "rounds": [_round_to_json(r) for r in report.rounds],
        "before": report.before,
        "after": report.after,
        "param_drop_pct": report.param_drop_pct,
        "flops_drop_pct": report.flops_drop_pct,
        "heatmap_csv": heatmap_csv(report),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_report(path) -> PruneReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"not a report file: {exc}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ModelIOError("not a report file: no schema_version")
    if doc["schema_version"] != REPORT_SCHEMA_VERSION:
        raise SchemaError(
            f"report schema {doc['schema_version']} unsupported "
            f"(expected {REPORT_SCHEMA_VERSION})"
        )
    try:
        return PruneReport(
            config=doc["config"],
            status=doc["status"],
            rounds=tuple(_round_from_json(r) for r in doc["rounds"]),
            before=doc["before"],
            after=doc["after"],
            param_drop_pct=float(doc["param_drop_pct"]),
            flops_drop_pct=float(doc["flops_drop_pct"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed report file: {exc}") from None
