"""Greedy layer selection: which layer to prune next, and by how much.

Each round builds a pruned candidate for every eligible layer, scores the
candidates on a calibration dataset, commits the cheapest one, and repeats
until the parameter budget is met.  Two scoring rules are provided:

- hbgs compares each candidate against the original network's output *at
  that layer* (layerwise error, one forward pass per example per round);
- hbgts propagates every candidate to the *final* output through a buffer
  of composite passes, still one pass per example per round instead of one
  per candidate.

Uniform and random baselines share the same bookkeeping so their reports
are directly comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .compensation import apply_pruning, compensate_output, identity_comp
from .metrics import count_stats, param_reduction
from .nets import (
    ConvLayer,
    Network,
    apply_activation,
    check_dataset,
    conv_forward,
    conv_forward_linear,
)
from .selection import (
    SelectionResult,
    flatten_filters,
    fp_backward,
    fp_omp,
    retained_count,
)

SELECTORS = ("hbgs", "hbgts", "uniform", "random")
FP_METHODS = ("omp", "backward")
ERROR_POINTS = ("post", "pre")

FinetuneHook = Callable[[Network, np.ndarray], Network]


def finetune_identity(net: Network, data: np.ndarray) -> Network:
    """Default finetune hook: leave the network untouched."""
    return net


@dataclass(frozen=True)
class PruneConfig:
    """Knobs shared by all layer-selection drivers.

    beta is the target cumulative parameter reduction for the round-based
    drivers and the per-layer filter fraction for the uniform baseline.
    alpha filters are pruned from the chosen layer each round, never below
    floor retained filters.  error_point picks whether layer outputs are
    compared after ("post") or before ("pre") the activation.
    """

    beta: float
    alpha: int = 5
    selector: str = "hbgts"
    fp_method: str = "backward"
    floor: int = 1
    seed: int = 0
    error_point: str = "post"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.floor < 1:
            raise ValueError(f"floor must be >= 1, got {self.floor}")
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")
        if self.fp_method not in FP_METHODS:
            raise ValueError(f"fp_method must be one of {FP_METHODS}")
        if self.error_point not in ERROR_POINTS:
            raise ValueError(f"error_point must be one of {ERROR_POINTS}")


@dataclass(frozen=True)
class PruneRound:
    """Bookkeeping for one committed round.

    errors holds one relative error per layer, math.inf where no finite
    score exists (layer at the floor, or the driver does not score).
    retained and param_reduction describe the state after the commit.
    """

    t: int
    errors: tuple[float, ...]
    chosen_layer: int | None
    retained: tuple[int, ...]
    param_reduction: float
    forward_passes: int
    skipped_refs: int = 0


@dataclass(frozen=True)
class PruneResult:
    network: Network
    rounds: tuple[PruneRound, ...]
    status: str  # "reached" or "partial"


def candidate_for_layer(
    layer: ConvLayer, n_prune: int, fp_method: str
) -> tuple[ConvLayer, SelectionResult]:
    """Prune n_prune filters from one layer, with compensation folded in."""
    n = layer.out_channels
    if not 1 <= n_prune < n:
        raise ValueError(f"cannot prune {n_prune} of {n} filters")
    filters = flatten_filters(layer)
    select = fp_omp if fp_method == "omp" else fp_backward
    sel = select(filters, n_prune / n)
    g = layer.comp if layer.comp is not None else identity_comp(layer)
    update = compensate_output(g, sel, filters)
    return apply_pruning(layer, sel, update), sel


def _measured(layer: ConvLayer, x: np.ndarray, point: str) -> np.ndarray:
    lin = conv_forward_linear(layer, x)
    return lin if point == "pre" else apply_activation(layer.activation, lin)


def collect_layer_outputs(
    net: Network, data: np.ndarray, point: str = "post"
) -> list[list[np.ndarray]]:
    """Per-example, per-layer outputs at the chosen measurement point.

    Propagation between layers always uses post-activation values; only the
    recorded snapshot honours `point`.
    """
    refs = []
    for x in data:
        per_layer = []
        y = x
        for layer in net.layers:
            lin = conv_forward_linear(layer, y)
            post = apply_activation(layer.activation, lin)
            per_layer.append(lin if point == "pre" else post)
            y = post
        refs.append(per_layer)
    return refs


def relative_error_hbgs(
    net: Network,
    candidates: list[ConvLayer | None],
    data: np.ndarray,
    refs: list[list[np.ndarray]],
    point: str = "post",
) -> tuple[np.ndarray, int]:
    """Layerwise relative errors of all candidates in one pass per example.

    Candidate c is applied to the current network's input to layer c and
    compared against refs[i][c] (the original network's layer-c output),
    normalized by that reference's norm.  Zero-norm references are skipped
    and counted.  Layers without a candidate score math.inf.
    """
    errors = np.where([c is not None for c in candidates], 0.0, math.inf)
    skips = 0
    for i, x in enumerate(data):
        y = x
        for c, layer in enumerate(net.layers):
            if candidates[c] is not None:
                ref = refs[i][c]
                ref_norm = float(np.linalg.norm(ref))
                if ref_norm == 0.0:
                    skips += 1
                else:
                    cand_out = _measured(candidates[c], y, point)
                    errors[c] += float(np.linalg.norm(ref - cand_out)) / ref_norm
            y = conv_forward(layer, y)
    return errors, skips


@dataclass
class PropagationBuffer:
    """Hypothesis outputs of one example after a composite tree pass.

    rows[c] (c = 1..C) holds c+1 tensors: rows[c][0] is the unpruned chain,
    rows[c][1] applies the layer-c candidate at layer c, and rows[c][j]
    (j >= 2) carries the layer-(c-j+1) candidate propagated forward through
    unpruned layers.  rows[0] is the input.  At the final layer the stored
    tensors honour the measurement point; interior rows are post-activation.
    """

    rows: list[list[np.ndarray]] = field(default_factory=list)

    def hypothesis_final(self, layer_index: int) -> np.ndarray:
        """Final output under the candidate at 0-based layer_index."""
        n_layers = len(self.rows) - 1
        return self.rows[n_layers][n_layers - layer_index]

    @property
    def final_reference(self) -> np.ndarray:
        return self.rows[-1][0]


def propagate_tree(
    net: Network,
    candidates: list[ConvLayer | None],
    x: np.ndarray,
    point: str = "post",
) -> PropagationBuffer:
    """One composite forward pass carrying every candidate hypothesis.

    A layer with no candidate contributes the unpruned output as its
    hypothesis (aliased, not recomputed, and kept aliased downstream).
    """
    if len(candidates) != len(net):
        raise ValueError(
            f"{len(candidates)} candidates for {len(net)} layers"
        )
    rows: list[list[np.ndarray]] = [[np.asarray(x, dtype=np.float64)]]
    last = len(net) - 1
    for c, layer in enumerate(net.layers):
        prev = rows[-1]
        meas_point = point if c == last else "post"

        def step(lay: ConvLayer, inp: np.ndarray) -> np.ndarray:
            out = conv_forward_linear(lay, inp)
            if meas_point == "post":
                out = apply_activation(lay.activation, out)
            return out

        row = [step(layer, prev[0])]
        cand = candidates[c]
        row.append(step(cand, prev[0]) if cand is not None else row[0])
        for j in range(1, len(prev)):
            row.append(row[0] if prev[j] is prev[0] else step(layer, prev[j]))
        rows.append(row)
    return PropagationBuffer(rows)


def _final_errors(
    buf: PropagationBuffer, eligible: list[int], errors: np.ndarray
) -> int:
    base = buf.final_reference
    base_norm = float(np.linalg.norm(base))
    if base_norm == 0.0:
        return 1
    for c in eligible:
        diff = buf.hypothesis_final(c)
        errors[c] += float(np.linalg.norm(base - diff)) / base_norm
    return 0


def relative_output_error(
    net: Network, reference: Network, data: np.ndarray, point: str = "post"
) -> tuple[float, int]:
    """Dataset-summed relative error between two networks' final outputs."""
    total = 0.0
    skips = 0
    for x in data:
        ref = x
        for layer in reference.layers[:-1]:
            ref = conv_forward(layer, ref)
        ref = _measured(reference.layers[-1], ref, point)
        out = x
        for layer in net.layers[:-1]:
            out = conv_forward(layer, out)
        out = _measured(net.layers[-1], out, point)
        ref_norm = float(np.linalg.norm(ref))
        if ref_norm == 0.0:
            skips += 1
            continue
        total += float(np.linalg.norm(ref - out)) / ref_norm
    return total, skips


class _RoundLoop:
    """Shared round bookkeeping for the greedy drivers."""

    def __init__(self, net: Network, data: np.ndarray, cfg: PruneConfig):
        self.cfg = cfg
        self.data = check_dataset(net, data)
        self.input_shape = (net.in_channels, data.shape[2], data.shape[3])
        self.original_stats = count_stats(net, self.input_shape)
        self.net = net
        self.rounds: list[PruneRound] = []
        # candidate cache: layer index -> (candidate, selection); valid while
        # that layer's weights and comp are untouched
        self.cache: dict[int, tuple[ConvLayer, SelectionResult]] = {}

    def reduction(self) -> float:
        return param_reduction(
            self.original_stats, count_stats(self.net, self.input_shape)
        )

    def eligible(self) -> list[int]:
        return [
            c
            for c, layer in enumerate(self.net.layers)
            if layer.out_channels > self.cfg.floor
        ]

    def candidates(self, eligible: list[int]) -> list[ConvLayer | None]:
        out: list[ConvLayer | None] = [None] * len(self.net)
        for c in eligible:
            if c not in self.cache:
                layer = self.net.layers[c]
                n_prune = min(self.cfg.alpha, layer.out_channels - self.cfg.floor)
                self.cache[c] = candidate_for_layer(layer, n_prune, self.cfg.fp_method)
            out[c] = self.cache[c][0]
        return out

    def commit(
        self,
        t: int,
        chosen: int,
        candidates: list[ConvLayer | None],
        errors: np.ndarray,
        passes: int,
        skips: int,
        finetune: FinetuneHook | None,
    ) -> None:
        self.net = self.net.with_layer(chosen, candidates[chosen])
        self.cache.pop(chosen, None)
        if finetune is not None:
            self.net = finetune(self.net, self.data)
            self.cache.clear()  # the hook may touch any layer
        self.rounds.append(
            PruneRound(
                t=t,
                errors=tuple(float(e) for e in errors),
                chosen_layer=chosen,
                retained=tuple(l.out_channels for l in self.net.layers),
                param_reduction=self.reduction(),
                forward_passes=passes,
                skipped_refs=skips,
            )
        )

    def result(self, status: str) -> PruneResult:
        return PruneResult(self.net, tuple(self.rounds), status)


Observer = Callable[[int, Network, list[ConvLayer | None], np.ndarray], None]


def _run_greedy(
    net: Network,
    data: np.ndarray,
    cfg: PruneConfig,
    score,
    finetune: FinetuneHook | None,
    observer: Observer | None,
) -> PruneResult:
    loop = _RoundLoop(net, data, cfg)
    t = 0
    while loop.reduction() < cfg.beta:
        eligible = loop.eligible()
        if not eligible:
            return loop.result("partial")
        t += 1
        candidates = loop.candidates(eligible)
        errors, passes, skips = score(loop.net, candidates, eligible)
        if observer is not None:
            observer(t, loop.net, candidates, errors)
        chosen = int(np.argmin(errors))  # ties -> smallest layer index
        loop.commit(t, chosen, candidates, errors, passes, skips, finetune)
    return loop.result("reached")


def hbgs(
    net: Network,
    data: np.ndarray,
    cfg: PruneConfig,
    finetune: FinetuneHook | None = None,
    observer: Observer | None = None,
) -> PruneResult:
    """Greedy layer selection by layerwise candidate error."""
    data = check_dataset(net, data)
    refs = collect_layer_outputs(net, data, cfg.error_point)

    def score(current: Network, candidates, eligible):
        errors, skips = relative_error_hbgs(
            current, candidates, data, refs, cfg.error_point
        )
        return errors, len(data), skips

    return _run_greedy(net, data, cfg, score, finetune, observer)


def hbgts(
    net: Network,
    data: np.ndarray,
    cfg: PruneConfig,
    finetune: FinetuneHook | None = None,
    observer: Observer | None = None,
) -> PruneResult:
    """Greedy layer selection by final-output candidate error.

    Every candidate hypothesis is carried to the final layer by one
    composite tree pass per example, so a round costs len(data) passes
    rather than len(net) * len(data).
    """
    data = check_dataset(net, data)

    def score(current: Network, candidates, eligible):
        errors = np.where([c is not None for c in candidates], 0.0, math.inf)
        skips = 0
        for x in data:
            buf = propagate_tree(current, candidates, x, cfg.error_point)
            skips += _final_errors(buf, eligible, errors)
        return errors, len(data), skips

    return _run_greedy(net, data, cfg, score, finetune, observer)


def random_baseline(
    net: Network,
    data: np.ndarray,
    cfg: PruneConfig,
    finetune: FinetuneHook | None = None,
) -> PruneResult:
    """Rounds like the greedy drivers, but the layer is drawn at random."""
    loop = _RoundLoop(net, data, cfg)
    t = 0
    while loop.reduction() < cfg.beta:
        eligible = loop.eligible()
        if not eligible:
            return loop.result("partial")
        t += 1
        rng = np.random.default_rng([cfg.seed, t])
        chosen = int(rng.choice(eligible))
        candidates: list[ConvLayer | None] = [None] * len(loop.net)
        layer = loop.net.layers[chosen]
        n_prune = min(cfg.alpha, layer.out_channels - cfg.floor)
        candidates[chosen] = candidate_for_layer(layer, n_prune, cfg.fp_method)[0]
        errors = np.full(len(loop.net), math.inf)
        loop.commit(t, chosen, candidates, errors, 0, 0, finetune)
    return loop.result("reached")


def uniform_baseline(net: Network, data: np.ndarray, cfg: PruneConfig) -> PruneResult:
    """Prune the same filter fraction (cfg.beta) from every layer at once."""
    loop = _RoundLoop(net, data, cfg)
    pruned = loop.net
    for c, layer in enumerate(pruned.layers):
        n = layer.out_channels
        n_keep = max(retained_count(n, cfg.beta), min(cfg.floor, n))
        if n_keep >= n:
            continue
        cand, _ = candidate_for_layer(layer, n - n_keep, cfg.fp_method)
        pruned = pruned.with_layer(c, cand)
    loop.net = pruned
    loop.rounds.append(
        PruneRound(
            t=1,
            errors=tuple(math.inf for _ in pruned.layers),
            chosen_layer=None,
            retained=tuple(l.out_channels for l in pruned.layers),
            param_reduction=loop.reduction(),
            forward_passes=0,
            skipped_refs=0,
        )
    )
    return loop.result("reached")


DRIVERS = {
    "hbgs": hbgs,
    "hbgts": hbgts,
    "uniform": uniform_baseline,
    "random": random_baseline,
}


def run_selector(
    net: Network,
    data: np.ndarray,
    cfg: PruneConfig,
    finetune: FinetuneHook | None = None,
) -> PruneResult:
    """Dispatch to the configured driver."""
    if cfg.selector == "hbgs":
        return hbgs(net, data, cfg, finetune)
    if cfg.selector == "hbgts":
        return hbgts(net, data, cfg, finetune)
    if cfg.selector == "random":
        return random_baseline(net, data, cfg, finetune)
    return uniform_baseline(net, data, cfg)
