"""Benchmark suites: single-axis, compositional and naturalistic RMSE tables.

Each suite generates held-out morph tuples from an evaluation seed namespace
(disjoint from training namespaces by construction), runs every configured
engine on every tuple and aggregates envelope-domain RMSE per
(engine, axis-combination) cell.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .engines import dtw_morph
from .envelope import FRAME_COUNT, Envelope, rmse
from .errors import (
    CheckpointMissing,
    GenerationExhausted,
    InvalidArgument,
    InvalidExpectation,
    TemplateMissing,
)
from .fileio import atomic_write_text
from .nn.models import Autoencoder, Mapper
from .seeding import (
    NS_EVAL_COMPOSITIONAL,
    NS_EVAL_NATURALISTIC,
    NS_EVAL_SINGLE_AXIS,
    TRAINING_NAMESPACES,
    derive_seed,
)
from .synth import (
    AXIS_NAMES,
    GaussianKernel,
    ParamRanges,
    TemplateKernel,
    bundled_template,
    bundled_template_names,
    generate_tuple_with_rng,
    ALPHA_GRID,
)


class SuiteKind(Enum):
    SINGLE_AXIS = "single-axis"
    COMPOSITIONAL = "compositional"
    NATURALISTIC = "naturalistic"


# Canonical engine column order (baselines first, learned engine last).
ENGINE_ORDER = ("audio-mix", "dtw", "embed-mix", "learned")

_SUITE_NAMESPACE = {
    SuiteKind.SINGLE_AXIS: NS_EVAL_SINGLE_AXIS,
    SuiteKind.COMPOSITIONAL: NS_EVAL_COMPOSITIONAL,
    SuiteKind.NATURALISTIC: NS_EVAL_NATURALISTIC,
}

_SINGLE_COMBOS = tuple((name,) for name in AXIS_NAMES)
# Table-style compositional rows: the six pairs, four triples, then all four.
_COMPOSITIONAL_COMBOS = tuple(
    tuple(c)
    for r in (2, 3, 4)
    for c in itertools.combinations(AXIS_NAMES, r)
)


def default_combos(kind: SuiteKind) -> tuple[tuple[str, ...], ...]:
    if kind == SuiteKind.COMPOSITIONAL:
        return _COMPOSITIONAL_COMBOS
    return _SINGLE_COMBOS


def combo_label(combo: tuple[str, ...]) -> str:
    return "+".join(combo)


@dataclass(frozen=True)
class SuiteConfig:
    kind: SuiteKind
    count_per_cell: int = 1000
    seed: int = 0
    engines: tuple[str, ...] = ENGINE_ORDER
    combos: tuple[tuple[str, ...], ...] | None = None
    alpha_mode: str = "grid"
    ranges: ParamRanges = field(default_factory=ParamRanges)
    templates: tuple[str, ...] = ()  # naturalistic suite; empty -> all bundled

    def __post_init__(self):
        if self.count_per_cell < 1:
            raise InvalidArgument("count_per_cell must be >= 1")
        if not self.engines:
            raise InvalidArgument("engine list must be non-empty")

    def resolved_combos(self) -> tuple[tuple[str, ...], ...]:
        return self.combos if self.combos is not None else default_combos(self.kind)


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class BenchmarkResult:
    kind: str
    seed: int
    count_per_cell: int
    engines: tuple[str, ...]
    combos: tuple[str, ...]
    cells: dict  # combo label -> engine -> CellStats
    overall: dict  # engine -> mean over all tuples

    def cell(self, engine: str, combo: str) -> CellStats:
        try:
            return self.cells[combo][engine]
        except KeyError as exc:
            raise InvalidExpectation(f"unknown cell ({engine}, {combo})") from exc


def _make_kernels(cfg: SuiteConfig):
    if cfg.kind != SuiteKind.NATURALISTIC:
        return [GaussianKernel()]
    names = cfg.templates or bundled_template_names()
    if not names:
        raise TemplateMissing("naturalistic suite requires at least one impulse template")
    return [TemplateKernel(bundled_template(n)) for n in names]


def _generate_cell(cfg: SuiteConfig, namespace: int, cell_index: int, combo, kernels):
    n = cfg.count_per_cell
    a = np.empty((n, FRAME_COUNT), dtype=np.float32)
    b = np.empty((n, FRAME_COUNT), dtype=np.float32)
    m = np.empty((n, FRAME_COUNT), dtype=np.float32)
    alphas = np.empty(n, dtype=np.float64)
    for i in range(n):
        seed = derive_seed(cfg.seed, namespace, (cell_index << 32) | i)
        rng = np.random.Generator(np.random.PCG64(seed))
        kernel = kernels[int(rng.integers(len(kernels)))] if len(kernels) > 1 else kernels[0]
        if cfg.alpha_mode == "grid":
            alpha = float(rng.choice(ALPHA_GRID))
        else:
            alpha = float(rng.uniform(0.0, 1.0))
        try:
            tup = generate_tuple_with_rng(combo, alpha, rng, seed, kernel=kernel, ranges=cfg.ranges)
        except GenerationExhausted as exc:
            raise GenerationExhausted(str(exc), tuple_index=i) from exc
        a[i], b[i], m[i] = tup.e_a.frames, tup.e_b.frames, tup.e_morph.frames
        alphas[i] = alpha
    return a, b, m, alphas


def _rmse_rows(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return np.sqrt(np.mean(diff * diff, axis=1))


def _engine_errors(engine, a, b, m, alphas, autoencoder, mapper):
    n = a.shape[0]
    if engine == "oracle":
        return np.zeros(n, dtype=np.float64)
    if engine == "audio-mix":
        mixed = (1.0 - alphas)[:, None] * a.astype(np.float64) + alphas[:, None] * b.astype(np.float64)
        return _rmse_rows(mixed.astype(np.float32), m)
    if engine == "dtw":
        errors = np.empty(n, dtype=np.float64)
        for i in range(n):
            out = dtw_morph(Envelope(a[i]), Envelope(b[i]), float(alphas[i]))
            errors[i] = rmse(out, Envelope(m[i]))
        return errors
    if engine == "embed-mix":
        if autoencoder is None:
            raise CheckpointMissing("embed-mix requires an autoencoder checkpoint")
        z_a = autoencoder.encode_batch(a)
        z_b = autoencoder.encode_batch(b)
        # float32 weights, mirroring the embed_mix engine arithmetic
        w_b = alphas.astype(np.float32)[:, None]
        w_a = np.float32(1.0) - w_b
        z = w_a * z_a + w_b * z_b
        decoded = autoencoder.decode_batch(z)
        return _rmse_rows(np.clip(decoded, 0.0, 1.0).astype(np.float32), m)
    if engine == "learned":
        if autoencoder is None or mapper is None:
            raise CheckpointMissing("learned engine requires autoencoder and mapper checkpoints")
        from .nn.models import mapper_features

        z_a = autoencoder.encode_batch(a)
        z_b = autoencoder.encode_batch(b)
        feats = np.empty((n, z_a.shape[1] * 3), dtype=np.float32)
        for i in range(n):
            feats[i] = mapper_features(z_a[i], z_b[i], float(alphas[i]))
        z = mapper.forward_batch(feats)
        # endpoint contract: alpha 0/1 short-circuits to the reconstruction
        z[alphas == 0.0] = z_a[alphas == 0.0]
        z[alphas == 1.0] = z_b[alphas == 1.0]
        decoded = autoencoder.decode_batch(z)
        return _rmse_rows(np.clip(decoded, 0.0, 1.0).astype(np.float32), m)
    raise InvalidArgument(f"unknown engine {engine!r}")


def run_suite(
    cfg: SuiteConfig,
    *,
    autoencoder: Autoencoder | None = None,
    mapper: Mapper | None = None,
) -> BenchmarkResult:
    """Generate held-out tuples and aggregate per-cell RMSE for every engine."""
    namespace = _SUITE_NAMESPACE[cfg.kind]
    assert namespace not in TRAINING_NAMESPACES, "evaluation namespace overlaps training"
    kernels = _make_kernels(cfg)
    needs_models = {"embed-mix", "learned"} & set(cfg.engines)
    if needs_models and autoencoder is None:
        raise CheckpointMissing(f"engines {sorted(needs_models)} require an autoencoder")
    if "learned" in cfg.engines and mapper is None:
        raise CheckpointMissing("the learned engine requires a mapper checkpoint")

    combos = cfg.resolved_combos()
    labels = tuple(combo_label(c) for c in combos)
    cells: dict[str, dict[str, CellStats]] = {}
    pooled: dict[str, list[np.ndarray]] = {e: [] for e in cfg.engines}
    for cell_index, combo in enumerate(combos):
        a, b, m, alphas = _generate_cell(cfg, namespace, cell_index, combo, kernels)
        row: dict[str, CellStats] = {}
        for engine in cfg.engines:
            errors = _engine_errors(engine, a, b, m, alphas, autoencoder, mapper)
            row[engine] = CellStats(float(np.mean(errors)), float(np.std(errors)), errors.size)
            pooled[engine].append(errors)
        cells[combo_label(combo)] = row
    overall = {e: float(np.mean(np.concatenate(pooled[e]))) for e in cfg.engines}
    return BenchmarkResult(
        kind=cfg.kind.value,
        seed=cfg.seed,
        count_per_cell=cfg.count_per_cell,
        engines=tuple(cfg.engines),
        combos=labels,
        cells=cells,
        overall=overall,
    )


def _round3(x: float) -> str:
    return f"{round(x, 3):.3f}"


def emit_table(result: BenchmarkResult, fmt: str = "markdown") -> str:
    """Render the per-cell means as markdown (row minimum bolded) or CSV."""
    if fmt not in ("markdown", "csv"):
        raise InvalidArgument(f"unknown table format {fmt!r}")
    rows = []
    for combo in result.combos:
        means = [result.cells[combo][e].mean for e in result.engines]
        rows.append((combo, means))
    rows.append(("overall", [result.overall[e] for e in result.engines]))

    if fmt == "csv":
        lines = ["combination," + ",".join(result.engines)]
        for name, means in rows:
            lines.append(name + "," + ",".join(_round3(v) for v in means))
        return "\n".join(lines) + "\n"

    header = "| combination | " + " | ".join(result.engines) + " |"
    sep = "|---" * (len(result.engines) + 1) + "|"
    lines = [header, sep]
    for name, means in rows:
        best = int(np.argmin(means))  # leftmost engine wins ties
        cells = [
            f"**{_round3(v)}**" if k == best else _round3(v) for k, v in enumerate(means)
        ]
        lines.append("| " + " | ".join([name] + cells) + " |")
    return "\n".join(lines) + "\n"


_TERM_RE = re.compile(r"^\s*(cell|overall)\(\s*([\w.+-]+)\s*(?:,\s*([\w.+-]+)\s*)?\)\s*$")
_EXPR_RE = re.compile(r"^(?P<lhs>.+?)(?P<op><=|<)(?P<rhs>.+)$")


def _eval_term(result: BenchmarkResult, term: str) -> float:
    match = _TERM_RE.match(term)
    if not match:
        raise InvalidExpectation(f"cannot parse term {term!r}")
    kind, engine, combo = match.groups()
    if kind == "overall":
        if combo is not None:
            raise InvalidExpectation(f"overall() takes a single engine: {term!r}")
        if engine not in result.overall:
            raise InvalidExpectation(f"unknown engine {engine!r}")
        return result.overall[engine]
    if combo is None:
        raise InvalidExpectation(f"cell() needs (engine, combination): {term!r}")
    if engine not in result.engines:
        raise InvalidExpectation(f"unknown engine {engine!r}")
    if combo not in result.cells:
        raise InvalidExpectation(f"unknown combination {combo!r}")
    return result.cells[combo][engine].mean


def check_orderings(result: BenchmarkResult, expectations) -> list[dict]:
    """Evaluate declared inequalities against a result; returns verdict rows."""
    if isinstance(expectations, str):
        expectations = [
            line.strip()
            for line in expectations.splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
    verdicts = []
    for expr in expectations:
        match = _EXPR_RE.match(expr)
        if not match:
            raise InvalidExpectation(f"cannot parse expectation {expr!r}")
        lhs = _eval_term(result, match.group("lhs"))
        rhs = _eval_term(result, match.group("rhs"))
        op = match.group("op")
        passed = lhs <= rhs if op == "<=" else lhs < rhs
        verdicts.append(
            {"expectation": expr, "lhs": lhs, "rhs": rhs, "passed": bool(passed)}
        )
    return verdicts


def default_expectations(kind: SuiteKind, engines=ENGINE_ORDER) -> list[str]:
    """Ordering expectations mirroring the reported result-table patterns."""
    baselines = [e for e in engines if e not in ("learned", "oracle")]
    exps: list[str] = []
    if kind == SuiteKind.SINGLE_AXIS:
        for combo in ("placement", "quantity"):
            for baseline in baselines:
                exps.append(f"cell(learned, {combo}) < cell({baseline}, {combo})")
        for baseline in baselines:
            exps.append(f"overall(learned) <= overall({baseline})")
    elif kind == SuiteKind.COMPOSITIONAL:
        for combo in _COMPOSITIONAL_COMBOS:
            if len(combo) != 2 or not ({"placement", "quantity"} & set(combo)):
                continue
            label = combo_label(combo)
            for baseline in ("audio-mix", "dtw"):
                if baseline in engines:
                    exps.append(f"cell(learned, {label}) < cell({baseline}, {label})")
    elif kind == SuiteKind.NATURALISTIC:
        for combo in ("placement", "quantity"):
            if "audio-mix" in engines:
                exps.append(f"cell(learned, {combo}) < cell(audio-mix, {combo})")
    return exps


def result_to_json(result: BenchmarkResult) -> str:
    payload = {
        "kind": result.kind,
        "seed": result.seed,
        "count_per_cell": result.count_per_cell,
        "engines": list(result.engines),
        "combos": list(result.combos),
        "cells": {
            combo: {
                engine: {"mean": stats.mean, "std": stats.std, "count": stats.count}
                for engine, stats in row.items()
            }
            for combo, row in result.cells.items()
        },
        "overall": result.overall,
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    run_id = hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]
    return json.dumps({"run_id": run_id, **payload}, indent=2, sort_keys=True)


def save_results(result: BenchmarkResult, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "results.json",
        "csv": out_dir / "report.csv",
        "markdown": out_dir / "report.md",
    }
    atomic_write_text(paths["json"], result_to_json(result))
    atomic_write_text(paths["csv"], emit_table(result, "csv"))
    atomic_write_text(paths["markdown"], emit_table(result, "markdown"))
    return paths
