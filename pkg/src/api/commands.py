"""
Command handlers for the three usage modes plus schema/validate.

Each handler takes a validated RunConfig and writes its artifacts through a
RunStore; ``run`` maps errors onto exit codes.
"""

import json
from pathlib import Path
from typing import Optional

from src.core.config import settings
from src.core.errors import ConfigError, ForgeError
from src.core.logging import logger
from src.models.run_config import DatasetConfig, GateSetConfig, Mode, RunConfig, config_schema, parse_config
from src.services.datasets import Dataset, build_dataset, export_coords
from src.services.discover_service import SearchConfig, discover_gateset
from src.services.evaluate_service import ComparisonReport, CostWeights, compare_gatesets, evaluate_gateset
from src.services.gatelib import GateSet, assemble_gateset
from src.services.matcore import RngHandle
from src.storage.run_store import RunStore

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# child indices of the run seed
SEED_EVAL, SEED_GS1, SEED_GS2, SEED_SEARCH = 0, 1, 2, 3


def make_gateset(cfg: GateSetConfig, rng: RngHandle) -> GateSet:
    return assemble_gateset(cfg.specs(), cfg.params, rng, cfg.include_daggers, cfg.label)


def make_dataset(cfg: DatasetConfig, run_seed: int) -> Dataset:
    seed = cfg.seed if cfg.seed is not None else run_seed
    ds = build_dataset(cfg.kind, cfg.n_qubits, cfg.size, seed, cfg.resolution, cfg.paths)
    logger.info(f"dataset {ds.kind.value}: {len(ds)} x {ds.n_qubits}-qubit unitaries")
    return ds


def _write_coords(store: RunStore, ds: Dataset, cfg: RunConfig) -> None:
    if cfg.export_coords and ds.n_qubits <= 2:
        store.write_text("coords.csv", export_coords(ds))


def _write_comparison(store: RunStore, comparison: ComparisonReport) -> None:
    store.write_csv("report.csv", ["index", "pf1", "cd1", "pf2", "cd2"], comparison.rows())
    store.write_json("summary.json", comparison.summary())
    store.write_circuits("gs1", comparison.report1.results)
    store.write_circuits("gs2", comparison.report2.results)


def run_compile(cfg: RunConfig, store: RunStore) -> dict:
    rng = RngHandle(cfg.seed)
    ds = make_dataset(cfg.dataset, cfg.seed)
    gs = make_gateset(cfg.gs1, rng.child(SEED_GS1))
    report = evaluate_gateset(gs, ds, cfg.pipeline.to_config(), rng.child(SEED_EVAL), cfg.threads)
    store.write_csv("report.csv", ["index", "pf", "cd"], zip(range(len(report)), report.pf.tolist(), report.cd.tolist()))
    store.write_json("summary.json", report.summary())
    store.write_circuits(gs.label, report.results)
    _write_coords(store, ds, cfg)
    return {"gatesets": [gs.describe()], "dataset": ds.describe()}


def run_compare(cfg: RunConfig, store: RunStore) -> dict:
    rng = RngHandle(cfg.seed)
    ds = make_dataset(cfg.dataset, cfg.seed)
    gs1 = make_gateset(cfg.gs1, rng.child(SEED_GS1))
    gs2 = make_gateset(cfg.gs2, rng.child(SEED_GS2))
    comparison = compare_gatesets(
        gs1, gs2, ds, cfg.pipeline.to_config(), CostWeights.from_list(cfg.weights), rng.child(SEED_EVAL), cfg.threads
    )
    _write_comparison(store, comparison)
    _write_coords(store, ds, cfg)
    logger.info(f"score of {gs2.label} against {gs1.label}: {comparison.total:.6f}")
    return {"gatesets": [gs1.describe(), gs2.describe()], "dataset": ds.describe()}


def run_discover(cfg: RunConfig, store: RunStore) -> dict:
    rng = RngHandle(cfg.seed)
    ds = make_dataset(cfg.dataset, cfg.seed)
    gs1 = make_gateset(cfg.gs1, rng.child(SEED_GS1))
    search = SearchConfig(
        method=cfg.search.method,
        max_evals=cfg.search.max_evals,
        seed=rng.child(SEED_SEARCH).seed,
        bounds=[tuple(b) for b in cfg.search.bounds or []],
        initial_point=cfg.search.initial_point or (cfg.ansatz.params or None),
        restarts=cfg.search.restarts,
    )
    report = discover_gateset(
        cfg.ansatz.specs(), gs1, ds, CostWeights.from_list(cfg.weights), cfg.pipeline.to_config(), search,
        rng=rng.child(SEED_GS2), include_daggers=cfg.ansatz.include_daggers, label=cfg.ansatz.label,
        threads=cfg.threads or settings.THREADS,
    )

    _write_comparison(store, report.comparison)
    store.write_csv("trajectory.csv", ["eval", "score"], report.trajectory)
    best = report.best_gateset
    for g in best.gates[: best.n_base]:
        store.write_gate(f"{best.label}_{g.label}", g.matrix)
    _write_coords(store, ds, cfg)
    return {
        "gatesets": [gs1.describe(), best.describe()],
        "dataset": ds.describe(),
        "discovery": {
            "best_params": [float(p) for p in report.best_params],
            "best_score": report.best_score,
            "evaluations": len(report.trajectory),
            "clipped": report.clipped,
            "converged": report.converged,
            "search_seed": search.seed,
        },
    }


HANDLERS = {
    Mode.COMPILE: run_compile,
    Mode.COMPARE: run_compare,
    Mode.DISCOVER: run_discover,
}


def output_dir(cfg: RunConfig, out: Optional[str] = None) -> Path:
    if out:
        return Path(out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(settings.OUTPUT_DIR) / cfg.label


def run(cfg: RunConfig, out: Optional[str] = None) -> int:
    """Execute a validated config. Partial results keep their INCOMPLETE marker."""
    store = RunStore(output_dir(cfg, out))
    logger.info(f"{cfg.mode.value} run {cfg.label!r} (seed {cfg.seed}) -> {store.root}")
    try:
        extra = HANDLERS[cfg.mode](cfg, store)
    except ConfigError as e:
        logger.error(f"configuration error: {e}")
        store.write_manifest(cfg.effective(), cfg.seed, {"error": str(e)}, status="failed")
        return EXIT_CONFIG
    except ForgeError as e:
        logger.error(f"run failed: {e}")
        store.write_manifest(cfg.effective(), cfg.seed, {"error": str(e)}, status="failed")
        return EXIT_RUNTIME
    store.write_manifest(cfg.effective(), cfg.seed, extra)
    store.finish()
    return EXIT_OK


def run_from_file(path: str, mode: Optional[str] = None, seed: Optional[int] = None,
                  threads: Optional[int] = None, out: Optional[str] = None) -> int:
    try:
        cfg = parse_config(path, {"mode": mode, "seed": seed, "threads": threads})
    except ConfigError as e:
        logger.error(f"configuration error: {e}")
        return EXIT_CONFIG
    return run(cfg, out)


def validate(path: str) -> int:
    try:
        cfg = parse_config(path)
    except ConfigError as e:
        logger.error(f"configuration error: {e}")
        return EXIT_CONFIG
    print(json.dumps(cfg.effective(), indent=2, sort_keys=True))
    return EXIT_OK


def schema() -> int:
    print(json.dumps(config_schema(), indent=2))
    return EXIT_OK
