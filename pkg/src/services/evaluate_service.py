"""
Gate set comparator: per-point decomposition over a dataset, summary
statistics, novelty scores and the weighted five-metric score.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.config import settings
from src.core.errors import ForgeError, InvalidArgumentError
from src.core.logging import logger
from src.services.datasets import Dataset, resolve_metric
from src.services.decomposition import DecompositionResult, FidelityMetric
from src.services.gatelib import GateSet
from src.services.matcore import RngHandle
from src.services.pipeline_service import Pipeline, PipelineConfig


@dataclass(eq=False)
class EvaluationReport:
    gateset: str
    pf: np.ndarray
    cd: np.ndarray
    elapsed: float
    results: List[Optional[DecompositionResult]] = field(default_factory=list, repr=False)
    diagnostics: List[Tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.pf = np.asarray(self.pf, dtype=float)
        self.cd = np.asarray(self.cd, dtype=int)
        if self.pf.shape != self.cd.shape:
            raise InvalidArgumentError("pf and cd traces must have equal length")

    def __len__(self) -> int:
        return self.pf.size

    @property
    def pf_mean(self) -> float:
        return float(np.mean(self.pf))

    @property
    def pf_std(self) -> float:
        return float(np.std(self.pf))

    @property
    def cd_mean(self) -> float:
        return float(np.mean(self.cd))

    @property
    def cd_std(self) -> float:
        return float(np.std(self.cd))

    def summary(self) -> dict:
        return {
            "gateset": self.gateset,
            "pf_mean": self.pf_mean,
            "pf_std": self.pf_std,
            "cd_mean": self.cd_mean,
            "cd_std": self.cd_std,
            "failures": len(self.diagnostics),
            "elapsed": self.elapsed,
        }


def evaluate_gateset(
    gs: GateSet,
    ds: Dataset,
    cfg: PipelineConfig = PipelineConfig(),
    rng: Optional[RngHandle] = None,
    threads: Optional[int] = None,
    pipeline: Optional[Pipeline] = None,
) -> EvaluationReport:
    """
    Decompose every dataset member with the pipeline.

    Point i always uses ``rng.child(i)``, so the report does not depend on
    the number of worker threads. A failing point is recorded with pf = 0,
    cd = 0 and a diagnostic instead of aborting the run.
    """
    started = time.perf_counter()
    rng = rng or RngHandle(0)
    threads = max(1, threads or settings.THREADS)
    pipeline = pipeline or Pipeline(gs, cfg)
    metric = resolve_metric(cfg.metric, ds)

    def run_point(i: int):
        try:
            return pipeline.decompose(ds.unitaries[i], rng.child(i), metric), None
        except ForgeError as e:
            return None, str(e)
        except (np.linalg.LinAlgError, ValueError) as e:
            return None, f"{type(e).__name__}: {e}"

    if threads == 1:
        outcomes = [run_point(i) for i in range(len(ds))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_point, range(len(ds))))

    pf, cd, results, diagnostics = [], [], [], []
    for i, (res, err) in enumerate(outcomes):
        if res is None:
            logger.warning(f"{gs.label}: point {i} failed: {err}")
            pf.append(0.0)
            cd.append(0)
            diagnostics.append((i, err))
        else:
            logger.debug(f"{gs.label}: point {i} fidelity {res.fidelity:.6f} depth {res.depth}")
            pf.append(res.fidelity)
            cd.append(res.depth)
        results.append(res)

    report = EvaluationReport(gs.label, pf, cd, time.perf_counter() - started, results, diagnostics)
    logger.info(
        f"{gs.label}: <PF> {report.pf_mean:.4f}, <CD> {report.cd_mean:.2f} over {len(ds)} points "
        f"in {report.elapsed:.1f}s"
    )
    return report


@dataclass(frozen=True)
class NoveltyScores:
    c_npf: float
    c_ncd: float
    pearson_pf: float
    pearson_defined: bool


def _anti_trend(a: np.ndarray, b: np.ndarray, scale: float) -> float:
    """1/(1 + x), x = L2 distance between trace b and the negated trace a, over ``scale``."""
    norm = float(np.linalg.norm(b - (-a)))
    if norm == 0.0:
        return 1.0
    if scale <= 0:
        return 0.0
    return 1.0 / (1.0 + norm / scale)


def pearson(a: Sequence[float], b: Sequence[float]) -> Tuple[float, bool]:
    """Pearson correlation; a constant trace gives (0.0, False)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0, False
    return float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0)), True


def novelty_scores(r1: EvaluationReport, r2: EvaluationReport) -> NoveltyScores:
    """
    Novelty of r2's traces against r1's.

    PF traces are centred on their means (0.5 for a balanced trend), trace 1
    is negated and the L2 distance to trace 2 is divided by the mean of the
    two average fidelities before squashing with 1/(1+x). Depth traces are
    first normalised by their means. Higher means more anti-correlated.
    """
    if len(r1) != len(r2):
        raise InvalidArgumentError(f"reports cover {len(r1)} and {len(r2)} points")
    joint_pf = 0.5 * (r1.pf_mean + r2.pf_mean)
    c_npf = _anti_trend(r1.pf - r1.pf_mean, r2.pf - r2.pf_mean, joint_pf)

    cd1 = r1.cd / r1.cd_mean if r1.cd_mean > 0 else r1.cd.astype(float)
    cd2 = r2.cd / r2.cd_mean if r2.cd_mean > 0 else r2.cd.astype(float)
    joint_cd = 0.5 * (float(np.mean(cd1)) + float(np.mean(cd2)))
    c_ncd = _anti_trend(cd1 - np.mean(cd1), cd2 - np.mean(cd2), joint_cd)

    rho, defined = pearson(r1.pf, r2.pf)
    if not defined:
        logger.warning("PF trace has zero variance; Pearson correlation reported as 0")
    return NoveltyScores(c_npf, c_ncd, rho, defined)


METRIC_NAMES = ("apf", "npf", "acd", "ncd", "agf")


@dataclass(frozen=True)
class CostWeights:
    w_apf: float = 50.0
    w_npf: float = 1.0
    w_acd: float = 1.0
    w_ncd: float = 1.0
    w_agf: float = 0.0

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidArgumentError(f"cost weights must be finite and >= 0, got {values.tolist()}")
        if not np.any(values > 0):
            raise InvalidArgumentError("cost weights must not all be zero")

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "CostWeights":
        if len(values) != 5:
            raise InvalidArgumentError(f"expected 5 weights, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.w_apf, self.w_npf, self.w_acd, self.w_ncd, self.w_agf], dtype=float)


@dataclass(eq=False)
class ComparisonReport:
    report1: EvaluationReport
    report2: EvaluationReport
    weights: CostWeights
    c_apf: float
    c_npf: float
    c_acd: float
    c_ncd: float
    c_agf: float
    pearson_pf: float
    pearson_defined: bool

    @property
    def metrics(self) -> np.ndarray:
        return np.array([self.c_apf, self.c_npf, self.c_acd, self.c_ncd, self.c_agf], dtype=float)

    @property
    def total(self) -> float:
        return float(self.weights.as_array() @ self.metrics)

    def summary(self) -> dict:
        return {
            "gs1": self.report1.summary(),
            "gs2": self.report2.summary(),
            "metrics": {f"c_{name}": float(v) for name, v in zip(METRIC_NAMES, self.metrics)},
            "weights": {f"w_{name}": float(v) for name, v in zip(METRIC_NAMES, self.weights.as_array())},
            "pearson_pf": self.pearson_pf,
            "pearson_defined": self.pearson_defined,
            "total": self.total,
        }

    def rows(self) -> List[Tuple[int, float, int, float, int]]:
        return [
            (i, float(self.report1.pf[i]), int(self.report1.cd[i]), float(self.report2.pf[i]), int(self.report2.cd[i]))
            for i in range(len(self.report1))
        ]


def cost(r1: EvaluationReport, r2: EvaluationReport, w: CostWeights, fab_costs: Sequence[float] = ()) -> ComparisonReport:
    """
    Weighted score of r2 against r1, to be maximised.

    c_apf and c_acd are signed improvements, c_agf is the negated mean
    fabrication cost of r2's gates (0 when none are given).
    """
    if len(r1) != len(r2):
        raise InvalidArgumentError(f"reports cover {len(r1)} and {len(r2)} points; datasets differ")
    novelty = novelty_scores(r1, r2)
    return ComparisonReport(
        report1=r1,
        report2=r2,
        weights=w,
        c_apf=r2.pf_mean - r1.pf_mean,
        c_npf=novelty.c_npf,
        c_acd=(r1.cd_mean - r2.cd_mean) / max(r1.cd_mean, 1.0),
        c_ncd=novelty.c_ncd,
        c_agf=-float(np.mean(fab_costs)) if len(fab_costs) else 0.0,
        pearson_pf=novelty.pearson_pf,
        pearson_defined=novelty.pearson_defined,
    )


def compare_gatesets(gs1: GateSet, gs2: GateSet, ds: Dataset, cfg: PipelineConfig, w: CostWeights,
                     rng: RngHandle, threads: Optional[int] = None) -> ComparisonReport:
    """Evaluate both gate sets with the same per-point seeds and score gs2 against gs1."""
    r1 = evaluate_gateset(gs1, ds, cfg, rng, threads)
    r2 = evaluate_gateset(gs2, ds, cfg, rng, threads)
    return cost(r1, r2, w, gs2.fabrication_costs)
