"""
Gate set discovery: search the parameter space of an ansatz for the gate set
that maximises the weighted score against a fixed reference.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from src.core.config import settings
from src.core.errors import ForgeError, InvalidArgumentError
from src.core.logging import logger
from src.services.datasets import Dataset
from src.services.evaluate_service import ComparisonReport, CostWeights, EvaluationReport, cost, evaluate_gateset
from src.services.gatelib import GateSet, GateSpec, assemble_gateset, parameter_bounds
from src.services.matcore import RngHandle
from src.services.pipeline_service import PipelineConfig

FAILED = float("-inf")
PENALTY = 1e10
PROGRESS_EVERY = 50


class SearchMethod(str, Enum):
    RANDOM = "random-search"
    LOCAL = "derivative-free-local"


@dataclass
class SearchConfig:
    method: SearchMethod = SearchMethod.LOCAL
    max_evals: int = 500
    seed: int = 0
    bounds: List[Tuple[float, float]] = field(default_factory=list)
    initial_point: Optional[List[float]] = None
    restarts: int = 1

    def __post_init__(self):
        self.method = SearchMethod(self.method)
        if self.max_evals < 1:
            raise InvalidArgumentError("max_evals must be >= 1")
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be >= 1")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise InvalidArgumentError(f"bad bound ({lo}, {hi})")
        # empty bounds are filled from the ansatz later, the point is checked then
        if self.initial_point is not None and self.bounds and len(self.initial_point) != len(self.bounds):
            raise InvalidArgumentError(
                f"initial point has {len(self.initial_point)} values for {len(self.bounds)} parameters"
            )


@dataclass(eq=False)
class DiscoveryReport:
    best_params: np.ndarray
    best_score: float
    trajectory: List[Tuple[int, float]]
    converged: bool
    clipped: int = 0
    best_gateset: Optional[GateSet] = None
    comparison: Optional[ComparisonReport] = None

    @property
    def running_max(self) -> List[float]:
        return list(np.maximum.accumulate([s for _, s in self.trajectory]))


class GateSetObjective:
    """
    Score of a candidate parameter vector.

    The reference report is computed once by the caller; every candidate is
    evaluated with the same per-point seeds so the score is a deterministic
    function of the parameters. Out-of-bound parameters are clipped.
    """

    def __init__(self, template: GateSet, gs1_report: EvaluationReport, ds: Dataset, weights: CostWeights,
                 cfg: PipelineConfig, bounds: Sequence[Tuple[float, float]], seed: int, threads: int = 1):
        self.template = template
        self.gs1_report = gs1_report
        self.ds = ds
        self.weights = weights
        self.cfg = cfg
        self.lo = np.array([b[0] for b in bounds], dtype=float)
        self.hi = np.array([b[1] for b in bounds], dtype=float)
        self.seed = seed
        self.threads = threads
        self.clipped = 0
        self.evaluations = 0

    def clip(self, params: Sequence[float]) -> np.ndarray:
        x = np.asarray(params, dtype=float)
        clipped = np.clip(x, self.lo, self.hi)
        if np.any(clipped != x):
            self.clipped += 1
            logger.warning(f"parameters clipped to bounds: {x.tolist()} -> {clipped.tolist()}")
        return clipped

    def gateset(self, params: Sequence[float]) -> GateSet:
        return self.template.with_params(np.clip(np.asarray(params, dtype=float), self.lo, self.hi))

    def compare(self, params: Sequence[float]) -> ComparisonReport:
        gs2 = self.gateset(params)
        r2 = evaluate_gateset(gs2, self.ds, self.cfg, RngHandle(self.seed), self.threads)
        return cost(self.gs1_report, r2, self.weights, gs2.fabrication_costs)

    def __call__(self, params: Sequence[float]) -> float:
        self.evaluations += 1
        x = self.clip(params)
        try:
            return self.compare(x).total
        except ForgeError as e:
            logger.warning(f"candidate evaluation failed: {e}")
            return FAILED


Objective = Callable[[np.ndarray], float]


def _uniform(cfg: SearchConfig, gen: np.random.Generator) -> np.ndarray:
    lo = np.array([b[0] for b in cfg.bounds], dtype=float)
    hi = np.array([b[1] for b in cfg.bounds], dtype=float)
    return gen.uniform(lo, hi)


def random_search(objective: Objective, cfg: SearchConfig) -> DiscoveryReport:
    """``max_evals`` uniform samples within the bounds; the best one wins."""
    gen = RngHandle(cfg.seed).generator
    trajectory: List[Tuple[int, float]] = []
    best_x, best = None, FAILED
    for i in range(cfg.max_evals):
        x = _uniform(cfg, gen)
        score = float(objective(x))
        trajectory.append((i, score))
        if best_x is None or score > best:
            best_x, best = x, score
        if (i + 1) % PROGRESS_EVERY == 0:
            logger.info(f"random search: {i + 1}/{cfg.max_evals} evaluations, best {best:.6f}")
    return DiscoveryReport(best_x, best, trajectory, converged=True)


class _BudgetSpent(Exception):
    pass


def local_optimize(objective: Objective, cfg: SearchConfig) -> DiscoveryReport:
    """
    COBYLA with box constraints, restarted ``cfg.restarts`` times.

    Each restart owns ``max_evals`` evaluations. COBYLA stops once its trust
    radius shrinks below the tolerance, which on step-like landscapes comes
    long before the budget is spent; the restart then relaunches it from a
    fresh uniform sample until the budget is used. A budget too small for
    another launch is spent on uniform samples.

    The optimizer minimises the negated score; failed evaluations are seen
    as a large penalty. The first launch starts from ``initial_point`` when
    given.
    """
    gen = RngHandle(cfg.seed).generator
    lo = np.array([b[0] for b in cfg.bounds], dtype=float)
    hi = np.array([b[1] for b in cfg.bounds], dtype=float)
    dims = len(cfg.bounds)
    rhobeg = max(0.25 * float(np.min(hi - lo)), 10 * settings.OPTIMIZER_TOL)
    constraints = []
    for k in range(dims):
        constraints.append({"type": "ineq", "fun": lambda x, k=k: x[k] - lo[k]})
        constraints.append({"type": "ineq", "fun": lambda x, k=k: hi[k] - x[k]})

    trajectory: List[Tuple[int, float]] = []
    best_x, best = None, FAILED
    converged = False

    def evaluate(x) -> float:
        nonlocal best_x, best
        score = float(objective(x))
        trajectory.append((len(trajectory), score))
        if best_x is None or score > best:
            best_x, best = np.array(x, dtype=float), score
        if len(trajectory) % PROGRESS_EVERY == 0:
            logger.info(f"local search: {len(trajectory)} evaluations, best {best:.6f}")
        return score

    for r in range(cfg.restarts):
        limit = len(trajectory) + cfg.max_evals
        launches = 0
        settled = False

        def negated(x):
            if len(trajectory) >= limit:
                raise _BudgetSpent
            score = evaluate(x)
            return PENALTY if score == FAILED else -score

        # COBYLA needs dims + 1 evaluations for its first simplex
        while limit - len(trajectory) >= dims + 2:
            if launches == 0 and r == 0 and cfg.initial_point is not None:
                x0 = np.asarray(cfg.initial_point, dtype=float)
            else:
                x0 = _uniform(cfg, gen)
            launches += 1
            try:
                res = scipy.optimize.minimize(
                    negated, x0, method="COBYLA", constraints=constraints, tol=settings.OPTIMIZER_TOL,
                    options={"maxiter": limit - len(trajectory), "rhobeg": rhobeg},
                )
            except _BudgetSpent:
                break
            settled = settled or bool(res.success)
            logger.debug(f"restart {r} launch {launches}: {res.message} after {res.nfev} evaluations")

        while len(trajectory) < limit:
            if launches == 0 and r == 0 and cfg.initial_point is not None:
                evaluate(np.asarray(cfg.initial_point, dtype=float))
            else:
                evaluate(_uniform(cfg, gen))
            launches += 1
        converged = converged or settled
        if not settled:
            logger.warning(f"restart {r}: COBYLA did not converge within {cfg.max_evals} evaluations")

    return DiscoveryReport(best_x, best, trajectory, converged=converged)


def discover_gateset(
    ansatz: Sequence[GateSpec],
    gs1: GateSet,
    ds: Dataset,
    weights: CostWeights,
    pipeline_cfg: PipelineConfig,
    search_cfg: SearchConfig,
    rng: Optional[RngHandle] = None,
    include_daggers: bool = False,
    label: str = "gs2",
    threads: int = 1,
) -> DiscoveryReport:
    """
    Search the ansatz's parameter space against a reference gate set.

    Args:
        ansatz: Gate specs of the candidate set; its parametric slots are searched.
        gs1: Reference gate set, evaluated once.
        ds: Dataset both sets are scored on.
        weights: Cost weights of the score.
        pipeline_cfg: Decomposition settings shared by both sets.
        search_cfg: Search method and budget; empty bounds are filled from the catalog.
        rng: Seeds random/frozen ansatz gates and the per-point decompositions.

    Returns:
        DiscoveryReport with the best gate set and its final comparison.
    """
    rng = rng or RngHandle(search_cfg.seed)
    bounds = search_cfg.bounds or parameter_bounds(ansatz)
    if not bounds and search_cfg.method == SearchMethod.LOCAL:
        raise InvalidArgumentError("ansatz has no parameters to optimise; use compare mode instead")
    search_cfg = replace(search_cfg, bounds=list(bounds))

    template = assemble_gateset(ansatz, [lo for lo, _ in bounds], rng.child(1), include_daggers, label)
    eval_seed = rng.child(2).seed
    gs1_report = evaluate_gateset(gs1, ds, pipeline_cfg, RngHandle(eval_seed), threads)
    objective = GateSetObjective(template, gs1_report, ds, weights, pipeline_cfg, bounds, eval_seed, threads)

    logger.info(
        f"discovery: {len(bounds)} parameters, {search_cfg.method.value}, "
        f"{search_cfg.max_evals} evaluations x {search_cfg.restarts} restart(s)"
    )
    if search_cfg.method == SearchMethod.RANDOM:
        report = random_search(objective, search_cfg)
    else:
        report = local_optimize(objective, search_cfg)

    report.clipped = objective.clipped
    report.best_gateset = objective.gateset(report.best_params)
    report.comparison = objective.compare(report.best_params)
    logger.info(
        f"discovery done: score {report.best_score:.6f}, <PF> {report.comparison.report2.pf_mean:.4f} "
        f"vs {gs1_report.pf_mean:.4f}, <CD> {report.comparison.report2.cd_mean:.2f} vs {gs1_report.cd_mean:.2f}"
    )
    return report
