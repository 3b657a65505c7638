"""
Run directory persistence.

    <out>/manifest.json     effective config, seeds, version, wall time, status
    <out>/report.csv        per-point PF/CD
    <out>/summary.json      means, stds, metrics, weights, pearson
    <out>/circuits/*.txt    decomposed circuits
    <out>/coords.csv        Bloch or Weyl coordinates of the dataset
    <out>/gates/*.umat      exported gates
    <out>/trajectory.csv    discovery evaluations

An ``INCOMPLETE`` marker exists while the run is in progress and is removed
by ``finish``; a directory that still has it holds partial results.
"""

import csv
import json
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from src.core.config import VERSION
from src.core.logging import logger
from src.services.decomposition import DecompositionResult, write_circuit
from src.services.matrix_io import write_matrix

MARKER = "INCOMPLETE"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.started = time.time()
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / MARKER).write_text("run in progress\n", encoding="utf-8")

    def path(self, name: str) -> Path:
        return self.root / name

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        p = self.path(name)
        with p.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        return p

    def write_circuits(self, prefix: str, results: Sequence[Optional[DecompositionResult]]) -> List[Path]:
        out = []
        for i, res in enumerate(results):
            if res is not None:
                out.append(write_circuit(self.path(f"circuits/{prefix}_{i:04d}.txt"), res))
        return out

    def write_gate(self, name: str, matrix) -> Path:
        return write_matrix(self.path(f"gates/{name}.umat"), matrix)

    def write_manifest(self, config: Dict[str, Any], seed: int, extra: Optional[Dict[str, Any]] = None,
                       status: str = "complete") -> Path:
        manifest = {
            "version": VERSION,
            "status": status,
            "config": config,
            "seed": seed,
            "wall_time": time.time() - self.started,
        }
        manifest.update(extra or {})
        return self.write_json("manifest.json", manifest)

    def finish(self) -> None:
        marker = self.path(MARKER)
        if marker.exists():
            marker.unlink()
        logger.info(f"results written to {self.root}")
