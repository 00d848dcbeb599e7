"""
Planted sample data: meta-knowledge bases whose rankings, costs and landmark
neighbours are known by construction, and response surfaces with a planted
oracle > leaderboard > random > baseline hierarchy.
"""
import csv
import math
import os
from collections import Counter
from pathlib import Path

import numpy as np

from ..core import Serializable
from ..harness.surface import SurfaceCell, SurfaceManifest
from ..space.components import ComponentKind, ComponentSpec, Roster
from ..utils._types import *
from ..utils.logs import get_logger
from .store import CSV_COLUMNS

# Position of P0..P7 in each dataset's quality order (0 = best). d1/d2 and
# d3/d4 are near copies, d5 sits closest to d4 on the landmarkers.
PLANTED_POSITIONS: Dict[DatasetId, List[int]] = {
    "d1": [0, 1, 2, 3, 4, 5, 6, 7],
    "d2": [1, 0, 2, 3, 4, 5, 7, 6],
    "d3": [7, 6, 5, 4, 3, 2, 1, 0],
    "d4": [6, 7, 5, 4, 3, 2, 0, 1],
    "d5": [3, 4, 0, 1, 2, 7, 6, 5],
}
PREPROCESSOR = "PCA"
POSITION_STEP = 0.06
DATASET_STEP = 0.02
FOLDS = 10


class SampleManifest(Serializable):
    """Facts planted into the sample bases, written next to them."""
    base_ids: List[str]
    files: Dict[str, str]
    datasets: List[DatasetId]
    predictors: List[PredictorId]
    folds: int
    landmarkers: List[PredictorId]
    planted_positions: Dict[DatasetId, List[int]]
    planted_orders: Dict[DatasetId, List[PredictorId]]
    planted_neighbours: Dict[DatasetId, DatasetId]
    planted_leaderboard: List[PredictorId]
    row_counts: Dict[str, int]
    ok_counts: Dict[str, Dict[DatasetId, Dict[PredictorId, int]]]
    penalty_cells: Dict[str, List[Tuple[DatasetId, PredictorId]]] = Field(default_factory=dict)


class SampleSynthesizer:
    """
    Writes the bundled sample: an opportunistic base (several configurations
    per cell, some multi-component pipelines, a few failed folds), a systematic
    base (one default configuration per cell, one unevaluated cell), the
    roster, a response surface over the same cells and the manifest.

    Every value is a closed-form function of the dataset, predictor,
    configuration and fold indices, so the output is identical on every run.
    """
    opportunistic_id = "automl"
    systematic_id = "default"

    def __init__(self, positions: Optional[Mapping[DatasetId, Sequence[int]]] = None, landmarkers: int = 5) -> None:
        self.logger = get_logger(self.__class__.__name__)
        self.positions = {d: list(v) for d, v in (positions or PLANTED_POSITIONS).items()}
        self.datasets = sorted(self.positions)
        widths = {len(v) for v in self.positions.values()}
        if len(widths) != 1:
            raise ValueError("every dataset needs a position for every predictor")
        self.predictors = [f"P{p}" for p in range(widths.pop())]
        self.n_landmarkers = landmarkers

    @staticmethod
    def _jitter(*terms: int) -> float:
        d, p, c, f = terms
        return ((d * 7 + p * 13 + c * 17 + f * 31) % 11 - 5) * 0.002

    @staticmethod
    def fold_time(d: int, p: int, f: int) -> float:
        return (0.5 + 0.5 * p) * (1 + 0.1 * d) + 0.01 * f

    def opportunistic_rows(self) -> List[Dict[str, str]]:
        rows = []
        for d, dataset in enumerate(self.datasets):
            for p, predictor in enumerate(self.predictors):
                centre = 0.05 + DATASET_STEP * d + POSITION_STEP * self.positions[dataset][p]
                for c in range(1 + (d + p) % 3):
                    pipeline = predictor if c % 2 == 0 else f"{PREPROCESSOR}|{predictor}"
                    for f in range(FOLDS):
                        failed = (d + p + c) % 7 == 0 and f == FOLDS - 1
                        rows.append({
                            "base_id": self.opportunistic_id,
                            "dataset_id": dataset,
                            "predictor_id": predictor,
                            "pipeline": pipeline,
                            "config_id": f"c{c}",
                            "fold_index": str(f),
                            "error_rate": "" if failed else f"{centre + self._jitter(d, p, c, f):.6f}",
                            "eval_time_s": f"{self.fold_time(d, p, f):.6f}",
                            "status": "failed" if failed else "ok",
                        })
        return rows

    def systematic_rows(self) -> List[Dict[str, str]]:
        rows = []
        skipped = self.systematic_gap
        for d, dataset in enumerate(self.datasets):
            for p, predictor in enumerate(self.predictors):
                if (dataset, predictor) == skipped:
                    continue
                centre = 0.06 + DATASET_STEP * d + POSITION_STEP * self.positions[dataset][p]
                for f in range(FOLDS):
                    jitter = ((d * 5 + p * 11 + f * 3) % 7 - 3) * 0.002
                    rows.append({
                        "base_id": self.systematic_id,
                        "dataset_id": dataset,
                        "predictor_id": predictor,
                        "pipeline": predictor,
                        "config_id": "default",
                        "fold_index": str(f),
                        "error_rate": f"{centre + jitter:.6f}",
                        "eval_time_s": f"{self.fold_time(d, p, f):.6f}",
                        "status": "ok",
                    })
        return rows

    @property
    def systematic_gap(self) -> Tuple[DatasetId, PredictorId]:
        """The one (dataset, predictor) cell the systematic base never evaluates."""
        return self.datasets[-1], self.predictors[-1]

    def roster(self) -> Roster:
        components = [ComponentSpec(id=p) for p in self.predictors]
        components.append(ComponentSpec(id=PREPROCESSOR, kind=ComponentKind.PREPROCESSOR))
        return Roster(components=components, datasets=self.datasets)

    def surface(self) -> SurfaceManifest:
        """Response surface whose base errors follow the planted positions."""
        cells = {}
        for d, dataset in enumerate(self.datasets):
            cells[dataset] = {
                predictor: SurfaceCell(
                    base_error=round(0.05 + DATASET_STEP * d + POSITION_STEP * self.positions[dataset][p], 6),
                    noise_sigma=0.01,
                    fold_cost=round(0.5 + 0.5 * p, 6),
                    optimum=[round(0.3 + 0.1 * (p % 5), 6), round(0.7 - 0.1 * (d % 5), 6)],
                    curvature=0.5
                )
                for p, predictor in enumerate(self.predictors)
            }
        return SurfaceManifest(
            folds=FOLDS,
            invalid_fraction=0.3,
            invalid_cost=5.0,
            preprocessor_effects={PREPROCESSOR: -0.005},
            cells=cells
        )

    def planted_orders(self) -> Dict[DatasetId, List[PredictorId]]:
        return {
            d: sorted(self.predictors, key=lambda p: self.positions[d][self.predictors.index(p)])
            for d in self.datasets
        }

    def planted_leaderboard(self) -> List[PredictorId]:
        totals = {p: sum(self.positions[d][i] for d in self.datasets) for i, p in enumerate(self.predictors)}
        return sorted(self.predictors, key=lambda p: (totals[p], p))

    def planted_neighbours(self) -> Dict[DatasetId, DatasetId]:
        """Leave-one-out nearest dataset by correlation of landmarker positions."""
        k = self.n_landmarkers
        neighbours = {}
        for d in self.datasets:
            scored = [
                (float(np.corrcoef(self.positions[d][:k], self.positions[o][:k])[0, 1]), o)
                for o in self.datasets if o != d
            ]
            neighbours[d] = min(scored, key=lambda item: (-item[0], item[1]))[1]
        return neighbours

    def manifest(self, rows: Mapping[str, List[Dict[str, str]]], files: Mapping[str, str]) -> SampleManifest:
        ok_counts: Dict[str, Dict[DatasetId, Dict[PredictorId, int]]] = {}
        for base_id, base_rows in rows.items():
            counts = Counter((r["dataset_id"], r["predictor_id"]) for r in base_rows if r["status"] == "ok")
            ok_counts[base_id] = {
                d: {p: counts.get((d, p), 0) for p in self.predictors} for d in self.datasets
            }
        return SampleManifest(
            base_ids=list(rows),
            files=dict(files),
            datasets=self.datasets,
            predictors=self.predictors,
            folds=FOLDS,
            landmarkers=self.predictors[:self.n_landmarkers],
            planted_positions=self.positions,
            planted_orders=self.planted_orders(),
            planted_neighbours=self.planted_neighbours(),
            planted_leaderboard=self.planted_leaderboard(),
            row_counts={base_id: len(base_rows) for base_id, base_rows in rows.items()},
            ok_counts=ok_counts,
            penalty_cells={self.systematic_id: [self.systematic_gap]}
        )

    @staticmethod
    def _write_csv(path: Path, rows: Sequence[Mapping[str, str]]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)

    def write(self, out_dir: Union[str, os.PathLike], exist_ok: bool = False) -> SampleManifest:
        """
        Write `automl_meta.csv`, `default_meta.csv`, `roster.json`,
        `surface.json` and `manifest.json` into `out_dir`.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            self.opportunistic_id: "automl_meta.csv",
            self.systematic_id: "default_meta.csv",
        }
        for name in [*files.values(), "roster.json", "surface.json", "manifest.json"]:
            if (out / name).exists() and not exist_ok:
                raise FileExistsError(f"File already exists at {out / name}.")

        rows = {
            self.opportunistic_id: self.opportunistic_rows(),
            self.systematic_id: self.systematic_rows(),
        }
        for base_id, name in files.items():
            self._write_csv(out / name, rows[base_id])
        self.roster().to_json(str(out / "roster.json"), exist_ok=True)
        self.surface().to_json(str(out / "surface.json"), exist_ok=True)
        manifest = self.manifest(rows, files)
        manifest.to_json(str(out / "manifest.json"), exist_ok=True)
        self.logger.info(
            f"Wrote sample to {out}: " + ", ".join(f"{b}={n} rows" for b, n in manifest.row_counts.items())
        )
        return manifest


def planted_hierarchy_surface(
        n_datasets: int = 6,
        n_predictors: int = 30,
        specialists: int = 4,
        generalists: int = 4,
        invalid_fraction: float = 0.9,
        invalid_cost: float = 10.0,
        seed: int = 0
) -> SurfaceManifest:
    """
    Surface on which a strategy's quality is known in advance.

    Each dataset owns `specialists` predictors that are excellent there
    (0.03-0.06) and poor elsewhere (0.3-0.5); `generalists` predictors are good
    everywhere (0.08-0.11); the rest are poor everywhere. The oracle finds the
    specialists, the leaderboard the generalists, random culling rarely either,
    and the unfiltered full roster pays for invalid proposals.
    """
    if n_datasets * specialists + generalists > n_predictors:
        raise ValueError("not enough predictors for the requested specialists and generalists")
    rng = np.random.default_rng(seed)
    width = int(math.log10(max(n_predictors - 1, 1))) + 1
    predictors = [f"P{i:0{width}d}" for i in range(n_predictors)]
    datasets = [f"t{j + 1}" for j in range(n_datasets)]
    general = set(predictors[n_datasets * specialists:n_datasets * specialists + generalists])

    cells: Dict[DatasetId, Dict[PredictorId, SurfaceCell]] = {}
    for j, dataset in enumerate(datasets):
        own = set(predictors[j * specialists:(j + 1) * specialists])
        row = {}
        for predictor in predictors:
            if predictor in own:
                error = rng.uniform(0.03, 0.06)
            elif predictor in general:
                error = rng.uniform(0.08, 0.11)
            else:
                error = rng.uniform(0.3, 0.5)
            row[predictor] = SurfaceCell(base_error=round(float(error), 6), noise_sigma=0.01, fold_cost=1.0)
        cells[dataset] = row
    return SurfaceManifest(
        folds=FOLDS,
        invalid_fraction=invalid_fraction,
        invalid_cost=invalid_cost,
        cells=cells
    )
