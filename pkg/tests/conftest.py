import os
import sys

import pytest

ROOT_DIR = os.path.abspath(os.path.dirname(os.path.dirname(__file__)))
sys.path.insert(0, ROOT_DIR)

from metareduce.meta.store import EvaluationRecord, MetaKnowledgeBase, ingest  # noqa : E402
from metareduce.meta.synth import SampleManifest  # noqa : E402
from metareduce.space.components import Roster  # noqa : E402

SAMPLE_DIR = os.path.join(ROOT_DIR, "data", "samples")


def sample_path(name: str) -> str:
    return os.path.join(SAMPLE_DIR, name)


def make_base(errors, folds=10, base_id="toy", flavor="systematic", times=None, roster=None):
    """
    Base with one configuration per cell. `errors` maps dataset -> predictor ->
    list of fold errors (None marks a failed fold).
    """
    records = []
    for dataset, row in errors.items():
        for predictor, folds_errors in row.items():
            for fold, error in enumerate(folds_errors):
                records.append(EvaluationRecord(
                    base_id=base_id,
                    dataset_id=dataset,
                    predictor_id=predictor,
                    pipeline=(predictor,),
                    config_id="default",
                    fold_index=fold,
                    error_rate=error,
                    eval_time=(times or {}).get(predictor, 1.0),
                    status="ok" if error is not None else "failed"
                ))
    return MetaKnowledgeBase(base_id, flavor, records, folds=folds, roster=roster)


@pytest.fixture(scope="session")
def sample_manifest() -> SampleManifest:
    return SampleManifest.from_json(sample_path("manifest.json"))


@pytest.fixture(scope="session")
def sample_roster() -> Roster:
    return Roster.from_json(sample_path("roster.json"))


@pytest.fixture(scope="session")
def automl_base(sample_roster) -> MetaKnowledgeBase:
    return ingest(sample_path("automl_meta.csv"), roster=sample_roster)


@pytest.fixture(scope="session")
def default_base(sample_roster) -> MetaKnowledgeBase:
    return ingest(sample_path("default_meta.csv"), roster=sample_roster)
