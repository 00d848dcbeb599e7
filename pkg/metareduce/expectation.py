"""
Expected losses of oracle, random, leaderboard and landmarked pools.

Combinatorial sums run on exact rationals; floats appear only in returned values.
"""
import math
from fractions import Fraction

from .errors import EmptyPool, InputError, UnknownIdentifier
from .ranking import RankingTable
from .schema import Schema
from .utils._types import *
from .utils.logs import get_logger

logger = get_logger(__name__)

DEGENERATE_SPAN = 1e-12


def _exact(means: Sequence[float]) -> List[Fraction]:
    if not means:
        raise EmptyPool("")
    return sorted(Fraction(m) for m in means)


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise InputError(f"k={k} outside [1, {n}]")


def expected_oracle_average(means: Sequence[float], k: int, exact: bool = False) -> Union[float, Fraction]:
    """Mean of the `k` smallest means."""
    values = _exact(means)
    _check_k(k, len(values))
    value = sum(values[:k], Fraction(0)) / k
    return value if exact else float(value)


def expected_oracle_optimal(means: Sequence[float], k: int, exact: bool = False) -> Union[float, Fraction]:
    """Best mean; an oracle pool always contains it."""
    values = _exact(means)
    _check_k(k, len(values))
    return values[0] if exact else float(values[0])


def expected_random_average(means: Sequence[float], k: int, exact: bool = False) -> Union[float, Fraction]:
    """Average loss of a uniform k-subset: the grand mean, for every k."""
    values = _exact(means)
    _check_k(k, len(values))
    value = sum(values, Fraction(0)) / len(values)
    return value if exact else float(value)


def expected_random_optimal(means: Sequence[float], k: int, exact: bool = False) -> Union[float, Fraction]:
    """
    Expected minimum mean over uniform k-subsets.

    With ascending means m_(1) <= ... <= m_(P), the i-th smallest is the subset
    minimum in C(P - i, k - 1) of the C(P, k) subsets.
    """
    values = _exact(means)
    n = len(values)
    _check_k(k, n)
    total = sum(
        (values[i - 1] * math.comb(n - i, k - 1) for i in range(1, n - k + 2)),
        Fraction(0)
    )
    value = total / math.comb(n, k)
    return value if exact else float(value)


class StrategyExpectation(Schema):
    avg: float
    opt: float


def strategy_expectations(
        pool: Sequence[PredictorId],
        means: Mapping[PredictorId, float],
        closure_added: Sequence[PredictorId] = (),
        include_closure: bool = False
) -> StrategyExpectation:
    """
    Average and minimum of the pool members' means. Closure additions only
    count with `include_closure`.
    """
    members = list(pool) + (list(closure_added) if include_closure else [])
    if not members:
        raise EmptyPool("")
    for p in members:
        if p not in means:
            raise UnknownIdentifier("predictor", p)
    values = [Fraction(means[p]) for p in members]
    return StrategyExpectation(
        avg=float(sum(values, Fraction(0)) / len(values)),
        opt=float(min(values))
    )


def normalize(value: float, oracle_value: float, random_value: float) -> Optional[float]:
    """
    Linear score with the oracle at 0 and random culling at 1; above 1 is
    worse than random. None when oracle and random coincide.
    """
    span = random_value - oracle_value
    if abs(span) < DEGENERATE_SPAN:
        return None
    return (value - oracle_value) / span


class ExpectationRow(Schema):
    base_id: str
    dataset_id: DatasetId
    k: int
    eO_avg: float
    eO_opt: float
    R_avg: float
    R_opt: float
    eM_avg: float
    eM_opt: float
    eL_avg: Optional[float] = None
    eL_opt: Optional[float] = None
    norm_M_avg: Optional[float] = None
    norm_L_avg: Optional[float] = None
    norm_M_opt: Optional[float] = None
    norm_L_opt: Optional[float] = None


class ExpectationReport(Schema):
    base_id: str
    dataset_id: DatasetId
    rows: List[ExpectationRow]


def expectation_report(
        table: RankingTable,
        dataset_id: DatasetId,
        k_grid: Sequence[int],
        most_similar: Optional[DatasetId] = None,
        leaderboard: Optional[Sequence[PredictorId]] = None
) -> ExpectationReport:
    """
    Expected losses of every strategy family on one dataset for each k.

    Args:
        table (RankingTable): Rankings and means of the base.
        dataset_id (str): Dataset whose means score the pools.
        k_grid (Sequence[int]): Pool sizes; values above the roster size are skipped.
        most_similar (str): Landmark neighbour of the dataset; landmarked columns
            stay empty without one.
        leaderboard (Sequence): Leaderboard order to use instead of the table's
            own (e.g. one that holds the dataset out).

    Returns:
        ExpectationReport: One row per k.
    """
    means_by_predictor = table.means_for(dataset_id)
    means = [means_by_predictor[p] for p in table.predictors]
    order = list(leaderboard) if leaderboard is not None else table.leaderboard_order()
    neighbour = table.order_for(most_similar) if most_similar is not None else None
    n = len(means)

    rows = []
    for k in k_grid:
        if not 1 <= k <= n:
            logger.warning(f"Skipping k={k} for `{dataset_id}`: roster has {n} predictors.")
            continue
        e_o_avg = expected_oracle_average(means, k)
        e_o_opt = expected_oracle_optimal(means, k)
        r_avg = expected_random_average(means, k)
        r_opt = expected_random_optimal(means, k)
        leader = strategy_expectations(order[:k], means_by_predictor)
        row = {
            "base_id": table.base_id,
            "dataset_id": dataset_id,
            "k": k,
            "eO_avg": e_o_avg,
            "eO_opt": e_o_opt,
            "R_avg": r_avg,
            "R_opt": r_opt,
            "eM_avg": leader.avg,
            "eM_opt": leader.opt,
            "norm_M_avg": normalize(leader.avg, e_o_avg, r_avg),
            "norm_M_opt": normalize(leader.opt, e_o_opt, r_opt),
        }
        if neighbour is not None:
            landmarked = strategy_expectations(neighbour[:k], means_by_predictor)
            row.update({
                "eL_avg": landmarked.avg,
                "eL_opt": landmarked.opt,
                "norm_L_avg": normalize(landmarked.avg, e_o_avg, r_avg),
                "norm_L_opt": normalize(landmarked.opt, e_o_opt, r_opt),
            })
        rows.append(ExpectationRow(**row))
    return ExpectationReport(base_id=table.base_id, dataset_id=dataset_id, rows=rows)
