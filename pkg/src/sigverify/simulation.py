"""Full-protocol simulation: train, adjust, enroll the test users, verify.

The corpus is shuffled and split into DB1 (matcher training), DB2
(adjustment) and DB3 (operation testing). For every test user the first 6
(3 refs) or 10 (5 refs) shuffled genuine signatures are reserved for
enrollment attempts; the remaining genuines are the genuine trials and the
user's skilled forgeries are the impostor trials. Users who fail to enroll
are reported but excluded from the score pools. The random-forgery protocol
reuses the genuine trials and attacks each enrolled user with the first
non-reserved genuine signature of every other enrolled user.

A-priori numbers use the thresholds fixed during adjustment; a-posteriori
numbers re-optimize on the test scores (for individual thresholds: a new
common threshold from the fused-score sweep, then the alpha grid, never
worse than the deployed operating point).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .calibration import (
    SystemParameters,
    UserScorePool,
    adjust_system,
    build_user_pool,
    grid_search_alphas,
    it_rates,
)
from .corpus import Corpus, CorpusSplit, split_corpus
from .enrollment import (
    ATTEMPT_CAPS,
    EnrollmentMode,
    SessionState,
    enroll_from_pool,
    signature_features,
)
from .errors import ConfigError, DataError, DegenerateCapture
from .matcher import TrainedMatcher, train_matcher
from .metrics import CostModel, ScoreSets, compute_rates, dcf, det_curve, eer, min_dcf


@dataclass(frozen=True)
class SimulationConfig:
    ratio_thresholds: tuple[float, ...] = (0.5,)
    refs_count: int = 5
    fusion: str = "max"
    enroll_modes: tuple[str, ...] = ("intelligent",)
    threshold_modes: tuple[str, ...] = ("it",)
    random_forgeries: bool = False
    split_seed: int = 0
    coefficient_count: int = 30
    costs: CostModel = field(default_factory=CostModel)
    alpha_override: tuple[float, float] | None = None

    def __post_init__(self):
        if self.refs_count not in ATTEMPT_CAPS:
            raise ConfigError(f"refs_count must be one of {sorted(ATTEMPT_CAPS)}")
        for mode in self.enroll_modes:
            if mode not in ("intelligent", "normal"):
                raise ConfigError(f"unknown enrollment mode {mode!r}")
        for mode in self.threshold_modes:
            if mode not in ("ct", "it"):
                raise ConfigError(f"unknown threshold mode {mode!r}")
        if self.fusion not in ("max", "mean"):
            raise ConfigError(f"unknown fusion method {self.fusion!r}")


@dataclass(frozen=True)
class ReportRow:
    ratio_threshold: float
    refs_count: int
    fusion: str
    enrollment: str
    threshold_mode: str
    forgery_protocol: str
    frr: float
    far: float
    dcf_apriori: float
    min_dcf: float
    eer: float
    fte_rate: float
    extra_histogram: tuple[tuple[int, int], ...]
    n_genuine_tests: int
    n_impostor_tests: int
    det_points: tuple[tuple[float, float], ...]


@dataclass
class SimulationReport:
    rows: list[ReportRow]
    metadata: dict


def maybe_features(sig, count: int) -> np.ndarray | None:
    """Feature vector, or None for a degenerate capture (sample consumed)."""
    try:
        return signature_features(sig, count)
    except DegenerateCapture:
        return None


def extract_features_by_user(
    corpus: Corpus, user_ids: Sequence[str], count: int
) -> dict[str, tuple[list, list]]:
    out = {}
    for user_id in user_ids:
        sigs = corpus.users[user_id]
        out[user_id] = (
            [maybe_features(s, count) for s in sigs.genuine],
            [maybe_features(s, count) for s in sigs.forgeries],
        )
    return out


def _training_dicts(features: Mapping[str, tuple[list, list]]):
    genuine = {u: [v for v in g if v is not None] for u, (g, _) in features.items()}
    forgery = {u: [v for v in f if v is not None] for u, (_, f) in features.items()}
    return genuine, forgery


@dataclass
class _EnrolledUser:
    user_id: str
    references: np.ndarray
    pool: UserScorePool
    random_probe: np.ndarray | None


def _enroll_db3(
    matcher: TrainedMatcher,
    params: SystemParameters,
    db3_features: Mapping[str, tuple[list, list]],
    enroll_mode: str,
) -> tuple[list[_EnrolledUser], float, tuple[tuple[int, int], ...]]:
    reserved = ATTEMPT_CAPS[params.refs_count]
    enrolled: list[_EnrolledUser] = []
    histogram: Counter[int] = Counter()
    failed = 0
    for user_id, (genuine, forgeries) in db3_features.items():
        session = enroll_from_pool(
            user_id,
            genuine[:reserved],
            matcher,
            params.te,
            params.refs_count,
            EnrollmentMode(enroll_mode),
        )
        if session.state is not SessionState.ENROLLED:
            failed += 1
            continue
        histogram[session.samples_used - params.refs_count] += 1
        references = np.vstack(session.accepted_refs)
        genuine_probes = [v for v in genuine[reserved:] if v is not None]
        forgery_probes = [v for v in forgeries if v is not None]
        pool, _, _ = build_user_pool(
            matcher,
            references,
            np.array(genuine_probes) if genuine_probes else np.empty((0, references.shape[1])),
            np.array(forgery_probes) if forgery_probes else np.empty((0, references.shape[1])),
            params.fusion,
        )
        enrolled.append(
            _EnrolledUser(
                user_id=user_id,
                references=references,
                pool=pool,
                random_probe=genuine_probes[0] if genuine_probes else None,
            )
        )
    total = len(db3_features)
    if total == 0:
        raise DataError("no test users in DB3")
    fte_rate = failed / total
    return enrolled, fte_rate, tuple(sorted(histogram.items()))


def _metric_rows(
    pools: Sequence[UserScorePool],
    params: SystemParameters,
    config: SimulationConfig,
    enroll_mode: str,
    protocol: str,
    fte_rate: float,
    histogram: tuple[tuple[int, int], ...],
) -> list[ReportRow]:
    costs = config.costs
    pooled = ScoreSets(
        np.concatenate([p.genuine_sorted for p in pools]) if pools else np.empty(0),
        np.concatenate([p.forgery_sorted for p in pools]) if pools else np.empty(0),
    )
    rows = []
    for mode in config.threshold_modes:
        if mode == "ct":
            frr, far = compute_rates(pooled, params.ct)
            apriori = dcf(frr, far, costs)
            _, posterior = min_dcf(pooled, costs)
        else:
            frr, far = it_rates(pools, params.ct, params.alpha1, params.alpha2)
            apriori = dcf(frr, far, costs)
            ct_new, _ = min_dcf(pooled, costs)
            if config.alpha_override is not None:
                a1, a2 = config.alpha_override
                best_frr, best_far = it_rates(pools, ct_new, a1, a2)
                searched = dcf(best_frr, best_far, costs)
            else:
                _, _, searched = grid_search_alphas(pools, ct_new, costs)
            # The deployed operating point is always a candidate, so the
            # a-posteriori minimum can never exceed the a-priori cost.
            posterior = min(searched, apriori)
        _, eer_value = eer(pooled)
        rows.append(
            ReportRow(
                ratio_threshold=params.ratio_threshold,
                refs_count=params.refs_count,
                fusion=params.fusion,
                enrollment=enroll_mode,
                threshold_mode=mode,
                forgery_protocol=protocol,
                frr=frr,
                far=far,
                dcf_apriori=apriori,
                min_dcf=posterior,
                eer=eer_value,
                fte_rate=fte_rate,
                extra_histogram=histogram,
                n_genuine_tests=int(pooled.genuine.size),
                n_impostor_tests=int(pooled.impostor.size),
                det_points=tuple(det_curve(pooled)),
            )
        )
    return rows


def run_random_forgery_eval(
    enrolled: Sequence[_EnrolledUser],
    matcher: TrainedMatcher,
    params: SystemParameters,
    config: SimulationConfig,
    enroll_mode: str,
    fte_rate: float,
    histogram: tuple[tuple[int, int], ...],
) -> list[ReportRow]:
    """Attack each enrolled user with every other enrolled user's designated
    genuine signature; genuine trials are reused from the skilled run."""
    from .calibration import fuse_rows
    from .matcher import score_many

    rf_pools = []
    for user in enrolled:
        probes = [
            other.random_probe
            for other in enrolled
            if other.user_id != user.user_id and other.random_probe is not None
        ]
        if probes:
            matrix = score_many(matcher, np.array(probes), user.references)
            fused = np.sort(fuse_rows(matrix, params.fusion))
        else:
            fused = np.empty(0)
        rf_pools.append(
            UserScorePool(
                genuine_sorted=user.pool.genuine_sorted,
                forgery_sorted=fused,
                es_min=user.pool.es_min,
            )
        )
    return _metric_rows(rf_pools, params, config, enroll_mode, "random", fte_rate, histogram)


def simulate_entry(
    matcher: TrainedMatcher,
    params: SystemParameters,
    db3_features: Mapping[str, tuple[list, list]],
    config: SimulationConfig,
) -> list[ReportRow]:
    """Run the operational phase (enrollment + verification) for one
    trained-and-adjusted matcher."""
    rows = []
    for enroll_mode in config.enroll_modes:
        enrolled, fte_rate, histogram = _enroll_db3(matcher, params, db3_features, enroll_mode)
        pools = [u.pool for u in enrolled]
        rows.extend(
            _metric_rows(pools, params, config, enroll_mode, "skilled", fte_rate, histogram)
        )
        if config.random_forgeries:
            rows.extend(
                run_random_forgery_eval(
                    enrolled, matcher, params, config, enroll_mode, fte_rate, histogram
                )
            )
    return rows


def run_simulation(corpus: Corpus, config: SimulationConfig) -> SimulationReport:
    """Train on DB1, adjust on DB2, then simulate operation on DB3 for every
    feature-selection ratio in the configuration."""
    split, shuffled = split_corpus(corpus, config.split_seed)
    groups = (split.db1_users, split.db2_users, split.db3_users)
    if len(set().union(*groups)) != sum(len(g) for g in groups):
        raise DataError("corpus split produced overlapping user sets")
    k = config.coefficient_count
    db1 = extract_features_by_user(shuffled, split.db1_users, k)
    db2 = extract_features_by_user(shuffled, split.db2_users, k)
    db3 = extract_features_by_user(shuffled, split.db3_users, k)
    genuine1, forgery1 = _training_dicts(db1)
    rows: list[ReportRow] = []
    for ratio in config.ratio_thresholds:
        matcher, client_diffs, impostor_diffs = train_matcher(
            genuine1,
            forgery1,
            ratio,
            p_client=config.costs.p_client,
            p_impostor=config.costs.p_impostor,
        )
        params = adjust_system(
            matcher,
            client_diffs,
            impostor_diffs,
            db2,
            config.refs_count,
            config.fusion,
            config.costs,
        )
        if config.alpha_override is not None:
            params = dataclasses.replace(
                params, alpha1=config.alpha_override[0], alpha2=config.alpha_override[1]
            )
        rows.extend(simulate_entry(matcher, params, db3, config))
    return SimulationReport(rows=rows, metadata=_metadata(split, config, corpus))


def _metadata(split: CorpusSplit, config: SimulationConfig, corpus: Corpus) -> dict:
    meta = {
        "split_seed": split.shuffle_seed,
        "db1_size": len(split.db1_users),
        "db2_size": len(split.db2_users),
        "db3_size": len(split.db3_users),
        "refs_count": config.refs_count,
        "fusion": config.fusion,
        "ratio_thresholds": list(config.ratio_thresholds),
        "coefficient_count": config.coefficient_count,
        "costs": dataclasses.asdict(config.costs),
    }
    if corpus.metadata:
        meta["corpus"] = corpus.metadata
    return meta


# --- report emission --------------------------------------------------------

CSV_COLUMNS = (
    "ratio_threshold",
    "refs_count",
    "fusion",
    "enrollment",
    "threshold_mode",
    "forgery_protocol",
    "frr",
    "far",
    "dcf_apriori",
    "min_dcf",
    "eer",
    "fte_rate",
    "extra_histogram",
    "n_genuine_tests",
    "n_impostor_tests",
)


def _fmt(value: float) -> str:
    return f"{value:.4g}"


def _histogram_text(histogram: tuple[tuple[int, int], ...]) -> str:
    return ";".join(f"+{extra}:{count}" for extra, count in histogram)


def report_csv_text(report: SimulationReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(
            [
                _fmt(row.ratio_threshold),
                row.refs_count,
                row.fusion,
                row.enrollment,
                row.threshold_mode,
                row.forgery_protocol,
                _fmt(row.frr),
                _fmt(row.far),
                _fmt(row.dcf_apriori),
                _fmt(row.min_dcf),
                _fmt(row.eer),
                _fmt(row.fte_rate),
                _histogram_text(row.extra_histogram),
                row.n_genuine_tests,
                row.n_impostor_tests,
            ]
        )
    return buffer.getvalue()


def report_json_document(report: SimulationReport) -> dict:
    return {
        "metadata": report.metadata,
        "rows": [
            {
                **{c: getattr(row, c) for c in CSV_COLUMNS if c != "extra_histogram"},
                "extra_histogram": {f"+{e}": c for e, c in row.extra_histogram},
                "det_points": [[far, frr] for far, frr in row.det_points],
            }
            for row in report.rows
        ],
    }


def emit_report(report: SimulationReport, out_dir, basename: str = "report") -> tuple[Path, Path]:
    """Write the CSV table (4 significant digits) and the JSON document
    (full precision, including DET points)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{basename}.csv"
    json_path = out / f"{basename}.json"
    csv_path.write_text(report_csv_text(report))
    json_path.write_text(json.dumps(report_json_document(report), indent=1))
    return csv_path, json_path
