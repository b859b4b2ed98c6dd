"""Acceptance suite: one test per release criterion, stated tolerances pinned.

Each test prints one [ACCEPTANCE] line on success (run pytest -s to watch
them stream)."""

import itertools
import os
import time

import numpy as np
import pytest

from sigverify.corpus import generate_synthetic_corpus
from sigverify.enrollment import ATTEMPT_CAPS, individual_threshold
from sigverify.features import dct_coefficients
from sigverify.matcher import PairSample, build_pair_matrices, finalize, score, train
from sigverify.metrics import (
    CostModel,
    ScoreSets,
    candidate_thresholds,
    compute_rates,
    dcf,
    eer,
    min_dcf,
)
from sigverify.simulation import (
    SimulationConfig,
    report_csv_text,
    run_simulation,
)

PASS = "[ACCEPTANCE] {}: PASS ({:.1f}s)"


def announce(name, started):
    print(PASS.format(name, time.monotonic() - started))


def brute_force_dct(series: np.ndarray, count: int) -> np.ndarray:
    """Direct O(N*K) evaluation of the orthonormal DCT-II definition."""
    n = len(series)
    k = np.arange(min(count, n))
    grid = np.cos(np.pi * np.outer(np.arange(n) + 0.5, k) / n)
    weights = np.where(k == 0, np.sqrt(1.0 / n), np.sqrt(2.0 / n))
    out = np.zeros(count)
    out[: len(k)] = weights * (series @ grid)
    return out


def test_dct_oracle():
    started = time.monotonic()
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(1, 4097))
        k = int(rng.integers(1, 65))
        series = rng.normal(scale=rng.uniform(0.5, 20.0), size=n)
        np.testing.assert_allclose(
            dct_coefficients(series, k), brute_force_dct(series, k), atol=1e-9, rtol=0
        )
    # Constant series: pure DC term, exact to 1e-12.
    for c, n in ((2.0, 4), (-7.5, 33), (0.25, 1000)):
        got = dct_coefficients(np.full(n, c), 8)
        assert abs(got[0] - c * np.sqrt(n)) <= 1e-12
        assert np.abs(got[1:]).max() <= 1e-12
    # Linearity, exact to 1e-12.
    for _ in range(50):
        u = rng.normal(size=64)
        v = rng.normal(size=64)
        a, b = rng.normal(size=2)
        left = dct_coefficients(a * u + b * v, 16)
        right = a * dct_coefficients(u, 16) + b * dct_coefficients(v, 16)
        np.testing.assert_allclose(left, right, atol=1e-12, rtol=0)
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"DCT oracle took {elapsed:.1f}s, budget is 10s"
    announce("DCT oracle (200 random series, 1e-9; exact cases 1e-12)", started)


def scalar_matcher(sigma_c, sigma_i, p_client, p_impostor):
    pairs = [
        PairSample(np.array([sigma_c]), "client"),
        PairSample(np.array([-sigma_c]), "client"),
        PairSample(np.array([sigma_i]), "impostor"),
        PairSample(np.array([-sigma_i]), "impostor"),
    ]
    stats = train(pairs, p_client=p_client, p_impostor=p_impostor, ridge_policy="none")
    return finalize(stats, np.array([True]))


def test_qdc_scalar_oracle():
    started = time.monotonic()
    rng = np.random.default_rng(7)
    for _ in range(100):
        sigma_c = float(rng.uniform(0.5, 2.0))
        sigma_i = float(rng.uniform(0.5, 4.0))
        x = float(rng.uniform(-3.0, 3.0))
        p_client = float(rng.uniform(0.2, 0.8))
        p_impostor = 1.0 - p_client
        matcher = scalar_matcher(sigma_c, sigma_i, p_client, p_impostor)
        var_c = sigma_c * sigma_c
        var_i = sigma_i * sigma_i
        expected = (
            0.5 * x * x * (1.0 / var_i - 1.0 / var_c)
            + 0.5 * np.log(var_i / var_c)
            + np.log(p_client / p_impostor)
        )
        got = score(matcher, np.array([x]), np.array([0.0]))
        assert abs(got - expected) <= 1e-12, (sigma_c, sigma_i, x, got, expected)
    # Symmetry is exact bit for bit in any dimension.
    for _ in range(100):
        d = int(rng.integers(1, 12))
        stats = train(
            (rng.normal(size=(60, d)), 2.0 * rng.normal(size=(60, d))), ridge_policy="none"
        )
        matcher = finalize(stats, np.ones(d, dtype=bool))
        a = rng.normal(size=d)
        b = rng.normal(size=d)
        assert score(matcher, a, b) == score(matcher, b, a)
    announce("QDC scalar oracle (1e-12) and exact pair symmetry", started)


def test_symmetrization():
    started = time.monotonic()
    rng = np.random.default_rng(11)
    genuine = {"a": list(rng.normal(size=(8, 6))), "b": list(rng.normal(size=(5, 6)))}
    forgery = {"a": list(rng.normal(size=(6, 6))), "b": list(rng.normal(size=(4, 6)))}
    client, impostor = build_pair_matrices(genuine, forgery)
    # Sample mean of the symmetrized diffs is exactly zero.
    assert np.abs(client.sum(axis=0)).max() == 0.0
    assert np.abs(impostor.sum(axis=0)).max() == 0.0
    # Second moments match the one-ordering moments about zero within 1e-12.
    stats = train((client, impostor))
    one_client = client[::2]
    one_impostor = impostor[::2]
    np.testing.assert_allclose(
        stats.cov_client, one_client.T @ one_client / len(one_client), atol=1e-12, rtol=0
    )
    np.testing.assert_allclose(
        stats.cov_impostor,
        one_impostor.T @ one_impostor / len(one_impostor),
        atol=1e-12,
        rtol=0,
    )
    announce("symmetrization moments (1e-12, exact zero mean)", started)


def test_metric_optimality():
    started = time.monotonic()
    rng = np.random.default_rng(13)
    for _ in range(50):
        sets = ScoreSets(
            rng.normal(rng.uniform(-1, 2), rng.uniform(0.5, 2.0), int(rng.integers(5, 80))),
            rng.normal(rng.uniform(-2, 1), rng.uniform(0.5, 2.0), int(rng.integers(5, 80))),
        )
        _, best = min_dcf(sets)
        lo = min(sets.genuine.min(), sets.impostor.min()) - 2.0
        hi = max(sets.genuine.max(), sets.impostor.max()) + 2.0
        for t in rng.uniform(lo, hi, 1000):
            frr, far = compute_rates(sets, t)
            assert best <= dcf(frr, far) + 1e-15
        threshold, _ = eer(sets)
        frr, far = compute_rates(sets, threshold)
        balance = abs(far - frr)
        for t in candidate_thresholds(sets):
            f2, a2 = compute_rates(sets, t)
            assert balance <= abs(a2 - f2) + 1e-15
    # Eq. 1 arithmetic is exact on the tagged examples.
    assert dcf(1.0 / 3.0, 0.0) == (1.0 / 3.0) * 0.5
    assert dcf(0.0, 0.0) == 0.0
    assert dcf(0.1, 0.2, CostModel(c_fr=2.0, c_fa=1.0)) == 0.2
    announce("metric optimality (min-DCF vs 1000 thresholds x 50 sets; EER balance)", started)


def test_eq3_endpoints_and_reduction():
    started = time.monotonic()
    rng = np.random.default_rng(17)
    for _ in range(200):
        ct = float(rng.normal(0, 5))
        es = rng.normal(0, 5, int(rng.integers(1, 10)))
        assert individual_threshold(ct, es, 0.0, 0.0) == ct
        assert individual_threshold(ct, es, 1.0, 1.0) == es.min()
    # Byte-for-byte reduction: with both alphas pinned to zero the IT-mode
    # report carries exactly the CT-mode numbers; only the mode label column
    # differs, so it is normalized before comparison.
    corpus = generate_synthetic_corpus(25, 25, 25, seed=31)
    base = dict(
        ratio_thresholds=(0.5,),
        refs_count=3,
        fusion="max",
        enroll_modes=("intelligent", "normal"),
        random_forgeries=True,
        split_seed=31,
        coefficient_count=30,
    )
    ct_csv = report_csv_text(
        run_simulation(corpus, SimulationConfig(threshold_modes=("ct",), **base))
    )
    it_csv = report_csv_text(
        run_simulation(
            corpus,
            SimulationConfig(threshold_modes=("it",), alpha_override=(0.0, 0.0), **base),
        )
    )
    assert ct_csv.replace(",ct,", ",&,") == it_csv.replace(",it,", ",&,")
    announce("Eq.3 endpoints exact; alpha=0 IT report == CT report byte-for-byte", started)


def test_enrollment_state_machine_exhaustive():
    started = time.monotonic()
    from test_enrollment import drive_engine, reference_state_machine

    total = 0
    for refs_target in (3, 5):
        pairs = list(itertools.combinations(range(refs_target), 2))
        for replacement_mismatches in (False, True):
            for bits in itertools.product([False, True], repeat=len(pairs)):
                mismatch = {p for p, bit in zip(pairs, bits) if bit}
                expected = reference_state_machine(
                    refs_target, mismatch, replacement_mismatches
                )
                state, used, refs, _ = drive_engine(
                    refs_target, mismatch, replacement_mismatches
                )
                assert (state, used, refs) == expected
                assert used <= ATTEMPT_CAPS[refs_target]
                if state == "enrolled":
                    assert len(refs) == refs_target
                else:
                    assert used == ATTEMPT_CAPS[refs_target]
                total += 1
    assert total == 2 * (8 + 1024)
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"state machine sweep took {elapsed:.1f}s, budget is 30s"
    announce(f"enrollment state machine exhaustive ({total} scripted runs)", started)


@pytest.fixture(scope="module")
def full_scale_corpus():
    return generate_synthetic_corpus(330, 25, 25, seed=42)


def test_protocol_counts_full_scale(full_scale_corpus):
    started = time.monotonic()
    expectations = {3: 170 * 19, 5: 170 * 15}
    for refs_count, genuine_expected in expectations.items():
        config = SimulationConfig(
            ratio_thresholds=(0.5,),
            refs_count=refs_count,
            fusion="max",
            enroll_modes=("normal",),  # no consistency rejection => zero FTE
            threshold_modes=("ct",),
            random_forgeries=True,
            split_seed=42,
            coefficient_count=30,
        )
        report = run_simulation(full_scale_corpus, config)
        assert report.metadata["db3_size"] == 170
        by_protocol = {r.forgery_protocol: r for r in report.rows}
        skilled = by_protocol["skilled"]
        assert skilled.fte_rate == 0.0
        assert skilled.n_genuine_tests == genuine_expected
        assert skilled.n_impostor_tests == 170 * 25
        random_row = by_protocol["random"]
        assert random_row.n_impostor_tests == 170 * 169
    elapsed = time.monotonic() - started
    assert elapsed < 600.0, f"full-scale protocol run took {elapsed:.0f}s, budget is 600s"
    announce("protocol counts at full scale (170x19 / 170x15 / 170x25 / 170x169)", started)


def test_smoke_corpus_runtime():
    started = time.monotonic()
    corpus = generate_synthetic_corpus(25, 25, 25, seed=7)
    config = SimulationConfig(
        ratio_thresholds=(0.5,),
        refs_count=3,
        fusion="max",
        enroll_modes=("intelligent", "normal"),
        threshold_modes=("ct", "it"),
        random_forgeries=True,
        split_seed=7,
        coefficient_count=30,
    )
    report = run_simulation(corpus, config)
    assert len(report.rows) == 8
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"smoke simulation took {elapsed:.1f}s, budget is 30s"
    announce("25-user smoke simulation inside 30s", started)


def test_direction_of_effect():
    started = time.monotonic()
    seeds = (1, 2, 3, 4, 5)
    cells: dict[tuple, list[float]] = {}
    for seed in seeds:
        corpus = generate_synthetic_corpus(40, 25, 25, seed=seed)
        for fusion in ("max", "mean"):
            config = SimulationConfig(
                ratio_thresholds=(0.5,),
                refs_count=5,
                fusion=fusion,
                enroll_modes=("intelligent", "normal"),
                threshold_modes=("ct", "it"),
                random_forgeries=(fusion == "max"),
                split_seed=seed,
                coefficient_count=30,
            )
            for row in run_simulation(corpus, config).rows:
                key = (fusion, row.enrollment, row.threshold_mode, row.forgery_protocol)
                cells.setdefault(key, []).append(row.min_dcf)

    def mean(*key):
        values = cells[key]
        assert len(values) == len(seeds)
        return float(np.mean(values))

    intelligent_ct = mean("max", "intelligent", "ct", "skilled")
    normal_ct = mean("max", "normal", "ct", "skilled")
    intelligent_it = mean("max", "intelligent", "it", "skilled")
    normal_it = mean("max", "normal", "it", "skilled")
    mean_fusion_ct = mean("mean", "intelligent", "ct", "skilled")
    random_ct = mean("max", "intelligent", "ct", "random")
    assert intelligent_ct <= normal_ct, (intelligent_ct, normal_ct)
    assert intelligent_it <= normal_it, (intelligent_it, normal_it)
    assert intelligent_it <= intelligent_ct, (intelligent_it, intelligent_ct)
    assert intelligent_ct <= mean_fusion_ct, (intelligent_ct, mean_fusion_ct)
    assert random_ct <= intelligent_ct, (random_ct, intelligent_ct)
    announce(
        "direction of effect over 5 seeds "
        f"(intelligent {intelligent_ct:.3f}<=normal {normal_ct:.3f}; "
        f"it {intelligent_it:.3f}<=ct {intelligent_ct:.3f}; "
        f"max {intelligent_ct:.3f}<=mean {mean_fusion_ct:.3f}; "
        f"random {random_ct:.3f}<=skilled {intelligent_ct:.3f})",
        started,
    )


def test_report_invariant_and_determinism():
    started = time.monotonic()
    corpus = generate_synthetic_corpus(14, 12, 6, seed=23)
    config = SimulationConfig(
        ratio_thresholds=(0.5, 0.6),
        refs_count=3,
        fusion="max",
        enroll_modes=("intelligent", "normal"),
        threshold_modes=("ct", "it"),
        random_forgeries=True,
        split_seed=23,
        coefficient_count=12,
    )
    first = run_simulation(corpus, config)
    for row in first.rows:
        assert row.dcf_apriori >= row.min_dcf, row
    second = run_simulation(corpus, config)
    assert report_csv_text(first) == report_csv_text(second)
    assert report_csv_text(first).encode() == report_csv_text(second).encode()
    announce("report invariant (a-priori >= min DCF) and byte-identical determinism", started)


MCYT_DIR = os.environ.get("MCYT_CORPUS_DIR")


@pytest.mark.skipif(
    MCYT_DIR is None,
    reason="MCYT corpus not available (set MCYT_CORPUS_DIR to run the conditional check)",
)
def test_mcyt_reproduction_conditional():
    started = time.monotonic()
    from sigverify.corpus import load_corpus

    corpus = load_corpus(MCYT_DIR)
    config = SimulationConfig(
        ratio_thresholds=(0.5,),
        refs_count=5,
        fusion="max",
        enroll_modes=("intelligent",),
        threshold_modes=("it",),
        split_seed=0,
        coefficient_count=30,
    )
    report = run_simulation(corpus, config)
    row = report.rows[0]
    assert abs(row.min_dcf - 0.0517) <= 0.015
    assert abs(row.fte_rate - 0.0824) <= 0.03
    announce("MCYT reproduction (min DCF within 1.5pp of 5.17%, FTE within 3pp)", started)
