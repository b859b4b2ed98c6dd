import itertools

import numpy as np
import pytest

from sigverify.calibration import SystemParameters
from sigverify.enrollment import (
    ATTEMPT_CAPS,
    EnrollmentMode,
    EnrollmentSession,
    SessionState,
    advance_session,
    build_template,
    consistency_check,
    enroll_from_pool,
    fuse,
    load_template,
    save_template,
    verify,
)
from sigverify.errors import (
    EmptyScores,
    IncompleteScores,
    NotEnrolled,
    SessionTerminal,
)
from sigverify.matcher import finalize, train
from sigverify.signals import RawSignature

TE = 5.0
MATCH, MISMATCH = 10.0, 0.0


def small_real_matcher(d=4, seed=0):
    rng = np.random.default_rng(seed)
    stats = train((rng.normal(scale=0.5, size=(200, d)), rng.normal(scale=2.0, size=(200, d))))
    return finalize(stats, np.ones(d, dtype=bool))


class TestConsistencyCheck:
    def test_three_refs_reject_double_mismatch(self):
        m = np.array([[0, 50, 10], [50, 0, 10], [10, 10, 0]], float)
        assert consistency_check(m, te=30, refs_target=3) == 2

    def test_three_refs_single_mismatches_are_tolerated(self):
        m = np.array([[0, 50, 50], [50, 0, 10], [50, 10, 0]], float)
        assert consistency_check(m, te=30, refs_target=3) is None

    def test_five_refs_three_of_four_rule(self):
        m = np.full((5, 5), 40.0)
        np.fill_diagonal(m, 0.0)
        for j in (0, 1, 2):
            m[4, j] = m[j, 4] = 10.0
        assert consistency_check(m, te=30, refs_target=5) == 4

    def test_lowest_sum_breaks_rejectable_ties(self):
        # Both 0 and 2 mismatch the other two; 2 has the lower score sum.
        m = np.array([[0, 4, 2], [4, 0, 3], [2, 3, 0]], float)
        assert consistency_check(m, te=5, refs_target=3) == 2
        # Equal sums fall back to the lowest index.
        m = np.zeros((3, 3))
        assert consistency_check(m, te=5, refs_target=3) == 0

    def test_boundary_score_is_a_match(self):
        m = np.array([[0, TE, TE], [TE, 0, TE], [TE, TE, 0]], float)
        assert consistency_check(m, te=TE, refs_target=3) is None

    def test_incomplete_scores(self):
        with pytest.raises(IncompleteScores):
            consistency_check(np.zeros((2, 2)), te=1, refs_target=3)
        m = np.zeros((3, 3))
        m[0, 1] = np.nan
        with pytest.raises(IncompleteScores):
            consistency_check(m, te=1, refs_target=3)


def reference_state_machine(refs_target, mismatch_pairs, replacement_mismatches):
    """Independent re-statement of the enrollment rules, for exhaustive
    comparison: strict-below-TE mismatch, reject-one-per-round (most
    mismatching by score sum, lowest index on ties), 6/10 attempt caps."""
    cap = ATTEMPT_CAPS[refs_target]
    needed = 2 if refs_target == 3 else 3

    def pair_score(i, j):
        key = (min(i, j), max(i, j))
        if key in mismatch_pairs:
            return MISMATCH
        if replacement_mismatches and max(key) >= refs_target:
            return MISMATCH
        return MATCH

    refs = list(range(refs_target))
    used = refs_target
    next_id = refs_target
    while True:
        counts = {
            i: sum(1 for j in refs if j != i and pair_score(i, j) < TE) for i in refs
        }
        rejectable = [i for i in refs if counts[i] >= needed]
        if not rejectable:
            return "enrolled", used, refs
        sums = {i: sum(pair_score(i, j) for j in refs if j != i) for i in rejectable}
        victim = min(rejectable, key=lambda i: (sums[i], refs.index(i)))
        refs.remove(victim)
        if used >= cap:
            return "failed_to_enroll", used, refs
        refs.append(next_id)
        next_id += 1
        used += 1


def drive_engine(refs_target, mismatch_pairs, replacement_mismatches):
    def pair_score(i, j):
        key = (min(i, j), max(i, j))
        if key in mismatch_pairs:
            return MISMATCH
        if replacement_mismatches and max(key) >= refs_target:
            return MISMATCH
        return MATCH

    def scorer(a, b):
        return pair_score(int(a[0]), int(b[0]))

    session = EnrollmentSession("u", refs_target=refs_target)
    next_id = 0
    while not session.state.terminal:
        advance_session(session, np.array([float(next_id)]), scorer, TE)
        next_id += 1
    refs = [int(v[0]) for v in session.accepted_refs]
    return session.state.value, session.samples_used, refs, session


@pytest.mark.parametrize("refs_target", [3, 5])
@pytest.mark.parametrize("replacement_mismatches", [False, True])
def test_state_machine_exhaustive(refs_target, replacement_mismatches):
    pairs = list(itertools.combinations(range(refs_target), 2))
    for bits in itertools.product([False, True], repeat=len(pairs)):
        mismatch_pairs = {p for p, bit in zip(pairs, bits) if bit}
        expected = reference_state_machine(refs_target, mismatch_pairs, replacement_mismatches)
        state, used, refs, session = drive_engine(
            refs_target, mismatch_pairs, replacement_mismatches
        )
        assert (state, used, refs) == expected, f"pattern {mismatch_pairs}"
        assert used <= ATTEMPT_CAPS[refs_target]
        if state == "enrolled":
            assert len(refs) == refs_target
        with pytest.raises(SessionTerminal):
            advance_session(session, np.array([99.0]), lambda a, b: MATCH, TE)


def test_replaying_identical_sequence_is_deterministic():
    mismatch = {(0, 2), (1, 2)}
    first = drive_engine(3, mismatch, False)
    second = drive_engine(3, mismatch, False)
    assert first[:3] == second[:3]


def test_intelligent_with_te_minus_inf_degenerates_to_normal():
    rng = np.random.default_rng(21)
    samples = [rng.normal(size=4) for _ in range(5)]
    matcher = small_real_matcher()
    smart = enroll_from_pool("u", samples, matcher, -np.inf, 5, EnrollmentMode.INTELLIGENT)
    normal = enroll_from_pool("u", samples, matcher, 0.0, 5, EnrollmentMode.NORMAL)
    assert smart.state is SessionState.ENROLLED
    assert smart.samples_used == normal.samples_used == 5
    np.testing.assert_array_equal(np.vstack(smart.accepted_refs), np.vstack(normal.accepted_refs))


def test_pool_exhaustion_is_failure_to_enroll():
    matcher = small_real_matcher()
    rng = np.random.default_rng(22)
    session = enroll_from_pool(
        "u", [rng.normal(size=4), None, rng.normal(size=4)], matcher, -np.inf, 3
    )
    assert session.state is SessionState.FAILED_TO_ENROLL
    assert session.samples_used == 2  # the None consumed a sample, not an attempt


class TestFuse:
    def test_examples(self):
        assert fuse([10, 20, 15], "max") == 20
        assert fuse([10, 20, 15], "mean") == 15
        assert fuse([7.5], "max") == fuse([7.5], "mean") == 7.5

    def test_empty(self):
        with pytest.raises(EmptyScores):
            fuse([], "max")

    def test_max_dominates_mean(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            scores = rng.normal(size=rng.integers(1, 6))
            assert fuse(scores, "max") >= fuse(scores, "mean")


def raw_from_arrays(x, y):
    n = len(x)
    return RawSignature("u", 100, x, y, [500] * n, [1800] * n, [600] * n)


def params_for(ct, alpha1=0.0, alpha2=0.0, fusion="max"):
    return SystemParameters(
        ratio_threshold=0.5,
        t0=0.0,
        te=0.0,
        ct=ct,
        alpha1=alpha1,
        alpha2=alpha2,
        fusion=fusion,
        refs_count=3,
    )


@pytest.fixture(scope="module")
def enrolled_template():
    matcher = small_real_matcher(d=210, seed=30)
    rng = np.random.default_rng(31)
    base_x = rng.integers(1000, 9000, 80)
    base_y = rng.integers(1000, 7000, 80)
    samples = [
        raw_from_arrays(base_x + rng.integers(-20, 20, 80), base_y + rng.integers(-20, 20, 80))
        for _ in range(3)
    ]
    session = EnrollmentSession("u", refs_target=3)
    from sigverify.enrollment import enroll_step

    for s in samples:
        enroll_step(session, s, matcher, te=-np.inf)
    template = build_template(session, matcher)
    return matcher, template, samples


class TestVerify:
    def test_probe_identical_to_reference(self, enrolled_template):
        matcher, template, samples = enrolled_template
        result = verify(template, samples[0], matcher, params_for(ct=-1e9), "ct")
        assert result.reference_scores[0] == matcher.constant_term

    def test_boundary_fused_score_accepts(self, enrolled_template):
        matcher, template, samples = enrolled_template
        probe = samples[1]
        dry = verify(template, probe, matcher, params_for(ct=0.0), "ct")
        pinned = verify(template, probe, matcher, params_for(ct=dry.fused_score), "ct")
        assert pinned.accepted
        assert pinned.threshold_used == dry.fused_score

    def test_zero_alphas_make_it_equal_ct(self, enrolled_template):
        matcher, template, samples = enrolled_template
        rng = np.random.default_rng(33)
        for _ in range(10):
            probe = raw_from_arrays(
                rng.integers(1000, 9000, 60), rng.integers(1000, 7000, 60)
            )
            params = params_for(ct=float(rng.normal()), alpha1=0.0, alpha2=0.0)
            r_ct = verify(template, probe, matcher, params, "ct")
            r_it = verify(template, probe, matcher, params, "it")
            assert r_ct.accepted == r_it.accepted
            assert r_ct.threshold_used == r_it.threshold_used

    def test_max_accept_region_contains_mean_accept_region(self, enrolled_template):
        matcher, template, _ = enrolled_template
        rng = np.random.default_rng(34)
        threshold = matcher.constant_term - 5.0
        for _ in range(30):
            probe = raw_from_arrays(
                rng.integers(1000, 9000, 60), rng.integers(1000, 7000, 60)
            )
            r_mean = verify(template, probe, matcher, params_for(threshold, fusion="mean"), "ct")
            r_max = verify(template, probe, matcher, params_for(threshold, fusion="max"), "ct")
            if r_mean.accepted:
                assert r_max.accepted

    def test_not_enrolled_template_refused(self):
        session = EnrollmentSession("u", refs_target=3)
        with pytest.raises(NotEnrolled):
            build_template(session, small_real_matcher())


def test_template_roundtrip(tmp_path, enrolled_template):
    _, template, _ = enrolled_template
    path = tmp_path / "u.json"
    save_template(template, path)
    loaded = load_template(path)
    assert loaded.user_id == template.user_id
    np.testing.assert_array_equal(loaded.references, template.references)
    np.testing.assert_array_equal(loaded.enrollment_scores, template.enrollment_scores)
    assert loaded.enrollment_mode == template.enrollment_mode
