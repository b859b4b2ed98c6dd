import numpy as np
import pytest

from sigverify.calibration import adjust_system
from sigverify.errors import DataError
from sigverify.matcher import score, score_many
from sigverify.model_io import ModelEntry, ModelFile, load_model, save_model


@pytest.fixture(scope="module")
def saved_model(tmp_path_factory, small_matcher, small_features):
    matcher, client, impostor = small_matcher
    params = adjust_system(matcher, client, impostor, small_features["db2"], 3, "max")
    path = tmp_path_factory.mktemp("model") / "model.json"
    model = ModelFile(
        entries=[ModelEntry(matcher=matcher, t0=params.t0, calibration=params)],
        coefficient_count=8,
        split_seed=7,
    )
    save_model(model, path)
    return path, matcher, params


class TestModelRoundtrip:
    def test_scores_reproduce_within_tolerance(self, saved_model):
        path, matcher, _ = saved_model
        loaded = load_model(path)
        entry = loaded.entry_for_ratio(None)
        rng = np.random.default_rng(50)
        dim = matcher.feature_mask.shape[0]
        for _ in range(50):
            a = rng.normal(size=dim)
            b = rng.normal(size=dim)
            assert score(entry.matcher, a, b) == pytest.approx(score(matcher, a, b), abs=1e-12)

    def test_matrix_scores_reproduce(self, saved_model):
        path, matcher, _ = saved_model
        entry = load_model(path).entry_for_ratio(None)
        rng = np.random.default_rng(51)
        dim = matcher.feature_mask.shape[0]
        probes = rng.normal(size=(6, dim))
        refs = rng.normal(size=(3, dim))
        np.testing.assert_allclose(
            score_many(entry.matcher, probes, refs),
            score_many(matcher, probes, refs),
            atol=1e-12,
        )

    def test_calibration_block_exact(self, saved_model):
        path, _, params = saved_model
        entry = load_model(path).entry_for_ratio(None)
        assert entry.calibration == params
        assert entry.t0 == params.t0

    def test_metadata_roundtrip(self, saved_model):
        path, matcher, _ = saved_model
        loaded = load_model(path)
        assert loaded.coefficient_count == 8
        assert loaded.split_seed == 7
        entry = loaded.entry_for_ratio(matcher.ratio_threshold)
        np.testing.assert_array_equal(entry.matcher.feature_mask, matcher.feature_mask)
        assert entry.matcher.ridge_client == matcher.ridge_client
        assert entry.matcher.ridge_policy == matcher.ridge_policy

    def test_sigma_diagonals_full_length(self, saved_model):
        path, matcher, _ = saved_model
        entry = load_model(path).entry_for_ratio(None)
        assert entry.matcher.sigma_c_diag.shape == matcher.sigma_c_diag.shape
        np.testing.assert_array_equal(entry.matcher.sigma_c_diag, matcher.sigma_c_diag)

    def test_covariances_binary_exact(self, saved_model):
        # JSON floats are written with the shortest round-trip repr, so the
        # stored matrices reload bit for bit.
        path, matcher, _ = saved_model
        entry = load_model(path).entry_for_ratio(None)
        np.testing.assert_array_equal(entry.matcher.cov_client, matcher.cov_client)
        np.testing.assert_array_equal(entry.matcher.cov_impostor, matcher.cov_impostor)
        np.testing.assert_array_equal(entry.matcher.cov_c_inv, matcher.cov_c_inv)

    def test_unknown_ratio_rejected(self, saved_model):
        path, _, _ = saved_model
        with pytest.raises(DataError):
            load_model(path).entry_for_ratio(0.123)

    def test_non_model_file_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        with pytest.raises(DataError):
            load_model(bad)
