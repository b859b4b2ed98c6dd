import numpy as np
import pytest

from sigverify.calibration import adjust_system
from sigverify.corpus import generate_synthetic_corpus, split_corpus
from sigverify.matcher import train_matcher
from sigverify.simulation import extract_features_by_user, _training_dicts

SMOKE_SEED = 7
SMOKE_K = 8  # coefficient count for desk-scale fixtures; full K=30 is exercised separately


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(12, 10, 4, seed=SMOKE_SEED)


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return split_corpus(small_corpus, SMOKE_SEED)


@pytest.fixture(scope="session")
def small_features(small_split):
    split, shuffled = small_split
    return {
        "db1": extract_features_by_user(shuffled, split.db1_users, SMOKE_K),
        "db2": extract_features_by_user(shuffled, split.db2_users, SMOKE_K),
        "db3": extract_features_by_user(shuffled, split.db3_users, SMOKE_K),
    }


@pytest.fixture(scope="session")
def small_matcher(small_features):
    genuine, forgery = _training_dicts(small_features["db1"])
    matcher, client, impostor = train_matcher(genuine, forgery, ratio_threshold=0.8)
    return matcher, client, impostor


@pytest.fixture(scope="session")
def small_params(small_matcher, small_features):
    matcher, client, impostor = small_matcher
    return adjust_system(matcher, client, impostor, small_features["db2"], 3, "max")


def random_feature_vectors(rng: np.random.Generator, count: int, length: int) -> np.ndarray:
    return rng.normal(size=(count, length))
