"""Model file: trained matcher(s) plus calibration, one JSON document.

The file stores the covariance matrices actually inverted (regularization
already applied) rather than their inverses; loading re-runs the same
deterministic factorization, which reproduces scores to machine precision.
Floats are written with Python's shortest round-trip repr, so every value
reloads binary-exact. One file may hold several matcher entries, one per
feature-selection ratio, each with its own calibration block once the
system has been adjusted.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .calibration import SystemParameters
from .features import CHANNEL_ORDER, DEFAULT_COEFFICIENT_COUNT
from .matcher import TrainedMatcher, _cholesky_inverse
from .metrics import CostModel
from .errors import DataError

FORMAT_NAME = "sigverify-model"
FORMAT_VERSION = 1


@dataclass
class ModelEntry:
    """One trained matcher with its initial threshold and (optionally) the
    calibration block produced by system adjustment."""

    matcher: TrainedMatcher
    t0: float | None = None
    calibration: SystemParameters | None = None


@dataclass
class ModelFile:
    entries: list[ModelEntry]
    coefficient_count: int = DEFAULT_COEFFICIENT_COUNT
    split_seed: int | None = None

    def entry_for_ratio(self, ratio: float | None) -> ModelEntry:
        if ratio is None:
            if len(self.entries) == 1:
                return self.entries[0]
            calibrated = [e for e in self.entries if e.calibration is not None]
            if len(calibrated) == 1:
                return calibrated[0]
            raise DataError(
                "model holds several matcher entries; select one with --ratio"
            )
        for entry in self.entries:
            if entry.matcher.ratio_threshold == ratio:
                return entry
        raise DataError(f"model has no entry for ratio threshold {ratio}")


def _matrix(rows) -> np.ndarray:
    return np.asarray(rows, dtype=np.float64)


def _params_to_json(params: SystemParameters) -> dict:
    return {
        "ratio_threshold": params.ratio_threshold,
        "t0": params.t0,
        "te": params.te,
        "ct": params.ct,
        "alpha1": params.alpha1,
        "alpha2": params.alpha2,
        "fusion": params.fusion,
        "refs_count": params.refs_count,
        "c_fr": params.costs.c_fr,
        "c_fa": params.costs.c_fa,
        "p_client": params.costs.p_client,
        "p_impostor": params.costs.p_impostor,
    }


def _params_from_json(doc: dict) -> SystemParameters:
    return SystemParameters(
        ratio_threshold=doc["ratio_threshold"],
        t0=doc["t0"],
        te=doc["te"],
        ct=doc["ct"],
        alpha1=doc["alpha1"],
        alpha2=doc["alpha2"],
        fusion=doc["fusion"],
        refs_count=doc["refs_count"],
        costs=CostModel(
            c_fr=doc["c_fr"],
            c_fa=doc["c_fa"],
            p_client=doc["p_client"],
            p_impostor=doc["p_impostor"],
        ),
    )


def _entry_to_json(entry: ModelEntry) -> dict:
    m = entry.matcher
    return {
        "ratio_threshold": m.ratio_threshold,
        "feature_mask": [bool(v) for v in m.feature_mask],
        "sigma_c_diag": m.sigma_c_diag.tolist(),
        "sigma_i_diag": m.sigma_i_diag.tolist(),
        "cov_client": m.cov_client.tolist(),
        "cov_impostor": m.cov_impostor.tolist(),
        "ridge_client": m.ridge_client,
        "ridge_impostor": m.ridge_impostor,
        "ridge_policy": m.ridge_policy,
        "p_client": m.p_client,
        "p_impostor": m.p_impostor,
        "t0": entry.t0,
        "calibration": None if entry.calibration is None else _params_to_json(entry.calibration),
    }


def _entry_from_json(doc: dict) -> ModelEntry:
    cov_client = _matrix(doc["cov_client"])
    cov_impostor = _matrix(doc["cov_impostor"])
    inv_c, log_det_c = _cholesky_inverse(cov_client, "client")
    inv_i, log_det_i = _cholesky_inverse(cov_impostor, "impostor")
    p_client = doc["p_client"]
    p_impostor = doc["p_impostor"]
    matcher = TrainedMatcher(
        feature_mask=np.asarray(doc["feature_mask"], dtype=bool),
        sigma_c_diag=_matrix(doc["sigma_c_diag"]),
        sigma_i_diag=_matrix(doc["sigma_i_diag"]),
        cov_client=cov_client,
        cov_impostor=cov_impostor,
        cov_c_inv=inv_c,
        cov_i_inv=inv_i,
        log_det_ratio=0.5 * (log_det_i - log_det_c),
        prior_term=float(np.log(p_client / p_impostor)),
        ridge_client=doc["ridge_client"],
        ridge_impostor=doc["ridge_impostor"],
        ridge_policy=doc["ridge_policy"],
        p_client=p_client,
        p_impostor=p_impostor,
        ratio_threshold=doc["ratio_threshold"],
    )
    calibration = doc.get("calibration")
    return ModelEntry(
        matcher=matcher,
        t0=doc.get("t0"),
        calibration=None if calibration is None else _params_from_json(calibration),
    )


def save_model(model: ModelFile, path) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layout": {
            "channel_order": list(CHANNEL_ORDER),
            "coefficients_per_channel": model.coefficient_count,
        },
        "split_seed": model.split_seed,
        "matchers": [_entry_to_json(e) for e in model.entries],
    }
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise DataError(f"{path} is not a {FORMAT_NAME} file")
    layout = doc.get("layout", {})
    if tuple(layout.get("channel_order", ())) != CHANNEL_ORDER:
        raise DataError("model channel order does not match this build")
    return ModelFile(
        entries=[_entry_from_json(e) for e in doc["matchers"]],
        coefficient_count=layout.get("coefficients_per_channel", DEFAULT_COEFFICIENT_COUNT),
        split_seed=doc.get("split_seed"),
    )
