"""Corpus handling: interchange files, deterministic synthetic signers, splits.

The interchange format is one JSON document per signature (fields user_id,
sample_rate_hz, kind, x, y, p, gamma, phi); a corpus is a directory of such
files, and loaders also accept one-document-per-line files for bulk import.

The synthetic generator stands in for the non-distributable tablet corpus:
each signer owns a latent set of stroke control points plus pressure and
pen-angle profiles. Genuine samples re-draw the latent curve with a small
time warp and amplitude jitter; skilled forgeries start from the target's
control points with larger shape jitter but carry the forger's own pressure
and angle dynamics, so the shape is close while the dynamics are off.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DataError, TooFewUsers
from .signals import RawSignature

KIND_GENUINE = "genuine"
KIND_FORGERY = "skilled_forgery"


@dataclass
class UserSignatures:
    genuine: list[RawSignature] = field(default_factory=list)
    forgeries: list[RawSignature] = field(default_factory=list)


@dataclass
class Corpus:
    """Per-user genuine and skilled-forgery signatures, insertion ordered.

    metadata carries provenance (e.g. the synthetic generator's noise dials)
    and is echoed into simulation reports.
    """

    users: dict[str, UserSignatures] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def user_ids(self) -> list[str]:
        return list(self.users)

    def add(self, sig: RawSignature, kind: str) -> None:
        entry = self.users.setdefault(sig.user_id, UserSignatures())
        if kind == KIND_GENUINE:
            entry.genuine.append(sig)
        elif kind == KIND_FORGERY:
            entry.forgeries.append(sig)
        else:
            raise DataError(f"unknown signature kind {kind!r}")


# --- interchange format ---------------------------------------------------

def signature_to_json(sig: RawSignature, kind: str) -> dict:
    return {
        "user_id": sig.user_id,
        "sample_rate_hz": sig.sample_rate_hz,
        "kind": kind,
        "x": [int(round(v)) for v in sig.x],
        "y": [int(round(v)) for v in sig.y],
        "p": [int(round(v)) for v in sig.p],
        "gamma": [int(round(v)) for v in sig.gamma],
        "phi": [int(round(v)) for v in sig.phi],
    }


def signature_from_json(doc: dict) -> tuple[RawSignature, str]:
    try:
        sig = RawSignature(
            user_id=doc["user_id"],
            sample_rate_hz=doc.get("sample_rate_hz", 100.0),
            x=doc["x"],
            y=doc["y"],
            p=doc["p"],
            gamma=doc["gamma"],
            phi=doc["phi"],
        )
        kind = doc.get("kind", KIND_GENUINE)
    except KeyError as exc:
        raise DataError(f"signature document is missing field {exc}") from exc
    if kind not in (KIND_GENUINE, KIND_FORGERY):
        raise DataError(f"unknown signature kind {kind!r}")
    return sig, kind


def save_corpus(corpus: Corpus, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for user_id, sigs in corpus.users.items():
        for kind, group in ((KIND_GENUINE, sigs.genuine), (KIND_FORGERY, sigs.forgeries)):
            for i, sig in enumerate(group):
                path = directory / f"{user_id}_{kind}_{i:02d}.json"
                path.write_text(json.dumps(signature_to_json(sig, kind)))
    if corpus.metadata:
        meta_dir = directory / "_meta"
        meta_dir.mkdir(exist_ok=True)
        (meta_dir / "corpus.json").write_text(json.dumps(corpus.metadata, indent=1))


def load_corpus(directory) -> Corpus:
    """Read every .json file under `directory` (sorted for reproducibility).

    Each file holds either a single signature document or one document per
    line.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"corpus directory {directory} does not exist")
    corpus = Corpus()
    meta_path = directory / "_meta" / "corpus.json"
    if meta_path.exists():
        corpus.metadata = json.loads(meta_path.read_text())
    files = sorted(directory.glob("*.json"))
    if not files:
        raise DataError(f"no .json signature files in {directory}")
    for path in files:
        text = path.read_text()
        try:
            docs = [json.loads(text)]
        except json.JSONDecodeError:
            try:
                docs = [json.loads(line) for line in text.splitlines() if line.strip()]
            except json.JSONDecodeError as exc:
                raise DataError(f"cannot parse {path}: {exc}") from exc
        for doc in docs:
            sig, kind = signature_from_json(doc)
            corpus.add(sig, kind)
    return corpus


# --- corpus splitting -----------------------------------------------------

@dataclass(frozen=True)
class CorpusSplit:
    """Disjoint user lists for classifier training, adjustment and testing."""

    db1_users: list[str]
    db2_users: list[str]
    db3_users: list[str]
    shuffle_seed: int


def _split_sizes(n: int) -> tuple[int, int]:
    # Full-scale rule mirrors the 330-person corpus (80/80/rest); smaller
    # corpora split proportionally 24%/24%/52%.
    if n >= 170:
        return 80, 80
    n1 = max(1, int(round(0.24 * n)))
    n2 = max(1, int(round(0.24 * n)))
    return n1, n2


def split_corpus(corpus: Corpus, seed: int) -> tuple[CorpusSplit, Corpus]:
    """Deterministically shuffle users and per-user signature orderings,
    then cut the user list into DB1/DB2/DB3.

    Returns the split together with the reordered corpus the split refers
    to. The same seed always produces the identical result.
    """
    ids = corpus.user_ids()
    if len(ids) < 3:
        raise TooFewUsers(f"need at least 3 users, got {len(ids)}")
    rng = np.random.default_rng([seed, 0x5917])
    order = rng.permutation(len(ids))
    shuffled = Corpus(metadata=dict(corpus.metadata))
    for pos in order:
        user_id = ids[pos]
        sigs = corpus.users[user_id]
        genuine = [sigs.genuine[i] for i in rng.permutation(len(sigs.genuine))]
        forgeries = [sigs.forgeries[i] for i in rng.permutation(len(sigs.forgeries))]
        shuffled.users[user_id] = UserSignatures(genuine=genuine, forgeries=forgeries)
    new_ids = shuffled.user_ids()
    n1, n2 = _split_sizes(len(new_ids))
    split = CorpusSplit(
        db1_users=new_ids[:n1],
        db2_users=new_ids[n1 : n1 + n2],
        db3_users=new_ids[n1 + n2 :],
        shuffle_seed=seed,
    )
    return split, shuffled


# --- synthetic signer generator --------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    """Noise dials of the synthetic corpus, relative to the signature
    bounding box. Defaults keep genuine and forged samples separable but
    overlapping: signer dynamics (pressure, pen angles, tempo) deviate only
    mildly from a population base, signers differ in stability, and a
    fraction of genuine captures are sloppy (noisy or truncated), which
    gives consistency checking something to reject."""

    shape_jitter_genuine: float = 0.03
    shape_jitter_forgery: float = 0.12
    outlier_rate: float = 0.1
    outlier_boost: float = 4.0
    instability_spread: float = 0.45  # sigma of the log-normal per-signer factor
    chaotic_user_rate: float = 0.07  # signers too erratic for repeatable templates
    chaotic_boost: float = 3.5
    min_length: int = 150
    max_length: int = 600
    sample_rate_hz: float = 100.0


# Population-wide dynamics the signer latents deviate from: an arched
# pressure stroke and roughly centered pen angles, as on a real tablet.
_POP_PRESSURE = np.array([0.35, 0.55, 0.7, 0.78, 0.75, 0.68, 0.55, 0.4])
_POP_GAMMA = 1800.0
_POP_PHI = 650.0


@dataclass(frozen=True)
class _SignerLatent:
    ctrl: np.ndarray  # (n_ctrl, 2) stroke control points in [0, 1]^2
    base_length: int
    pressure_anchors: np.ndarray
    gamma_anchors: np.ndarray
    phi_anchors: np.ndarray
    instability: float  # scales shape noise
    dynamics_instability: float  # scales pressure/angle wander


def _signer_latent(seed: int, signer: int, cfg: GeneratorConfig) -> _SignerLatent:
    rng = np.random.default_rng([seed, signer])
    n_ctrl = int(rng.integers(6, 11))
    ctrl = rng.uniform(0.0, 1.0, size=(n_ctrl, 2))
    base_length = int(rng.integers(200, 460))
    pressure = np.clip(_POP_PRESSURE + rng.normal(0.0, 0.1, size=8), 0.15, 1.0)
    # Pen angles carry little signer identity (small offsets, large
    # sample-to-sample wander below), matching how weakly they discriminate
    # on real tablet data.
    gamma = np.clip(
        _POP_GAMMA + rng.normal(0.0, 120.0) + rng.normal(0.0, 60.0, size=8), 0.0, 3600.0
    )
    phi = np.clip(
        _POP_PHI + rng.normal(0.0, 40.0) + rng.normal(0.0, 20.0, size=8), 300.0, 900.0
    )
    instability = float(np.clip(np.exp(rng.normal(0.0, cfg.instability_spread)), 0.6, 2.2))
    dynamics_instability = instability
    if rng.random() < cfg.chaotic_user_rate:
        # Chaotic signers hold the pen erratically rather than drawing a
        # different shape every time: dynamics wander hard, shape only mildly.
        dynamics_instability *= cfg.chaotic_boost
        instability *= 1.3
    return _SignerLatent(
        ctrl=ctrl,
        base_length=base_length,
        pressure_anchors=pressure,
        gamma_anchors=gamma,
        phi_anchors=phi,
        instability=instability,
        dynamics_instability=dynamics_instability,
    )


def _warped_grid(
    rng: np.random.Generator, length: int, amplitude: float, span: float = 1.0
) -> np.ndarray:
    # span < 1 models a truncated capture: the pen came up early and only a
    # prefix of the canonical curve was drawn.
    u = np.linspace(0.0, 1.0, length)
    w = u.copy()
    for k in (1, 2, 3):
        a = float(np.clip(rng.normal(0.0, amplitude), -0.04, 0.04)) / k
        w = w + a * np.sin(k * np.pi * u)
    return np.clip(w, 0.0, 1.0) * span


def _smooth_noise(rng: np.random.Generator, length: int, scale: float) -> np.ndarray:
    # Low-frequency jitter: a handful of random sinusoids, not white noise,
    # so the perturbed trajectory still looks pen-drawn.
    u = np.linspace(0.0, 1.0, length)
    out = np.zeros(length)
    for k in range(1, 7):
        amp = rng.normal(0.0, scale) / np.sqrt(k)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out += amp * np.sin(k * np.pi * u + phase)
    return out

def _profile(anchors: np.ndarray, grid: np.ndarray) -> np.ndarray:
    t = np.linspace(0.0, 1.0, len(anchors))
    return np.interp(grid, t, anchors)


def _render(
    rng: np.random.Generator,
    ctrl: np.ndarray,
    dynamics: _SignerLatent,
    length: int,
    shape_scale: float,
    warp_amplitude: float,
    cfg: GeneratorConfig,
    user_id: str,
    span: float = 1.0,
    dynamics_jitter: float = 1.0,
) -> RawSignature:
    spline = CubicSpline(np.linspace(0.0, 1.0, len(ctrl)), ctrl, axis=0)
    grid = _warped_grid(rng, length, warp_amplitude, span)
    xy = spline(grid)
    x = xy[:, 0] + _smooth_noise(rng, length, shape_scale)
    y = xy[:, 1] + _smooth_noise(rng, length, shape_scale)
    # Sample-to-sample wander of the dynamics: anchors drift around the
    # signer's latent profile, more for unstable signers.
    p_anchors = dynamics.pressure_anchors + rng.normal(0.0, 0.03 * dynamics_jitter, 8)
    g_anchors = (
        dynamics.gamma_anchors
        + rng.normal(0.0, 60.0 * dynamics_jitter)
        + rng.normal(0.0, 30.0 * dynamics_jitter, 8)
    )
    f_anchors = (
        dynamics.phi_anchors
        + rng.normal(0.0, 20.0 * dynamics_jitter)
        + rng.normal(0.0, 10.0 * dynamics_jitter, 8)
    )
    p = _profile(p_anchors, grid) + _smooth_noise(rng, length, 0.5 * shape_scale)
    gamma = _profile(g_anchors, grid) + _smooth_noise(rng, length, 150.0 * shape_scale)
    phi = _profile(f_anchors, grid) + _smooth_noise(rng, length, 40.0 * shape_scale)
    return RawSignature(
        user_id=user_id,
        sample_rate_hz=cfg.sample_rate_hz,
        x=np.clip(np.round(1350.0 + 10000.0 * x), 0, 12700),
        y=np.clip(np.round(1350.0 + 7000.0 * y), 0, 9700),
        p=np.clip(np.round(1024.0 * p), 0, 1024),
        gamma=np.clip(np.round(gamma), 0, 3600),
        phi=np.clip(np.round(phi), 300, 900),
    )


def _sample_length(rng: np.random.Generator, base: int, cfg: GeneratorConfig) -> int:
    length = int(round(base * (1.0 + 0.05 * rng.normal())))
    return int(np.clip(length, cfg.min_length, cfg.max_length))


def generate_synthetic_corpus(
    n_users: int,
    genuine_per_user: int,
    forgeries_per_user: int,
    seed: int,
    config: GeneratorConfig = GeneratorConfig(),
) -> Corpus:
    """Fully deterministic synthetic corpus in tablet units at 100 Hz.

    Every random draw is keyed on (seed, signer, role, sample index), so the
    corpus is reproducible bit for bit regardless of generation order.
    """
    if n_users < 3:
        raise TooFewUsers("need at least 3 synthetic users")
    if genuine_per_user < 1 or forgeries_per_user < 0:
        raise ValueError("signature counts must be positive")
    latents = [_signer_latent(seed, i, config) for i in range(n_users)]
    corpus = Corpus(
        metadata={
            "source": "synthetic",
            "seed": seed,
            "n_users": n_users,
            "genuine_per_user": genuine_per_user,
            "forgeries_per_user": forgeries_per_user,
            "generator": dataclasses.asdict(config),
        }
    )
    for i in range(n_users):
        user_id = f"user{i:03d}"
        latent = latents[i]
        sigs = UserSignatures()
        for j in range(genuine_per_user):
            rng = np.random.default_rng([seed, i, 1, j])
            scale = config.shape_jitter_genuine * latent.instability
            span = 1.0
            if rng.random() < config.outlier_rate:
                # A sloppy capture: either very shaky or cut off early.
                if rng.random() < 0.5:
                    scale *= config.outlier_boost
                else:
                    span = float(rng.uniform(0.55, 0.8))
            sigs.genuine.append(
                _render(
                    rng,
                    latent.ctrl,
                    latent,
                    _sample_length(rng, latent.base_length, config),
                    scale,
                    warp_amplitude=0.012 * latent.instability,
                    cfg=config,
                    user_id=user_id,
                    span=span,
                    dynamics_jitter=latent.dynamics_instability,
                )
            )
        for j in range(forgeries_per_user):
            rng = np.random.default_rng([seed, i, 2, j])
            # Five consecutive signers take turns forging, five attempts each.
            forger = latents[(i + 1 + (j // 5) % (n_users - 1)) % n_users]
            ctrl = latent.ctrl + rng.normal(0.0, config.shape_jitter_forgery, latent.ctrl.shape)
            # The forger practiced the shape and eyeballed the tempo, so the
            # duration lands near the target's; pressure and pen angles stay
            # the forger's own.
            length = int(
                np.clip(
                    round(latent.base_length * (1.0 + 0.2 * rng.normal())),
                    config.min_length,
                    config.max_length,
                )
            )
            sigs.forgeries.append(
                _render(
                    rng,
                    ctrl,
                    forger,
                    length,
                    config.shape_jitter_genuine,
                    warp_amplitude=0.04,
                    cfg=config,
                    user_id=user_id,
                )
            )
        corpus.users[user_id] = sigs
    return corpus
