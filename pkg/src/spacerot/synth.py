"""Deterministic synthetic embedding streams with controllable confusability.

Class-conditional Gaussians on the unit sphere sharing one covariance, so the
shared-covariance modeling assumption of the rotation head holds exactly. The
noise spectrum is a strictly descending ladder: the first axes (the
``axis_ratios`` entries) carry boosted variance and also host the confusable
pair separations, the next ``mean_dim`` axes carry the class structure with
geometrically decaying variance, and the remaining coordinates get a small
jitter floor. Text rows are the true means tilted by exactly ``text_noise``
radians, with part of the tilt direction leaking onto the boosted axes
(``text_junk``) the way prompt embeddings pick up nuisance directions.

Randomness comes from a counter-based SplitMix64 generator (constants below)
with Box-Muller normals, so any implementation can reproduce streams exactly:

    out(i)     = mix64(state + (i+1) * 0x9E3779B97F4A7C15)
    mix64(z)   = h(h'(z ^ (z >> 30)) ^ ...) per the standard SplitMix64 finalizer
    uniform(i) = ((out(i) >> 11) + 1) * 2**-53          in (0, 1]
    normals    = Box-Muller pairs: r*cos(2 pi u2), r*sin(2 pi u2), r = sqrt(-2 ln u1)

Purpose-specific substreams derive their state as mix64(seed ^ tag) with tags
MEANS=0xA1, LABELS=0xB2, NOISE=0xC3, TEXT=0xD4, PAIR_BASE=0xE5, SHIFT=0xF6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .core import TextWeights

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

TAG_MEANS = 0xA1
TAG_LABELS = 0xB2
TAG_NOISE = 0xC3
TAG_TEXT = 0xD4
TAG_PAIR_BASE = 0xE5
TAG_SHIFT = 0xF6


class SeparationInfeasibleError(ValueError):
    """Could not place the requested class count at the requested spread."""


def _mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, tag: int) -> int:
    return int(_mix64(np.uint64(seed) ^ np.uint64(tag)))


class CounterRng:
    """Counter-mode SplitMix64: output i depends only on (state, i)."""

    def __init__(self, seed: int):
        self.state = np.uint64(seed)
        self.count = 0

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.count + 1, self.count + n + 1, dtype=np.uint64)
        self.count += n
        with np.errstate(over="ignore"):
            return _mix64(self.state + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """Uniforms in (0, 1] with 53-bit resolution."""
        return ((self.raw(n) >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller; consumes 2*ceil(n/2) counters."""
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:n]


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    classes: int = 20
    dim: int = 64
    samples: int = 5000
    class_separation: float = 1.0          # min pairwise angle enforced by packing (rad)
    covariance: str = "anisotropic"        # "isotropic" | "anisotropic"
    axis_ratios: tuple = (10.0, 10.0)      # variance boost of the leading axes
    confusable_pairs: tuple = ((0, 1, 0.85), (2, 3, 0.85))
    text_noise: float = 0.15               # angle between text row and true mean (rad)
    text_junk: float = 0.7                 # fraction of the tilt direction on boosted axes
    mean_dim: int = 8                      # coordinates carrying the class structure
    variance_decay: float = 0.61           # per-axis variance ratio down the ladder
    jitter: float = 0.02                   # noise floor relative to noise_scale
    noise_scale: float = 0.08              # sigma of the leading ladder axis
    mean_profile_power: float = 0.5        # mean coordinate scale ~ ladder sigma**power

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.dim < 2:
            raise ValueError("need dim >= 2")
        if self.samples < self.classes:
            raise ValueError("need at least one sample per class")
        if self.covariance not in ("isotropic", "anisotropic"):
            raise ValueError(f"unknown covariance spec {self.covariance!r}")
        if not self.class_separation > 0:
            raise ValueError("class_separation must be positive")
        for (a, b, s) in self.confusable_pairs:
            if not (0 <= a < self.classes and 0 <= b < self.classes and a != b):
                raise ValueError(f"bad confusable pair ({a}, {b})")
            if not 0.0 <= s <= 1.0:
                raise ValueError("overlap strength must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["axis_ratios"] = list(self.axis_ratios)
        d["confusable_pairs"] = [list(p) for p in self.confusable_pairs]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if "axis_ratios" in data:
            data["axis_ratios"] = tuple(data["axis_ratios"])
        if "confusable_pairs" in data:
            data["confusable_pairs"] = tuple(tuple(p) for p in data["confusable_pairs"])
        return cls(**data)


REF1 = SynthConfig()


def _sigma_profile(cfg: SynthConfig) -> tuple[np.ndarray, int, int]:
    """Per-coordinate noise sigmas plus (junk axis count, ladder width)."""
    d = cfg.dim
    if cfg.covariance == "isotropic":
        return np.full(d, cfg.noise_scale), 0, min(cfg.mean_dim, d)
    nj = min(len(cfg.axis_ratios), d - 1)
    mdim = min(cfg.mean_dim, d - nj)
    lam = np.full(d, (cfg.jitter * cfg.noise_scale) ** 2)
    for j in range(nj):
        lam[j] = (cfg.noise_scale ** 2) * cfg.axis_ratios[j] * (cfg.variance_decay ** j)
    for i in range(mdim):
        lam[nj + i] = (cfg.noise_scale ** 2) * (cfg.variance_decay ** i)
    return np.sqrt(lam), nj, mdim


def _mean_profile(cfg: SynthConfig, mdim: int) -> np.ndarray:
    return np.array(
        [(cfg.variance_decay ** (i / 2.0)) ** cfg.mean_profile_power for i in range(mdim)]
    )


def _place_means(cfg: SynthConfig, nj: int, mdim: int) -> np.ndarray:
    rng = CounterRng(derive_seed(cfg.seed, TAG_MEANS))
    prof = _mean_profile(cfg, mdim)
    d, n = cfg.dim, cfg.classes
    means = np.zeros((n, d))
    placed = []
    tries = 0
    k = 0
    cos_limit = math.cos(cfg.class_separation)
    while k < n:
        v = np.zeros(d)
        v[nj:nj + mdim] = rng.normal(mdim) * prof
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            continue
        v /= norm
        if placed and float(np.max(np.stack(placed) @ v)) > cos_limit:
            tries += 1
            if tries > 4000:
                raise SeparationInfeasibleError(
                    f"placed {k}/{n} classes at min separation "
                    f"{cfg.class_separation:.3f} rad in {mdim} mean dims; "
                    "reduce class_separation or the class count"
                )
            continue
        placed.append(v)
        means[k] = v
        k += 1
        tries = 0
    # confusable pairs: symmetric split across the midplane of a boosted axis
    for i, (a, b, s) in enumerate(cfg.confusable_pairs):
        half = (1.0 - s) * (math.pi / 2.0) / 2.0
        axis_idx = (i % nj) if nj else (nj + i % max(mdim, 1))
        ax = np.zeros(d)
        ax[axis_idx] = 1.0
        mid = means[a] - np.dot(means[a], ax) * ax
        mid /= np.linalg.norm(mid)
        means[a] = math.cos(half) * mid + math.sin(half) * ax
        means[b] = math.cos(half) * mid - math.sin(half) * ax
    return means


def _text_rows(cfg: SynthConfig, means: np.ndarray, nj: int, mdim: int) -> np.ndarray:
    rng = CounterRng(derive_seed(cfg.seed, TAG_TEXT))
    prof = _mean_profile(cfg, mdim)
    d, n = cfg.dim, cfg.classes
    rows = np.zeros((n, d))
    for k in range(n):
        v = np.zeros(d)
        v[nj:nj + mdim] = rng.normal(mdim) * prof
        v -= np.dot(v, means[k]) * means[k]
        v /= np.linalg.norm(v)
        if cfg.text_junk > 0 and nj:
            draws = rng.uniform(2)
            jaxis = int(draws[0] * nj)
            sign = 1.0 if draws[1] < 0.5 else -1.0
            jv = np.zeros(d)
            jv[jaxis] = sign
            jv -= np.dot(jv, means[k]) * means[k]
            jv /= np.linalg.norm(jv)
            u = math.sqrt(1.0 - cfg.text_junk ** 2) * v + cfg.text_junk * jv
            u -= np.dot(u, means[k]) * means[k]
            u /= np.linalg.norm(u)
        else:
            u = v
        rows[k] = math.cos(cfg.text_noise) * means[k] + math.sin(cfg.text_noise) * u
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate(cfg: SynthConfig) -> tuple[TextWeights, np.ndarray, np.ndarray]:
    """Produce (text weights, unit-norm features (T, d), labels (T,))."""
    sig, nj, mdim = _sigma_profile(cfg)
    means = _place_means(cfg, nj, mdim)
    # balanced labels, deterministically shuffled
    t = cfg.samples
    labels = np.tile(np.arange(cfg.classes), -(-t // cfg.classes))[:t]
    rng_lab = CounterRng(derive_seed(cfg.seed, TAG_LABELS))
    order = np.lexsort((np.arange(t), rng_lab.uniform(t)))
    labels = labels[order]
    rng_noise = CounterRng(derive_seed(cfg.seed, TAG_NOISE))
    features = means[labels] + rng_noise.normal(t * cfg.dim).reshape(t, cfg.dim) * sig
    features /= np.linalg.norm(features, axis=1, keepdims=True)
    weights = TextWeights(
        matrix=_text_rows(cfg, means, nj, mdim),
        class_names=tuple(f"class_{i:03d}" for i in range(cfg.classes)),
    )
    return weights, features, labels.astype(np.int64)


def true_means(cfg: SynthConfig) -> np.ndarray:
    """The class mean directions the generator sampled around (for tests)."""
    sig, nj, mdim = _sigma_profile(cfg)
    return _place_means(cfg, nj, mdim)


def shift_stream(
    features: np.ndarray,
    shift: str,
    magnitude: float,
    seed: int = 0,
) -> np.ndarray:
    """Apply a deterministic distribution shift to a feature block.

    style_rotation: disjoint planar rotations by magnitude * pi/2 over a
    seeded coordinate pairing (an isometry). sketch_sparsify: zero a seeded
    subset of floor(magnitude * d) coordinates, then re-normalize.
    """
    if not 0.0 <= magnitude <= 1.0:
        raise ValueError("magnitude must lie in [0, 1]")
    feats = np.array(features, dtype=np.float64)
    if magnitude == 0.0:
        return feats
    d = feats.shape[1]
    rng = CounterRng(derive_seed(seed, TAG_SHIFT))
    perm = np.lexsort((np.arange(d), rng.uniform(d)))
    if shift == "style_rotation":
        angle = magnitude * math.pi / 2.0
        c, s = math.cos(angle), math.sin(angle)
        out = feats.copy()
        for i in range(0, d - 1, 2):
            a, b = perm[i], perm[i + 1]
            fa, fb = feats[:, a].copy(), feats[:, b].copy()
            out[:, a] = c * fa - s * fb
            out[:, b] = s * fa + c * fb
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        return out / np.where(norms == 0, 1.0, norms)
    if shift == "sketch_sparsify":
        kill = perm[: int(magnitude * d)]
        out = feats.copy()
        out[:, kill] = 0.0
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        degenerate = norms[:, 0] == 0
        out[degenerate] = feats[degenerate]
        norms[degenerate] = 1.0
        return out / norms
    raise ValueError(f"unknown shift {shift!r}")


def config_manifest(cfg: SynthConfig) -> dict:
    """Provenance block embedded in generated stream files."""
    return {"generator": "spacerot.synth", "config": cfg.to_dict()}


def write_synthetic(cfg: SynthConfig, path) -> dict:
    """Generate a stream and write it as a feature stream file."""
    from . import streamio

    weights, features, labels = generate(cfg)
    streamio.write_stream(path, weights, features, labels, provenance=config_manifest(cfg))
    return {
        "path": str(path),
        "classes": cfg.classes,
        "dim": cfg.dim,
        "samples": cfg.samples,
    }
