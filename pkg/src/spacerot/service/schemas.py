"""Request/response models for the adaptation service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Head = Literal["zeroshot", "ncm", "l1", "l2", "soba", "baseline"]
Mode = Literal["prototype_only", "symmetric"]


class EngineParams(BaseModel):
    alpha: float = 15.0
    capacity: int = Field(default=16, ge=1)
    head: Head = "soba"
    mode: Mode = "prototype_only"
    rank: Optional[int] = None
    temperature: float = Field(default=100.0, gt=0)
    refresh_fraction: Optional[float] = Field(default=None, gt=0, le=1)
    refresh_interval: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    normalize_prototypes: bool = False
    strict_covariance_normalization: bool = False


class RunRequest(EngineParams):
    features_path: str
    strict_read: bool = False
    include_predictions: bool = False
    dump_queue: bool = False
    dump_spectrum: bool = False


class PredictionsBlock(BaseModel):
    sample_index: list[int]
    true_label: list[int]
    zeroshot_pred: list[int]
    fused_pred: list[int]
    entropy: list[float]


class RunResponse(BaseModel):
    metrics: dict
    predictions: Optional[PredictionsBlock] = None


class SweepRequest(EngineParams):
    features_path: str
    alphas: list[float] = Field(default=[0.0, 5.0, 10.0, 15.0, 20.0])
    capacities: list[int] = Field(default=[2, 4, 8, 16, 32])
    strict_read: bool = False


class SweepResponse(BaseModel):
    records: list[dict]


class SynthRequest(BaseModel):
    out_path: str
    preset: Optional[Literal["ref1"]] = None
    seed: int = 42
    classes: int = Field(default=20, ge=2)
    dim: int = Field(default=64, ge=2)
    samples: int = Field(default=5000, ge=2)
    class_separation: float = 1.0
    covariance: Literal["isotropic", "anisotropic"] = "anisotropic"
    axis_ratios: list[float] = Field(default=[10.0, 10.0])
    confusable_pairs: list[tuple[int, int, float]] = Field(default=[(0, 1, 0.85), (2, 3, 0.85)])
    text_noise: float = 0.15
    text_junk: float = 0.7
    noise_scale: float = 0.08
    mean_dim: int = 8
    shift: Optional[Literal["style_rotation", "sketch_sparsify"]] = None
    shift_magnitude: float = Field(default=0.0, ge=0, le=1)


class SynthResponse(BaseModel):
    path: str
    classes: int
    dim: int
    samples: int
    sha256: str


class SessionCreateRequest(EngineParams):
    features_path: Optional[str] = None      # borrow text weights from a stream file
    text_weights: Optional[list[list[float]]] = None
    class_names: Optional[list[str]] = None
    total_hint: Optional[int] = None


class SessionCreateResponse(BaseModel):
    session_id: str
    classes: int
    dim: int


class SampleRequest(BaseModel):
    feature: list[float]
    label: Optional[int] = None
    strict: bool = False


class SampleResponse(BaseModel):
    prediction: int
    zeroshot_prediction: int
    entropy: float
    refreshed: bool
    warmup: bool


class HealthResponse(BaseModel):
    status: str
    version: str
