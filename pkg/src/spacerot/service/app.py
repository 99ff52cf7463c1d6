"""FastAPI service hosting the adaptation engine.

Two surfaces: batch endpoints that run whole stream files living on the
server's filesystem (/runs, /sweeps, /synth), and stateful sessions that
adapt one pushed sample at a time (/sessions). Batch runs are deterministic;
metric wall times are the only non-deterministic fields and sweeps omit them.
"""

from __future__ import annotations

import hashlib
import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..core import TextWeights, InvalidValueError, DimensionMismatchError, ingest_feature
from ..classifier import FusionConfig
from ..engine import RefreshSchedule, StreamRunner, run_stream, evaluate
from ..stats import InsufficientStatisticsError
from ..basis import BasisFailureError
from ..streamio import read_stream, StreamFormatError
from ..synth import SynthConfig, REF1, generate, shift_stream, config_manifest
from .. import streamio
from . import schemas

SCHEMA_VERSION = 1


def _usage(message: str) -> HTTPException:
    return HTTPException(status_code=400, detail={"kind": "usage", "message": message})


def _input_format(message: str) -> HTTPException:
    return HTTPException(status_code=422, detail={"kind": "input-format", "message": message})


def _numerical(message: str) -> HTTPException:
    return HTTPException(status_code=500, detail={"kind": "numerical", "message": message})


def _schedule(params: schemas.EngineParams, total: int | None) -> RefreshSchedule:
    if params.refresh_interval is not None and params.refresh_fraction is not None:
        raise _usage("pass either refresh_fraction or refresh_interval, not both")
    if params.refresh_interval is not None:
        return RefreshSchedule(mode="interval", interval=params.refresh_interval)
    fraction = params.refresh_fraction if params.refresh_fraction is not None else 0.1
    return RefreshSchedule(mode="fraction", fraction=fraction, total_hint=total)


def _config_echo(params: schemas.EngineParams, extra: dict | None = None) -> dict:
    cfg = {
        "alpha": params.alpha,
        "capacity": params.capacity,
        "head": params.head,
        "mode": params.mode,
        "rank": params.rank,
        "temperature": params.temperature,
        "refresh": (
            {"mode": "interval", "interval": params.refresh_interval}
            if params.refresh_interval is not None
            else {"mode": "fraction", "fraction": params.refresh_fraction if params.refresh_fraction is not None else 0.1}
        ),
        "seed": params.seed,
        "normalize_prototypes": params.normalize_prototypes,
        "strict_covariance_normalization": params.strict_covariance_normalization,
    }
    if extra:
        cfg.update(extra)
    return cfg


def _load_stream(path: str, strict: bool):
    try:
        return read_stream(path, strict=strict)
    except FileNotFoundError:
        raise _input_format(f"no such file: {path}")
    except StreamFormatError as exc:
        raise _input_format(str(exc))
    except InvalidValueError as exc:
        raise _input_format(str(exc))


def _execute_run(req: schemas.RunRequest) -> schemas.RunResponse:
    weights, feats, labels, _manifest = _load_stream(req.features_path, req.strict_read)
    schedule = _schedule(req, feats.shape[0])
    fusion = FusionConfig(
        alpha=req.alpha, head=req.head, normalize_prototypes=req.normalize_prototypes
    )
    runner = StreamRunner(
        weights,
        fusion=fusion,
        schedule=schedule,
        capacity=req.capacity,
        temperature=req.temperature,
        mode=req.mode,
        rank_keep=req.rank,
        strict_covariance_normalization=req.strict_covariance_normalization,
    )
    total = feats.shape[0]
    fused = np.empty(total, dtype=np.int64)
    zero = np.empty(total, dtype=np.int64)
    ent = np.empty(total, dtype=np.float64)
    try:
        for t in range(total):
            label = int(labels[t]) if labels.size else None
            result = runner.step(feats[t], label)
            fused[t] = result.prediction
            zero[t] = result.zeroshot_prediction
            ent[t] = result.entropy
    except DimensionMismatchError as exc:
        raise _input_format(str(exc))
    except (InsufficientStatisticsError, BasisFailureError) as exc:
        raise _numerical(str(exc))
    metrics = runner.finalize_metrics()
    predictions = {"fused_pred": fused, "zeroshot_pred": zero, "entropy": ent}
    has_labels = bool(labels.size) and bool((labels >= 0).any())
    report = evaluate(predictions, labels if has_labels else None)
    body = {
        "schema_version": SCHEMA_VERSION,
        "config": _config_echo(req, {"features_path": req.features_path}),
        **metrics.to_dict(),
        "confusion": report["confusion"],
    }
    if req.dump_queue:
        body["queue"] = runner.queue.snapshot()
    if req.dump_spectrum and runner.basis is not None:
        body["singular_values"] = runner.basis.singular_values.tolist()
    pred_block = None
    if req.include_predictions:
        pred_block = schemas.PredictionsBlock(
            sample_index=list(range(total)),
            true_label=labels.tolist() if labels.size else [-1] * total,
            zeroshot_pred=zero.tolist(),
            fused_pred=fused.tolist(),
            entropy=ent.tolist(),
        )
    return schemas.RunResponse(metrics=body, predictions=pred_block)


def create_app() -> FastAPI:
    app = FastAPI(title="spacerot", version=__version__)
    app.state.sessions = {}
    app.state.sessions_lock = threading.Lock()

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/runs", response_model=schemas.RunResponse)
    def runs(req: schemas.RunRequest):
        return _execute_run(req)

    @app.post("/sweeps", response_model=schemas.SweepResponse)
    def sweeps(req: schemas.SweepRequest):
        weights, feats, labels, _manifest = _load_stream(req.features_path, req.strict_read)
        has_labels = bool(labels.size) and bool((labels >= 0).any())
        records = []
        for capacity in req.capacities:
            for alpha in req.alphas:
                fusion = FusionConfig(
                    alpha=alpha, head=req.head, normalize_prototypes=req.normalize_prototypes
                )
                schedule = _schedule(req, feats.shape[0])
                try:
                    metrics, _preds = run_stream(
                        feats,
                        weights,
                        labels=labels if has_labels else None,
                        fusion=fusion,
                        schedule=schedule,
                        capacity=capacity,
                        temperature=req.temperature,
                        mode=req.mode,
                        rank_keep=req.rank,
                        strict_covariance_normalization=req.strict_covariance_normalization,
                    )
                except (InsufficientStatisticsError, BasisFailureError) as exc:
                    raise _numerical(str(exc))
                cell = metrics.to_dict()
                cell.pop("wall_time", None)  # keep sweep records bit-deterministic
                base = _config_echo(req, {"features_path": req.features_path})
                base["alpha"] = alpha
                base["capacity"] = capacity
                records.append({"schema_version": SCHEMA_VERSION, "config": base, **cell})
        return schemas.SweepResponse(records=records)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        if req.preset == "ref1":
            cfg = REF1
        else:
            try:
                cfg = SynthConfig(
                    seed=req.seed,
                    classes=req.classes,
                    dim=req.dim,
                    samples=req.samples,
                    class_separation=req.class_separation,
                    covariance=req.covariance,
                    axis_ratios=tuple(req.axis_ratios),
                    confusable_pairs=tuple(tuple(p) for p in req.confusable_pairs),
                    text_noise=req.text_noise,
                    text_junk=req.text_junk,
                    noise_scale=req.noise_scale,
                    mean_dim=req.mean_dim,
                )
            except ValueError as exc:
                raise _usage(str(exc))
        try:
            weights, feats, labels = generate(cfg)
        except ValueError as exc:
            raise _usage(str(exc))
        if req.shift is not None and req.shift_magnitude > 0:
            feats = shift_stream(feats, req.shift, req.shift_magnitude, seed=cfg.seed)
        provenance = config_manifest(cfg)
        if req.shift is not None:
            provenance["shift"] = {"kind": req.shift, "magnitude": req.shift_magnitude}
        try:
            streamio.write_stream(req.out_path, weights, feats, labels, provenance=provenance)
        except OSError as exc:
            raise _usage(f"cannot write {req.out_path}: {exc}")
        digest = hashlib.sha256(open(req.out_path, "rb").read()).hexdigest()
        return schemas.SynthResponse(
            path=req.out_path,
            classes=cfg.classes,
            dim=cfg.dim,
            samples=cfg.samples,
            sha256=digest,
        )

    @app.post("/sessions", response_model=schemas.SessionCreateResponse)
    def create_session(req: schemas.SessionCreateRequest):
        if req.features_path:
            weights, _f, _l, _m = _load_stream(req.features_path, strict=False)
        elif req.text_weights:
            try:
                weights = TextWeights(
                    matrix=np.asarray(req.text_weights, dtype=np.float64),
                    class_names=tuple(req.class_names or ()),
                )
            except (InvalidValueError, DimensionMismatchError, ValueError) as exc:
                raise _usage(str(exc))
        else:
            raise _usage("provide features_path or text_weights")
        if req.refresh_interval is None and req.refresh_fraction is not None and req.total_hint is None:
            raise _usage("fraction schedules need total_hint in session mode")
        if req.refresh_interval is not None:
            schedule = RefreshSchedule(mode="interval", interval=req.refresh_interval)
        elif req.refresh_fraction is not None:
            schedule = RefreshSchedule(
                mode="fraction", fraction=req.refresh_fraction, total_hint=req.total_hint
            )
        else:
            schedule = RefreshSchedule(mode="interval", interval=1000)
        fusion = FusionConfig(
            alpha=req.alpha, head=req.head, normalize_prototypes=req.normalize_prototypes
        )
        runner = StreamRunner(
            weights,
            fusion=fusion,
            schedule=schedule,
            capacity=req.capacity,
            temperature=req.temperature,
            mode=req.mode,
            rank_keep=req.rank,
            strict_covariance_normalization=req.strict_covariance_normalization,
        )
        sid = uuid.uuid4().hex
        with app.state.sessions_lock:
            app.state.sessions[sid] = {"runner": runner, "lock": threading.Lock()}
        return schemas.SessionCreateResponse(
            session_id=sid, classes=weights.n_classes, dim=weights.dim
        )

    def _session(sid: str):
        with app.state.sessions_lock:
            entry = app.state.sessions.get(sid)
        if entry is None:
            raise HTTPException(
                status_code=404, detail={"kind": "usage", "message": f"no session {sid}"}
            )
        return entry

    @app.post("/sessions/{sid}/samples", response_model=schemas.SampleResponse)
    def push_sample(sid: str, req: schemas.SampleRequest):
        entry = _session(sid)
        runner: StreamRunner = entry["runner"]
        try:
            feature = ingest_feature(req.feature, strict=req.strict)
        except InvalidValueError as exc:
            raise _input_format(str(exc))
        with entry["lock"]:
            try:
                result = runner.step(feature, req.label)
            except DimensionMismatchError as exc:
                raise _input_format(str(exc))
            except (InsufficientStatisticsError, BasisFailureError) as exc:
                raise _numerical(str(exc))
        return schemas.SampleResponse(
            prediction=result.prediction,
            zeroshot_prediction=result.zeroshot_prediction,
            entropy=result.entropy,
            refreshed=result.refreshed,
            warmup=result.warmup,
        )

    @app.get("/sessions/{sid}/metrics")
    def session_metrics(sid: str):
        entry = _session(sid)
        runner: StreamRunner = entry["runner"]
        with entry["lock"]:
            body = runner.finalize_metrics().to_dict()
        return {"schema_version": SCHEMA_VERSION, **body}

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        with app.state.sessions_lock:
            app.state.sessions.pop(sid, None)
        return {"deleted": sid}

    return app
