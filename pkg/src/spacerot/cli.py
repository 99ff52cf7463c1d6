"""Command-line client for the adaptation service.

By default every subcommand talks to an in-process service instance over the
ASGI transport, so no server needs to be running; pass --server URL to target
a remote instance instead (paths are then resolved on the server). Exit
codes: 0 success, 2 usage error, 3 input-format error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import httpx

USAGE_EXIT = 2
FORMAT_EXIT = 3
NUMERICAL_EXIT = 4

_KIND_EXITS = {"usage": USAGE_EXIT, "input-format": FORMAT_EXIT, "numerical": NUMERICAL_EXIT}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # no server given: host the service in-process behind a sync ASGI client
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*httpx2?.*", category=Warning)
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _fail(response: httpx.Response) -> int:
    try:
        detail = response.json().get("detail")
    except Exception:
        detail = response.text
    if isinstance(detail, dict):
        print(f"error: {detail.get('message', detail)}", file=sys.stderr)
        return _KIND_EXITS.get(detail.get("kind"), USAGE_EXIT)
    print(f"error: {detail}", file=sys.stderr)
    return USAGE_EXIT


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _pair_spec(text: str) -> tuple[int, int, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected A:B:STRENGTH")
    return int(parts[0]), int(parts[1]), float(parts[2])


def _add_engine_flags(p: argparse.ArgumentParser, sweep: bool = False):
    if sweep:
        p.add_argument("--alpha", default="15",
                       help="comma-separated fusion weights to sweep")
        p.add_argument("--capacity", default="16",
                       help="comma-separated queue capacities to sweep")
    else:
        p.add_argument("--alpha", type=float, default=15.0, help="fusion weight (default 15)")
        p.add_argument("--capacity", type=int, default=16,
                       help="queue capacity per class (default 16)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--refresh-fraction", type=float, default=None,
                       help="refresh every FRACTION of the stream (default 0.1)")
    group.add_argument("--refresh-interval", type=int, default=None,
                       help="refresh every N samples instead of a fraction")
    p.add_argument("--head", choices=["zeroshot", "ncm", "l1", "l2", "soba", "baseline"],
                   default="soba")
    p.add_argument("--mode", choices=["prototype_only", "symmetric"], default="prototype_only")
    p.add_argument("--rank", type=int, default=None, help="basis columns to keep (default: all)")
    p.add_argument("--temperature", type=float, default=100.0,
                   help="entropy temperature scale (default 100)")
    p.add_argument("--seed", type=int, default=None, help="recorded in metrics; engine is deterministic")
    p.add_argument("--normalize-prototypes", action="store_true")
    p.add_argument("--strict-covariance", action="store_true",
                   help="divide the pooled covariance by all N classes, not just populated ones")
    p.add_argument("--strict-read", action="store_true",
                   help="reject features whose stored norm is outside [0.99, 1.01]")


def _engine_payload(args) -> dict:
    return {
        "head": args.head,
        "mode": args.mode,
        "rank": args.rank,
        "temperature": args.temperature,
        "refresh_fraction": args.refresh_fraction,
        "refresh_interval": args.refresh_interval,
        "seed": args.seed,
        "normalize_prototypes": args.normalize_prototypes,
        "strict_covariance_normalization": args.strict_covariance,
    }


def _cmd_run(args) -> int:
    payload = _engine_payload(args)
    payload.update(
        alpha=args.alpha,
        capacity=args.capacity,
        features_path=args.features,
        strict_read=args.strict_read,
        include_predictions=args.predictions_out is not None,
        dump_queue=args.dump_queue,
        dump_spectrum=args.dump_spectrum,
    )
    with _client(args.server) as client:
        resp = client.post("/runs", json=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    metrics = body["metrics"]
    if args.metrics_out:
        with open(args.metrics_out, "w") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.predictions_out and body.get("predictions"):
        block = body["predictions"]
        with open(args.predictions_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_index", "true_label", "zeroshot_pred", "fused_pred", "entropy"])
            for row in zip(block["sample_index"], block["true_label"],
                           block["zeroshot_pred"], block["fused_pred"], block["entropy"]):
                writer.writerow(row)
    acc = metrics["accuracy"]
    print(
        f"samples={metrics['samples_seen']} refreshes={metrics['refresh_count']} "
        f"zeroshot={_fmt(acc['zeroshot'])} fused={_fmt(acc['fused'])} head={metrics['head']}"
    )
    return 0


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _cmd_synth(args) -> int:
    payload = {
        "out_path": args.out,
        "preset": args.preset,
        "seed": args.seed,
        "classes": args.classes,
        "dim": args.dim,
        "samples": args.samples,
        "class_separation": args.class_separation,
        "covariance": args.covariance,
        "axis_ratios": _csv_floats(args.axis_ratios),
        "confusable_pairs": [list(p) for p in (args.confusable or [])],
        "text_noise": args.text_noise,
        "text_junk": args.text_junk,
        "noise_scale": args.noise_scale,
        "mean_dim": args.mean_dim,
        "shift": args.shift,
        "shift_magnitude": args.shift_magnitude,
    }
    if not args.confusable and args.preset is None:
        payload["confusable_pairs"] = [[0, 1, 0.85], [2, 3, 0.85]]
    with _client(args.server) as client:
        resp = client.post("/synth", json=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    print(f"wrote {body['path']}: {body['samples']} samples, N={body['classes']}, d={body['dim']}, "
          f"sha256={body['sha256'][:16]}...")
    return 0


def _cmd_sweep(args) -> int:
    payload = _engine_payload(args)
    payload.update(
        features_path=args.features,
        alphas=_csv_floats(args.alpha),
        capacities=_csv_ints(args.capacity),
        strict_read=args.strict_read,
    )
    with _client(args.server) as client:
        resp = client.post("/sweeps", json=payload)
    if resp.status_code != 200:
        return _fail(resp)
    records = resp.json()["records"]
    text = json.dumps(records, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"{len(records)} sweep records", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacerot",
        description="Streaming test-time adaptation over precomputed embedding files.",
    )
    parser.add_argument("--server", default=None,
                        help="URL of a running service; default runs the service in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="process a feature stream file")
    runp.add_argument("--features", required=True, help="path to a feature stream file")
    _add_engine_flags(runp)
    runp.add_argument("--metrics-out", default=None, help="write metrics JSON here")
    runp.add_argument("--predictions-out", default=None, help="write per-sample CSV here")
    runp.add_argument("--dump-queue", action="store_true", help="embed a queue snapshot in metrics")
    runp.add_argument("--dump-spectrum", action="store_true",
                      help="embed the final singular-value spectrum in metrics")
    runp.set_defaults(func=_cmd_run)

    synthp = sub.add_parser("synth", help="generate a synthetic stream file")
    synthp.add_argument("--out", required=True)
    synthp.add_argument("--preset", choices=["ref1"], default=None,
                        help="use the fixed reference configuration")
    synthp.add_argument("--seed", type=int, default=42)
    synthp.add_argument("--classes", type=int, default=20)
    synthp.add_argument("--dim", type=int, default=64)
    synthp.add_argument("--samples", type=int, default=5000)
    synthp.add_argument("--class-separation", type=float, default=1.0)
    synthp.add_argument("--covariance", choices=["isotropic", "anisotropic"], default="anisotropic")
    synthp.add_argument("--axis-ratios", default="10,10", help="variance boosts, comma separated")
    synthp.add_argument("--confusable", type=_pair_spec, action="append",
                        help="A:B:STRENGTH confusable pair; repeatable")
    synthp.add_argument("--text-noise", type=float, default=0.15)
    synthp.add_argument("--text-junk", type=float, default=0.7)
    synthp.add_argument("--noise-scale", type=float, default=0.08)
    synthp.add_argument("--mean-dim", type=int, default=8)
    synthp.add_argument("--shift", choices=["style_rotation", "sketch_sparsify"], default=None)
    synthp.add_argument("--shift-magnitude", type=float, default=0.0)
    synthp.set_defaults(func=_cmd_synth)

    sweepp = sub.add_parser("sweep", help="grid of runs over alpha and capacity")
    sweepp.add_argument("--features", required=True)
    _add_engine_flags(sweepp, sweep=True)
    sweepp.add_argument("--out", default=None, help="write sweep records JSON here (default stdout)")
    sweepp.set_defaults(func=_cmd_sweep)

    servep = sub.add_parser("serve", help="start the HTTP service")
    servep.add_argument("--host", default="127.0.0.1")
    servep.add_argument("--port", type=int, default=8000)
    servep.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service ({exc})", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
