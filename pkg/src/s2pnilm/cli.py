"""Command-line entry point: ``s2p {synth,train,predict,eval,compare,inspect}``.

A data directory holds ``mains.csv`` and one ``<appliance>.csv`` per
appliance, in the ``epoch_seconds,watts`` line format. ``synth`` writes a
``train/`` and a ``test/`` directory plus ``profiles.json``; other commands
pick the matching split automatically when given such a root.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import plotting
from .checkpoint import load_checkpoint, save_checkpoint
from .data import AlignedPair, align_resample, load_channel, load_profiles, save_profiles
from .errors import S2PError, UndefinedMetricError
from .experiments import compare_schemes, fit_model, synthetic_split
from .inference import evaluate, model_profile, predict, write_report, write_trace
from .introspect import perturbation_experiment, write_perturbation_report
from .nn import LayerSpec, small_trunk
from .synth import Scene, write_scene

log = logging.getLogger("s2pnilm")

DEFAULTS = {
    "appliance": "kettle",
    "scheme": "point",
    "epochs": 10,
    "batch": 64,
    "seed": 0,
    "stride": 1,
    "patience": 5,
    "learning_rate": 1e-3,
    "windows": 100,
    "seeds": 1,
}


class UsageError(S2PError):
    pass


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    spec = {
        "data": dict(type=Path, help="data directory (mains.csv + <appliance>.csv, or a synth root)"),
        "profiles": dict(type=Path, help="appliance profile JSON (default: <data>/profiles.json or built-in)"),
        "appliance": dict(help="appliance name (default kettle)"),
        "scheme": dict(choices=["point", "seq"], help="learning scheme (default point)"),
        "epochs": dict(type=int, help="training epochs (default 10)"),
        "batch": dict(type=int, help="minibatch size (default 64)"),
        "seed": dict(type=int, help="random seed (default 0)"),
        "stride": dict(type=int, help="keep every stride-th training window (default 1)"),
        "out": dict(type=Path, help="output directory"),
        "checkpoint": dict(type=Path, help="checkpoint file"),
        "layer": dict(type=int, help="conv layer index for feature maps (default: last conv)"),
        "config": dict(type=Path, help="JSON file with network/training settings; flags override it"),
    }
    for name in names:
        p.add_argument(f"--{name}", **spec[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="s2p", description="Sequence-to-point energy disaggregation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="write a synthetic scene as channel files")
    _add_common(p, "seed", "out")
    p.add_argument("--days", type=float, default=7.0, help="training days (default 7)")
    p.add_argument("--test-days", type=float, default=1.0, help="held-out days (default 1)")
    p.add_argument("--window", type=int, default=99, help="window length written to profiles.json (default 99)")
    p.add_argument("--interval", type=float, default=6.0, help="sampling interval in seconds (default 6)")

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_common(p, "data", "profiles", "appliance", "scheme", "epochs", "batch", "seed", "stride", "out",
                "checkpoint", "config")
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs (default 5)")

    p = sub.add_parser("predict", help="write the disaggregated trace for a mains channel")
    _add_common(p, "data", "checkpoint", "out")

    p = sub.add_parser("eval", help="score a model against ground truth (MAE, SAE)")
    _add_common(p, "data", "checkpoint", "out")

    p = sub.add_parser("compare", help="train point and seq heads from one trunk and compare midpoint error")
    _add_common(p, "data", "profiles", "appliance", "epochs", "batch", "seed", "stride", "out", "config")
    p.add_argument("--seeds", type=int, help="number of consecutive seeds to run (default 1)")

    p = sub.add_parser("inspect", help="run the perturbation study and export feature maps")
    _add_common(p, "data", "checkpoint", "layer", "seed", "out")
    p.add_argument("--windows", type=int, help="activation windows to perturb (default 100)")
    p.add_argument("--figures", type=int, default=6, help="windows to render as figures (default 6)")
    return parser


def _settings(args, keys, defaults=None) -> dict:
    """Defaults, then the --config file, then explicit flags."""
    resolved = {k: DEFAULTS[k] for k in keys if k in DEFAULTS}
    resolved.update(defaults or {})
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise UsageError(f"{config_path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{config_path}: invalid JSON ({exc})") from None
        resolved.update({k: v for k, v in doc.items() if k in keys or k == "trunk"})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            resolved[k] = v
    return resolved


def _trunk(settings):
    spec = settings.get("trunk")
    return small_trunk() if spec is None else tuple(LayerSpec(**s) for s in spec)


def _data_dir(path: Path | None, split: str) -> Path:
    if path is None:
        raise UsageError("--data is required")
    if not path.exists():
        raise S2PError(f"data path {path} does not exist")
    if (path / split / "mains.csv").exists():
        return path / split
    return path


def _profiles(args, data: Path):
    if getattr(args, "profiles", None) is not None:
        return load_profiles(args.profiles)
    for candidate in (data / "profiles.json", data.parent / "profiles.json"):
        if candidate.exists():
            return load_profiles(candidate)
    return load_profiles()


def _load_pair(directory: Path, appliance: str) -> AlignedPair:
    mains_path = directory / "mains.csv"
    app_path = directory / f"{appliance}.csv"
    for p in (mains_path, app_path):
        if not p.exists():
            raise S2PError(f"missing channel file {p}")
    return align_resample(load_channel(mains_path), load_channel(app_path))


def _out(args) -> Path:
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, settings: dict) -> None:
    doc = {"command": command, **{k: str(v) if isinstance(v, Path) else v for k, v in settings.items()}}
    (out / f"manifest_{command}.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def cmd_synth(args) -> None:
    out = args.out
    if out is None:
        raise UsageError("--out is required")
    seed = 0 if args.seed is None else args.seed
    train_scene, test_scene = synthetic_split(seed, args.days, args.test_days, args.interval)
    write_scene(train_scene, out / "train")
    write_scene(test_scene, out / "test")
    profiles = {name: p.with_window(args.window) for name, p in load_profiles().items()
                if name in train_scene.truths}
    save_profiles(profiles, out / "profiles.json")
    _manifest(out, "synth", {"seed": seed, "days": args.days, "test_days": args.test_days,
                             "window": args.window, "interval": args.interval})
    print(f"wrote synthetic scene to {out}")


def cmd_train(args) -> None:
    s = _settings(args, ["appliance", "scheme", "epochs", "batch", "seed", "stride", "patience", "learning_rate"])
    data = _data_dir(args.data, "train")
    profiles = _profiles(args, data)
    if s["appliance"] not in profiles:
        raise S2PError(f"no profile for appliance {s['appliance']!r}")
    profile = profiles[s["appliance"]]
    pair = _load_pair(data, s["appliance"])
    out = _out(args)
    model, report = fit_model(pair, profile, s["scheme"], _trunk(s), s["seed"], s["epochs"], s["batch"],
                              s["stride"], s["patience"], s["learning_rate"])
    log.info("trained in %.1f s", report.wall_time)
    ckpt = args.checkpoint or out / "model.ckpt"
    save_checkpoint(model, ckpt)
    report_doc = {k: v for k, v in report.to_dict().items() if k != "wall_time"}
    (out / "train_report.json").write_text(json.dumps(report_doc, indent=2) + "\n")
    plotting.plot_training(report, out / "train_loss.png", f"{profile.name} ({s['scheme']})")
    _manifest(out, "train", {**s, "data": data, "checkpoint": ckpt, "trunk": [l.to_dict() for l in _trunk(s)]})
    print(f"best epoch {report.best_epoch}, validation loss {report.val_loss[report.best_epoch]:.6g}; "
          f"checkpoint {ckpt}")


def _need_checkpoint(args):
    if args.checkpoint is None:
        raise UsageError("--checkpoint is required")
    return load_checkpoint(args.checkpoint)


def cmd_predict(args) -> None:
    model = _need_checkpoint(args)
    data = _data_dir(args.data, "test")
    mains_path = data / "mains.csv"
    if not mains_path.exists():
        raise S2PError(f"missing channel file {mains_path}")
    mains = load_channel(mains_path)
    profile = model_profile(model)
    if mains.has_gaps:
        mains = align_resample(mains, mains).mains
    prediction = predict(model, mains)
    out = _out(args)
    trace = out / f"prediction_{profile.name}.csv"
    write_trace(prediction, trace)
    truth_path = data / f"{profile.name}.csv"
    truth = load_channel(truth_path) if truth_path.exists() else None
    if truth is not None and not truth.same_grid(mains):
        truth = None
    plotting.plot_disaggregation(mains, truth, prediction.series, out / f"prediction_{profile.name}.png",
                                 f"{profile.name} ({model.config.head})")
    _manifest(out, "predict", {"data": data, "checkpoint": args.checkpoint})
    print(f"wrote {trace}")


def cmd_eval(args) -> None:
    model = _need_checkpoint(args)
    profile = model_profile(model)
    data = _data_dir(args.data, "test")
    pair = _load_pair(data, profile.name)
    out = _out(args)
    try:
        report = evaluate(model, pair)
    except UndefinedMetricError as exc:
        if exc.report is not None:
            write_report(exc.report, out / "eval_report.json")
        raise
    write_report(report, out / "eval_report.json")
    prediction = predict(model, pair.mains)
    write_trace(prediction, out / f"prediction_{profile.name}.csv")
    plotting.plot_disaggregation(pair.mains, pair.appliance, prediction.series, out / f"eval_{profile.name}.png",
                                 f"{profile.name}: MAE {report.mae:.2f} W, SAE {report.sae:.3f}")
    _manifest(out, "eval", {"data": data, "checkpoint": args.checkpoint})
    daily = report.mean_daily_sae
    print(f"{profile.name}: MAE {report.mae:.3f} W  SAE {report.sae:.4f}  "
          f"mean daily SAE {'n/a' if daily is None else f'{daily:.4f}'}")


def cmd_compare(args) -> None:
    s = _settings(args, ["appliance", "epochs", "batch", "seed", "stride", "seeds", "patience"],
                  {"epochs": 5, "stride": 5})
    root = args.data
    train_dir, test_dir = _data_dir(root, "train"), _data_dir(root, "test")
    profiles = _profiles(args, train_dir)
    if s["appliance"] not in profiles:
        raise S2PError(f"no profile for appliance {s['appliance']!r}")
    profile = profiles[s["appliance"]]
    train_pair = _load_pair(train_dir, s["appliance"])
    test_pair = _load_pair(test_dir, s["appliance"])
    out = _out(args)
    rows = []
    for seed in range(s["seed"], s["seed"] + s["seeds"]):
        result = compare_schemes(train_pair, test_pair, profile, _trunk(s), seed, s["epochs"], s["batch"],
                                 s["stride"], s["patience"])
        rows.append(result.row())
        print(f"seed {seed}: seq2point {result.point_mse:.6g}  seq2seq midpoint {result.seq_mse:.6g}  "
              f"{'point<=seq' if result.point_wins else 'point>seq'}")
    with (out / "compare.csv").open("w") as fh:
        fh.write("seed,point_mse,seq_mse,point_wins,trunk_checksum\n")
        for r in rows:
            fh.write(f"{r['seed']},{r['point_mse']:.17g},{r['seq_mse']:.17g},{int(r['point_wins'])},"
                     f"{r['trunk_checksum']}\n")
    wins = sum(r["point_wins"] for r in rows)
    (out / "compare.json").write_text(json.dumps({"appliance": profile.name, "runs": rows, "point_wins": wins},
                                                 indent=2) + "\n")
    plotting.plot_comparison(rows, out / "compare.png", f"{profile.name}: held-out midpoint error")
    _manifest(out, "compare", {**s, "data": root})
    print(f"seq2point at least as good in {wins} of {len(rows)} seeds")


def cmd_inspect(args) -> None:
    model = _need_checkpoint(args)
    profile = model_profile(model)
    data = _data_dir(args.data, "test")
    pair = _load_pair(data, profile.name)
    scene = Scene(pair.mains, {profile.name: pair.appliance}, pair.mains.with_values(pair.mains.values * 0))
    n = DEFAULTS["windows"] if args.windows is None else args.windows
    seed = DEFAULTS["seed"] if args.seed is None else args.seed
    report = perturbation_experiment(model, scene, profile.name, n, seed, layer=args.layer)
    out = _out(args)
    write_perturbation_report(report, out)
    for i, cases in enumerate(report.windows[: args.figures]):
        plotting.plot_feature_cases(cases, out / f"feature_maps_w{i:03d}.png", f"{profile.name}, window {i}")
    _manifest(out, "inspect", {"data": data, "checkpoint": args.checkpoint, "windows": n, "seed": seed,
                               "layer": args.layer})
    frac = report.fraction_below_threshold("remove")
    print(f"{len(report.windows)} windows; removal drops the prediction below "
          f"{profile.on_threshold:g} W in {frac:.0%} of them")


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "inspect": cmd_inspect,
}


def _thread_limit() -> int | None:
    raw = os.environ.get("S2P_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"S2P_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("S2P_THREADS must be >= 1")
    return n


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=_thread_limit()):
            COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"s2p {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (S2PError, OSError) as exc:
        print(f"s2p {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
