"""Command line entry point, `bciarm <group> <command> ...`.

Library errors become a one-line message on stderr and exit status 2.

"""

import argparse
import csv
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import numpy as np

import bciarm.cga as cga
import bciarm.classifier as classifier
import bciarm.config as config
import bciarm.control as control
import bciarm.erp as erp
import bciarm.kinematics as kinematics
import bciarm.signals as signals
import bciarm.stats as stats
import bciarm.vision as vision

logger = logging.getLogger("bciarm")

EXPECTED_ERRORS = (
    cga.CgaError,
    kinematics.IkError,
    kinematics.InvalidGeometry,
    vision.VisionError,
    signals.SignalError,
    classifier.TrainingError,
    classifier.MalformedPairLabels,
    erp.NoP300Peak,
    stats.AnovaError,
    control.ScriptError,
    OSError,
    ValueError,
)


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected X,Y,Z, got {text!r}")
    return (float(parts[0]), float(parts[1]), float(parts[2]))


def _counts(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected LHIM,REST,RHIM counts, got {text!r}")
    return (int(parts[0]), int(parts[1]), int(parts[2]))


def _write_rows(rows: Sequence[Sequence[object]]) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerows(rows)


# cga


def cmd_cga_eval(args) -> None:
    for line in cga.format_blades(cga.evaluate(args.expression)):
        print(line)


# ik


def cmd_ik_solve(args) -> None:
    geom = config.load_geometry(args.config)
    branch = "elbow-up" if args.branch == "up" else "elbow-down"
    solution = kinematics.solve_ik(geom, args.target, branch)
    back = kinematics.forward_kinematics(geom, solution.angles)
    error = float(np.linalg.norm(back - np.array(args.target)))

    a = solution.angles
    rows = [("joint", "degrees", "radians")]
    for name, rad, deg in zip(
        ("theta0", "theta2", "theta3"), (a.theta0, a.theta2, a.theta3), a.degrees()
    ):
        rows.append((name, f"{deg:.6f}", f"{rad:.9f}"))
    _write_rows(rows)
    print(f"round_trip_error_mm,{error:.3e}")


def cmd_ik_check(args) -> None:
    geom = config.load_geometry(args.config)
    result = kinematics.reachable(geom, args.target)
    print(f"{'reachable' if result.ok else 'unreachable'},{result.reason}")


# vision


def cmd_vision_locate(args) -> None:
    colors = config.load_colors(args.colors)
    img = vision.read_ppm(args.image)
    scene = vision.locate_items(img, colors, tuple(args.target_colors))
    rows = [("item", "x_mm", "y_mm")]
    for name, (x, y) in scene.items().items():
        rows.append((name, f"{x:.3f}", f"{y:.3f}"))
    _write_rows(rows)


def cmd_vision_render(args) -> None:
    if args.random:
        rng = np.random.default_rng(args.seed)
        scene, camera = vision.random_scene(rng), vision.random_camera(rng)
    else:
        loaded = config.load_scene(args.scene)
        scene, camera = loaded.scene, loaded.camera
    img = vision.render_scene(scene, camera, args.noise, args.seed)
    vision.write_ppm(img, args.out)
    logger.info("wrote %dx%d image to %s", img.width, img.height, args.out)


# bci


def _labeled_epochs(signals_path: Path, events_path: Path, tmin: float, tmax: float):
    block = signals.read_signals(signals_path)
    events = signals.read_events(events_path)
    return signals.epoch_signals(
        block, [e.onset for e in events], [e.label for e in events], tmin, tmax
    )


def cmd_bci_synth(args) -> None:
    profile = (
        signals.SynthProfile.zero_contrast(counts=args.counts)
        if args.zero_contrast
        else signals.SynthProfile(counts=args.counts)
    )
    block, events = signals.concatenate(signals.synth_eeg(profile, args.seed))
    signals.write_signals(block, args.signals)
    signals.write_events(events, args.events)


def cmd_bci_train(args) -> None:
    epochs = _labeled_epochs(args.signals, args.events, 0.0, classifier.MIN_EPOCH_SECONDS)
    model = classifier.train_classifier(epochs, k=args.top)
    model.save(args.out)
    print(f"features,{model.spec.describe()}")


def cmd_bci_classify(args) -> None:
    model = classifier.ClassifierModel.load(args.model)
    epochs = _labeled_epochs(args.signals, args.events, 0.0, classifier.MIN_EPOCH_SECONDS)
    rows: list[Sequence[object]] = [("index", "label", *("/".join(p) for p in classifier.PAIRS), "classified")]
    for k, epoch in enumerate(epochs):
        result = classifier.classify_epoch(model, epoch)
        rows.append((k, epoch.label or "", *(v.label for v in result.votes), result.label))
    _write_rows(rows)
    if all(e.label is not None for e in epochs):
        report = classifier.evaluate(model, epochs)
        print(f"accuracy,{report.accuracy:.3f}")


def _windows(path: Path, seconds: float) -> signals.EpochSet:
    block = signals.read_signals(path)
    length = int(round(seconds * block.sample_rate))
    starts = range(0, block.n_samples - length + 1, length)
    return signals.EpochSet(
        tuple(signals.Epoch(block.window(s, s + length), None, s) for s in starts)
    )


def cmd_bci_r2map(args) -> None:
    r2 = signals.r2_map(_windows(args.a, args.epoch), _windows(args.b, args.epoch))
    rows: list[Sequence[object]] = [("channel", *(f"{lo:g}-{hi:g}" for lo, hi in r2.bins))]
    for channel, values in zip(r2.channels, r2.values):
        rows.append((channel, *(f"{v:.6f}" for v in values)))
    _write_rows(rows)


# p300


def cmd_p300_analyze(args) -> None:
    epochs = _labeled_epochs(
        args.signals, args.events, -erp.PRE_STIMULUS_S, erp.POST_STIMULUS_S
    )
    rows = [("channel", "amplitude_uv", "latency_ms")]
    for channel in args.channel:
        f = erp.p300_extract(epochs, channel)
        rows.append((channel, f"{f.amplitude:.4f}", f"{f.latency:.1f}"))
    _write_rows(rows)


def cmd_p300_fatigue(args) -> None:
    records = []
    for trial, channel, session, amplitude, latency in _read_table(args.data):
        features = erp.P300Features(float(amplitude), float(latency))
        records.append(erp.P300Record(int(trial), channel, int(session), features))
    analysis = erp.fatigue_analysis(records)
    rows: list[Sequence[object]] = [("channel", "feature", "F", "p")]
    for (channel, feature), result in analysis.tests.items():
        rows.append((channel, feature, f"{result.f:.9g}", f"{result.p:.9g}"))
    rows.append(("selected", analysis.selected, "", ""))
    _write_rows(rows)


# stats


def _read_table(path: Path) -> list[list[str]]:
    with open(path, newline="") as f:
        rows = [row for row in csv.reader(f) if row]
    if rows and not _is_number(rows[0][-1]):
        rows = rows[1:]
    return rows


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def cmd_stats_anova1(args) -> None:
    groups: dict[str, list[float]] = defaultdict(list)
    for group, value in _read_table(args.data):
        groups[group].append(float(value))
    result = stats.anova_oneway(list(groups.values()))
    _write_rows([("F", "p", "df_between", "df_within"),
                 (f"{result.f:.9g}", f"{result.p:.9g}", result.between.df, result.df_within)])


def cmd_stats_anova2(args) -> None:
    cells: dict[tuple[str, str], list[float]] = defaultdict(list)
    for a, b, value in _read_table(args.data):
        cells[(a, b)].append(float(value))
    levels_a = list(dict.fromkeys(a for a, _ in cells))
    levels_b = list(dict.fromkeys(b for _, b in cells))
    if len(cells) != len(levels_a) * len(levels_b):
        raise stats.AnovaError("unbalanced cells: some factor combinations are missing")
    replicates = {len(v) for v in cells.values()}
    if len(replicates) != 1:
        raise stats.AnovaError("unbalanced cells: every cell needs the same number of replicates")
    result = stats.anova_twoway([[cells[(a, b)] for b in levels_b] for a in levels_a])
    rows: list[Sequence[object]] = [("effect", "SS", "df", "MS", "F", "p")]
    for name, e in (("A", result.a), ("B", result.b), ("AxB", result.interaction)):
        rows.append((name, f"{e.ss:.9g}", e.df, f"{e.ms:.9g}", f"{e.f:.9g}", f"{e.p:.9g}"))
    rows.append(("within", f"{result.ss_within:.9g}", result.df_within, f"{result.ms_within:.9g}", "", ""))
    _write_rows(rows)


# sim


def cmd_sim_schedule(args) -> None:
    strategy = "process_control" if args.strategy == "process" else "goal_selection"
    script = control.schedule_stimuli(args.mode, args.counts, args.seed, strategy)
    control.write_script(script, args.out)


def cmd_sim_run(args) -> None:
    script = control.read_script(args.script)
    strategy = "process_control" if args.strategy == "process" else "goal_selection"
    if script.strategy != strategy or script.mode != args.mode:
        raise control.ScriptError(
            f"script is {script.mode} {script.strategy}, not {args.mode} {strategy}"
        )
    geom = config.load_geometry(args.geometry)

    outcomes: control.OutcomeSource = control.ScriptOutcomes()
    if args.signals is not None:
        if args.model is None:
            raise control.ScriptError("--signals needs --model")
        outcomes = control.ModelOutcomes(
            classifier.ClassifierModel.load(args.model), signals.read_signals(args.signals)
        )

    scene = None
    if strategy == "goal_selection":
        if args.scene is None:
            scene = vision.random_scene(np.random.default_rng(args.seed))
        else:
            scene = config.load_scene(args.scene).scene

    result = control.run_session(script, outcomes, geom=geom, scene=scene)
    _write_rows([("metric", "value"), *result.metrics.as_rows()])
    if args.log is not None:
        with open(args.log, "w") as f:
            f.write(result.event_log())
    else:
        sys.stdout.write(result.event_log())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bciarm", description=__doc__.splitlines()[0])
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="repeat for more detail"
    )
    groups = parser.add_subparsers(dest="group", required=True)

    g = groups.add_parser("cga", help="conformal geometric algebra").add_subparsers(
        dest="command", required=True
    )
    p = g.add_parser("eval", help="print the blade coefficients of an expression")
    p.add_argument("expression")
    p.set_defaults(func=cmd_cga_eval)

    g = groups.add_parser("ik", help="inverse kinematics").add_subparsers(
        dest="command", required=True
    )
    for name, func in (("solve", cmd_ik_solve), ("check", cmd_ik_check)):
        p = g.add_parser(name)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--target", type=_triple, required=True, help="X,Y,Z in mm")
        if name == "solve":
            p.add_argument("--branch", choices=("up", "down"), default="up")
        p.set_defaults(func=func)

    g = groups.add_parser("vision", help="tabletop localization").add_subparsers(
        dest="command", required=True
    )
    p = g.add_parser("locate")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--colors", type=Path, default=None)
    p.add_argument("--target-colors", nargs=2, default=("green", "red"))
    p.set_defaults(func=cmd_vision_locate)
    p = g.add_parser("render")
    p.add_argument("--scene", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=tuple(vision.NOISE_SIGMA), default="none")
    p.add_argument("--random", action="store_true", help="random scene and camera")
    p.set_defaults(func=cmd_vision_render)

    g = groups.add_parser("bci", help="motor-imagery classification").add_subparsers(
        dest="command", required=True
    )
    p = g.add_parser("synth", help="write a synthetic labeled recording")
    p.add_argument("--signals", type=Path, required=True)
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--counts", type=_counts, default=(10, 10, 10), help="LHIM,REST,RHIM epochs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-contrast", action="store_true")
    p.set_defaults(func=cmd_bci_synth)
    p = g.add_parser("train")
    p.add_argument("--signals", type=Path, required=True)
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--top", type=int, default=2, help="cells taken from each r2 map")
    p.set_defaults(func=cmd_bci_train)
    p = g.add_parser("classify")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--signals", type=Path, required=True)
    p.add_argument("--events", type=Path, required=True)
    p.set_defaults(func=cmd_bci_classify)
    p = g.add_parser("r2map")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--epoch", type=float, default=2.0, help="epoch length in s")
    p.set_defaults(func=cmd_bci_r2map)

    g = groups.add_parser("p300", help="P300 amplitude and latency").add_subparsers(
        dest="command", required=True
    )
    p = g.add_parser("analyze")
    p.add_argument("--signals", type=Path, required=True)
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--channel", action="append", default=None)
    p.set_defaults(func=cmd_p300_analyze)
    p = g.add_parser("fatigue", help="CSV rows: trial,channel,session,amplitude_uv,latency_ms")
    p.add_argument("data", type=Path)
    p.set_defaults(func=cmd_p300_fatigue)

    g = groups.add_parser("stats", help="analysis of variance").add_subparsers(
        dest="command", required=True
    )
    p = g.add_parser("anova1", help="CSV rows: group,value")
    p.add_argument("data", type=Path)
    p.set_defaults(func=cmd_stats_anova1)
    p = g.add_parser("anova2", help="CSV rows: level_a,level_b,value")
    p.add_argument("data", type=Path)
    p.set_defaults(func=cmd_stats_anova2)

    g = groups.add_parser("sim", help="control sessions").add_subparsers(
        dest="command", required=True
    )
    p = g.add_parser("schedule")
    p.add_argument("--strategy", choices=("process", "goal"), required=True)
    p.add_argument("--mode", choices=("cued", "uncued"), required=True)
    p.add_argument("--counts", type=_counts, default=(10, 10, 10))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sim_schedule)
    p = g.add_parser("run")
    p.add_argument("--strategy", choices=("process", "goal"), required=True)
    p.add_argument("--mode", choices=("cued", "uncued"), required=True)
    p.add_argument("--script", type=Path, required=True)
    p.add_argument("--scene", type=Path, default=None)
    p.add_argument("--signals", type=Path, default=None)
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--geometry", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", type=Path, default=None, help="event log file")
    p.set_defaults(func=cmd_sim_run)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "channel", ()) is None:
        args.channel = list(erp.P300_CHANNELS)

    try:
        args.func(args)
    except EXPECTED_ERRORS as e:
        print(f"bciarm: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
