import csv
import io
from dataclasses import replace

import numpy as np
import pytest

import bciarm.control as control
import bciarm.erp as erp
import bciarm.signals as signals
from bciarm.cli import main


def rows(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))


def test_cga_eval(capsys):
    assert main(["cga", "eval", "e1 * e2"]) == 0
    assert capsys.readouterr().out == "e12 1.0\n"


def test_bad_expression(capsys):
    assert main(["cga", "eval", "e1 +"]) == 2
    assert capsys.readouterr().err.startswith("bciarm: error: ")


def test_ik_solve(capsys):
    assert main(["ik", "solve", "--target", "0,300,-49"]) == 0
    out = rows(capsys.readouterr().out)
    assert out[0] == ["joint", "degrees", "radians"]
    assert [r[0] for r in out[1:4]] == ["theta0", "theta2", "theta3"]
    assert out[4][0] == "round_trip_error_mm"
    assert float(out[4][1]) < 1e-6


def test_ik_unreachable(capsys):
    assert main(["ik", "check", "--target", "0,10000,0"]) == 0
    assert capsys.readouterr().out == "unreachable,target outside wrist workspace\n"

    assert main(["ik", "solve", "--target", "0,10000,0"]) == 2
    assert "outside wrist workspace" in capsys.readouterr().err


def test_ik_check_with_config(tmp_path, capsys):
    path = tmp_path / "geometry.toml"
    path.write_text("L3 = 400.0\n")
    assert main(["ik", "check", "--config", str(path), "--target", "0,500,0"]) == 0
    assert capsys.readouterr().out == "reachable,reachable\n"


def test_render_then_locate(tmp_path, capsys):
    image = tmp_path / "scene.ppm"
    assert main(["vision", "render", "--out", str(image), "--noise", "low"]) == 0
    assert main(["vision", "locate", "--image", str(image)]) == 0
    out = {r[0]: (float(r[1]), float(r[2])) for r in rows(capsys.readouterr().out)[1:]}
    assert set(out) == {"disk", "target_left", "target_right"}
    assert np.linalg.norm(np.array(out["disk"]) - (50.0, 200.0)) < 5.0
    assert np.linalg.norm(np.array(out["target_right"]) - (100.0, 250.0)) < 5.0


def test_locate_blank_image(tmp_path, capsys):
    image = tmp_path / "blank.ppm"
    image.write_bytes(b"P6\n4 4\n255\n" + bytes(48))
    assert main(["vision", "locate", "--image", str(image)]) == 2
    assert "cyan" in capsys.readouterr().err


def test_train_and_classify(tmp_path, capsys):
    train_signals, train_events = tmp_path / "train.csv", tmp_path / "train-events.csv"
    test_signals, test_events = tmp_path / "test.csv", tmp_path / "test-events.csv"
    model = tmp_path / "model.txt"
    assert (
        main(
            [
                "bci",
                "synth",
                "--signals",
                str(train_signals),
                "--events",
                str(train_events),
                "--counts",
                "6,6,6",
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "bci",
                "synth",
                "--signals",
                str(test_signals),
                "--events",
                str(test_events),
                "--seed",
                "1",
                "--counts",
                "6,6,6",
            ]
        )
        == 0
    )

    assert (
        main(
            [
                "bci",
                "train",
                "--signals",
                str(train_signals),
                "--events",
                str(train_events),
                "--out",
                str(model),
            ]
        )
        == 0
    )
    assert capsys.readouterr().out.startswith("features,")
    assert model.read_text().startswith("# bciarm classifier v1\n")

    assert (
        main(
            [
                "bci",
                "classify",
                "--model",
                str(model),
                "--signals",
                str(test_signals),
                "--events",
                str(test_events),
            ]
        )
        == 0
    )
    out = rows(capsys.readouterr().out)
    assert out[0] == ["index", "label", "LHIM/RHIM", "LHIM/REST", "RHIM/REST", "classified"]
    assert len(out) == 20
    assert out[-1][0] == "accuracy"
    assert float(out[-1][1]) >= 90.0


def test_r2map(tmp_path, capsys):
    rng = np.random.default_rng(0)
    for name in ("a", "b"):
        block = signals.SignalBlock(rng.normal(size=(len(signals.MONTAGE), 4000)))
        signals.write_signals(block, tmp_path / f"{name}.csv")
    assert main(["bci", "r2map", "--a", str(tmp_path / "a.csv"), "--b", str(tmp_path / "b.csv")]) == 0
    out = rows(capsys.readouterr().out)
    assert out[0][:3] == ["channel", "1-3", "3-5"]
    assert len(out) == 1 + len(signals.MONTAGE)
    assert all(0.0 <= float(v) <= 1.0 for r in out[1:] for v in r[1:])


def test_p300_analyze(tmp_path, capsys):
    block, events = signals.concatenate(erp.synth_p300(seed=0))
    events = [signals.Event(e.onset + erp.PRE_STIMULUS_S) for e in events]
    signals.write_signals(block, tmp_path / "p300.csv")
    signals.write_events(events, tmp_path / "p300-events.csv")
    argv = [
        "p300",
        "analyze",
        "--signals",
        str(tmp_path / "p300.csv"),
        "--events",
        str(tmp_path / "p300-events.csv"),
    ]
    assert main(argv) == 0
    out = rows(capsys.readouterr().out)
    assert [r[0] for r in out[1:]] == list(erp.P300_CHANNELS)

    assert main(argv + ["--channel", "Pz"]) == 0
    [_, pz] = rows(capsys.readouterr().out)
    assert pz[0] == "Pz"
    assert float(pz[2]) == pytest.approx(350.0, abs=10.0)


def test_anova1(tmp_path, capsys):
    path = tmp_path / "groups.csv"
    path.write_text("group,value\na,1\na,2\na,3\nb,2\nb,3\nb,4\n")
    assert main(["stats", "anova1", str(path)]) == 0
    out = rows(capsys.readouterr().out)
    assert out[1][0] == "1.5"
    assert out[1][2:] == ["1", "4"]


def test_anova2(tmp_path, capsys):
    path = tmp_path / "cells.csv"
    path.write_text(
        "a1,b1,2.25\na1,b1,4.25\na1,b2,2.25\na1,b2,4.25\n"
        "a2,b1,5.25\na2,b1,7.25\na2,b2,5.25\na2,b2,9.25\n"
    )
    assert main(["stats", "anova2", str(path)]) == 0
    out = {r[0]: r for r in rows(capsys.readouterr().out)[1:]}
    assert float(out["A"][4]) == pytest.approx(7.0)
    assert float(out["within"][1]) == pytest.approx(14.0)

    path.write_text("a1,b1,1\na1,b1,2\na1,b2,3\na2,b1,4\na2,b1,5\na2,b2,6\na2,b2,7\na1,b2,8\na1,b2,9\n")
    assert main(["stats", "anova2", str(path)]) == 2
    assert "unbalanced" in capsys.readouterr().err


def test_schedule_and_run(tmp_path, capsys):
    script_path = tmp_path / "session.csv"
    argv = ["sim", "schedule", "--strategy", "process", "--mode", "uncued", "--out", str(script_path)]
    assert main(argv) == 0
    script = control.read_script(script_path)
    assert len(script) == 30

    run = ["sim", "run", "--strategy", "process", "--mode", "uncued", "--script", str(script_path)]
    assert main(run) == 2
    assert "no classified label" in capsys.readouterr().err

    classified = control.SessionScript(
        tuple(replace(s, classified=s.intended) for s in script.stimuli), "uncued", "process_control"
    )
    control.write_script(classified, script_path)
    log = tmp_path / "events.csv"
    assert main(run + ["--log", str(log)]) == 0
    out = rows(capsys.readouterr().out)
    assert out[0] == ["metric", "value"]
    assert dict(out[1:])["n_stimuli"] == "30"
    assert len(log.read_text().splitlines()) == 31

    assert main(["sim", "run", "--strategy", "goal", "--mode", "uncued", "--script", str(script_path)]) == 2


def test_goal_selection_run(tmp_path, capsys):
    script_path = tmp_path / "session.csv"
    script = control.schedule_stimuli("cued", (5, 5, 5), seed=0, strategy="goal_selection")
    script = control.SessionScript(
        tuple(replace(s, classified=s.label) for s in script.stimuli), "cued", "goal_selection"
    )
    control.write_script(script, script_path)
    argv = ["sim", "run", "--strategy", "goal", "--mode", "cued", "--script", str(script_path)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "percent_correct,100.000" in out.splitlines()
    assert out.count("dispatched") == 10


def test_p300_fatigue(tmp_path, capsys):
    path = tmp_path / "p300.csv"
    lines = ["trial,channel,session,amplitude_uv,latency_ms"]
    for t in range(3):
        for s in range(3):
            lines.append(f"{t},O1,{s},{5 + s},{300 + 10 * s}")
            lines.append(f"{t},Pz,{s},{5 + s},{300 + 50 * t + s}")
    path.write_text("\n".join(lines) + "\n")
    assert main(["p300", "fatigue", str(path)]) == 0
    out = rows(capsys.readouterr().out)
    assert out[0] == ["channel", "feature", "F", "p"]
    assert len(out) == 6
    assert out[-1][:2] == ["selected", "Pz"]


def test_unreachable_target_still_scores(tmp_path, capsys):
    scene = tmp_path / "scene.toml"
    scene.write_text(
        "disk = [50.0, 200.0]\ntarget_left = [-100.0, 250.0]\ntarget_right = [200.0, 400.0]\n"
    )
    script = control.schedule_stimuli("cued", (2, 2, 2), seed=0, strategy="goal_selection")
    script = control.SessionScript(
        tuple(replace(s, classified=s.label) for s in script.stimuli), "cued", "goal_selection"
    )
    script_path = tmp_path / "session.csv"
    control.write_script(script, script_path)
    argv = ["sim", "run", "--strategy", "goal", "--mode", "cued", "--script", str(script_path)]
    assert main(argv + ["--scene", str(scene)]) == 0
    out = capsys.readouterr().out
    assert "percent_correct,100.000" in out.splitlines()
    assert out.count("dispatched") == 2
    assert out.count("rejected") == 2
