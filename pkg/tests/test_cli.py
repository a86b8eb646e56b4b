import json

import pytest

from boomtrack.cli import main
from boomtrack.displacement import DisplacementSample, save_displacements
from boomtrack.validate import parse_report_footer

STEP_CFG = """\
width = 320
height = 240
frame_rate = 5
duration = 3
color = gray
command = 0, 0, 0
command = 1, 0, 0
command = 2, 3.823, 0
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    cfg = out / "step.cfg"
    cfg.write_text(STEP_CFG)
    assert main(["simulate", "--config", str(cfg), "--out", str(out / "run")]) == 0
    return out / "run"


def _samples(path, rows, source="vision"):
    save_displacements([DisplacementSample(t, 0.0, dy, source) for t, dy in rows], path)


def test_dict_command(tmp_path):
    out = tmp_path / "d.txt"
    assert main(["dict", "--grid", "6", "--count", "10", "--out", str(out)]) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 10


def test_simulate_outputs(sim_dir):
    for name in ("truth.csv", "sensor.csv", "dict.txt", "detections_truth.jsonl", "scenario.cfg"):
        assert (sim_dir / name).exists()
    assert len(list((sim_dir / "frames").glob("*.pgm"))) == 15


def test_full_chain(sim_dir, tmp_path, capsys):
    dets, disp, sens = tmp_path / "dets.jsonl", tmp_path / "disp.csv", tmp_path / "sens.csv"
    rep, fig = tmp_path / "report.csv", tmp_path / "report.png"
    assert main(["detect", "--dict", str(sim_dir / "dict.txt"), "--images", str(sim_dir / "frames"), "--out", str(dets)]) == 0
    assert len(dets.read_text().splitlines()) == 15
    assert main(["quantify", "--dets", str(dets), "--out", str(disp), "--plot", str(tmp_path / "disp.png")]) == 0
    assert main(["incline", "--readings", str(sim_dir / "sensor.csv"), "--radius", "3.0", "--out", str(sens)]) == 0
    capsys.readouterr()
    code = main(["validate", "--vision", str(disp), "--sensor", str(sens), "--frames", str(sim_dir / "frames"),
                 "--out", str(rep), "--plot", str(fig)])
    foot = parse_report_footer(capsys.readouterr().out)
    assert code == 0 and foot["pass"] == "true" and foot["gap_count"] == "0"
    assert fig.stat().st_size > 0 and (tmp_path / "disp.png").exists()


def test_validate_identical_streams(tmp_path):
    p = tmp_path / "a.csv"
    _samples(p, [(0.0, 0.0), (0.1, 0.2), (0.2, 0.4)])
    assert main(["validate", "--vision", str(p), "--sensor", str(p)]) == 0


def test_validate_discrepancy_exits_1(tmp_path):
    v, s = tmp_path / "v.csv", tmp_path / "s.csv"
    _samples(v, [(0.0, 0.0), (0.1, 0.05)])
    _samples(s, [(0.0, 0.0), (0.1, 0.0)], "inclinometer")
    assert main(["validate", "--vision", str(v), "--sensor", str(s), "--tolerance", "0.026"]) == 1


def test_missing_input_exits_2(tmp_path):
    out = tmp_path / "out.csv"
    assert main(["quantify", "--dets", str(tmp_path / "nope.jsonl"), "--out", str(out)]) == 2
    assert not out.exists()


def test_bad_flags_exit_2():
    assert main(["quantify"]) == 2
    assert main(["quantify", "--dets", "x", "--min-conf", "1.5"]) == 2
    assert main(["nonsense"]) == 2


def test_malformed_detections_leave_no_output(tmp_path):
    dets = tmp_path / "d.jsonl"
    dets.write_text('{"t": 0, "cx": 1, "cy": 1, "w": 1, "h": 1}\n{"t": 0\n')
    out = tmp_path / "disp.csv"
    assert main(["quantify", "--dets", str(dets), "--out", str(out)]) == 2
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [dets]


def test_paper_compat_flag(tmp_path):
    r = tmp_path / "r.csv"
    r.write_text("t_s,angle_deg\n0,0\n0.1,1\n")
    out = tmp_path / "o.csv"
    assert main(["incline", "--readings", str(r), "--paper-compat", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[2].split(",")[2] == "0.318821"


def test_eval_command(tmp_path, capsys):
    gt, dets, out = tmp_path / "gt.jsonl", tmp_path / "d.jsonl", tmp_path / "m.csv"
    gt.write_text(json.dumps({"image": "a", "cx": 5, "cy": 5, "w": 10, "h": 10}) + "\n")
    dets.write_text(json.dumps({"image": "a", "cx": 7.5, "cy": 5, "w": 10, "h": 10, "conf": 0.9}) + "\n")
    assert main(["eval", "--dets", str(dets), "--gt", str(gt), "--out", str(out), "--plot", str(tmp_path / "pr.png")]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "iou_threshold,ap,precision,recall,tp,fp,fn"
    assert rows[1].startswith("0.50,1.000000") and rows[2].startswith("0.90,0.000000")
    assert "mAP@50=1.000000" in capsys.readouterr().out


def test_idempotent_detect(sim_dir, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["detect", "--dict", str(sim_dir / "dict.txt"), "--images", str(sim_dir / "frames"), "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
