import glob
import json
import os
from fractions import Fraction as F

import pytest

from pinball.cli import main
from pinball.components import BallState, MotionPhase, MovingWall, Schedule, Wall
from pinball.errors import InvalidScene, ParseError
from pinball.numeric import Vec2
from pinball.pda import PdaConfig, decode_offset, decode_spread, shipped_program
from pinball.render import render_svg
from pinball.sceneio import SceneFile, load_scene_text, parse_scene, read_scene_file, serialize_scene

from conftest import FIXTURES

ALL = sorted(glob.glob(os.path.join(FIXTURES, "*.json")))


def V(x, y):
    return Vec2(F(x), F(y))


@pytest.mark.parametrize("path", ALL, ids=os.path.basename)
def test_fixture_roundtrip(path):
    text = open(path).read()
    sf = load_scene_text(text)
    again = load_scene_text(serialize_scene(sf))
    assert again == sf
    assert serialize_scene(again) == serialize_scene(sf)


def _minimal(**over):
    d = {
        "format": "pinball-scene/1",
        "components": [{"type": "wall", "id": "w", "a": ["-1", "0"], "b": ["1", "0"]}],
        "ball": {"pos": ["0", "2"], "vel": ["0", "-1"], "time": "0"},
        "target": ["0", "3/4"],
    }
    d.update(over)
    return json.dumps(d)


def test_minimal_scene_and_exact_scalars():
    sc = parse_scene(_minimal())
    assert len(sc.components) == 1
    sf = load_scene_text(_minimal())
    assert sf.target.y == F(3, 4) and isinstance(sf.target.y, F)
    assert load_scene_text(_minimal(target=["0", "0.75"])).target.y == F(3, 4)


def test_unknown_fields_rejected():
    with pytest.raises(InvalidScene):
        load_scene_text(_minimal(colour="red"))
    bad = json.loads(_minimal())
    bad["components"][0]["thickness"] = "1"
    with pytest.raises(InvalidScene, match="^w: "):
        load_scene_text(json.dumps(bad))


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as e:
        load_scene_text('{\n  "format": ,\n}')
    assert (e.value.line, e.value.column) == (2, 13)


def test_speed_cap_violation_names_component():
    phases = (MotionPhase.glide(F(1), F(0), F(1, 2)), MotionPhase.glide(F(1), F(1, 2), F(0)))
    mw = MovingWall(V(0, 0), V(1, 0), V(0, 1), Schedule(F(0), phases, F(4)), "fast")
    sf = SceneFile([mw], None, None, "bigfloat", 128, F(1, 4), F(1))
    text = serialize_scene(sf)
    with pytest.raises(InvalidScene, match="fast"):
        parse_scene(text)


def _fx(name):
    return os.path.join(FIXTURES, f"{name}.json")


@pytest.mark.parametrize("name,code", [("hit", 0), ("pingpong", 2), ("escape", 3), ("space_half", 0), ("moving_wall", 0)])
def test_simulate_exit_codes(name, code, capsys):
    assert main(["simulate", _fx(name), "--max-events", "10", "--max-time", "100"]) == code
    if name == "hit":
        assert capsys.readouterr().out.strip() == "Hit t=1"


def test_simulate_requires_bounds():
    with pytest.raises(SystemExit):
        main(["simulate", _fx("hit"), "--max-events", "10"])


def test_malformed_file_exits_one(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"format": "pinball-scene/1", "components": [')
    assert main(["simulate", str(p), "--max-events", "5", "--max-time", "5"]) == 1
    assert "ParseError" in capsys.readouterr().err


def test_trace_file_line_count(tmp_path):
    out = tmp_path / "t.txt"
    main(["simulate", _fx("pingpong"), "--max-events", "9", "--max-time", "100", "--trace", str(out)])
    assert len(out.read_text().splitlines()) == 10


def test_verify_gadget_reports(capsys):
    assert main(["verify-gadget", "space-mult-half", "--samples", "33"]) == 0
    human, machine = capsys.readouterr().out.strip().splitlines()
    assert human.startswith("PASS")
    rep = json.loads(machine)
    assert rep["samples"] == 33 and rep["space_residual"] == 0
    assert main(["verify-gadget", "ray-mult", "factor=double", "eps=1/8", "--samples", "5"]) == 0
    assert json.loads(capsys.readouterr().out.splitlines()[1])["info"]["stages"] == "4"
    assert main(["verify-gadget", "no-such-thing"]) == 1


def test_compile_rejects_bad_bound(capsys):
    assert main(["compile", "shipped:flip", "--eps", "1/100"]) == 1
    assert "6 kappa/(1 - 4 kappa)" in capsys.readouterr().err


def test_compile_then_simulate_roundtrip(tmp_path, capsys):
    out = tmp_path / "flip.json"
    assert main(["compile", "shipped:flip", "--out", str(out)]) == 0
    summary = capsys.readouterr().out
    assert "period: 25231/200" in summary
    sf = read_scene_file(out)
    p = shipped_program("flip")
    base = Vec2(*(F(x) for x in sf.meta["entry_base"].split(",")))
    lat = F(sf.meta["entry_lateral"].split(",")[0])
    u = (sf.ball.pos.x - base.x) * lat / F(sf.meta["unit"])
    bits = decode_offset(u)
    c0 = PdaConfig(p.state_of_bits(bits[: p.ell]), tuple(bits[p.ell :]), tuple(decode_spread(sf.ball.time)))
    assert c0 == p.initial
    assert main(["simulate", str(out), "--max-events", "40", "--max-time", "1000"]) == 2


def test_oracle_and_compare(capsys):
    assert main(["oracle", "shipped:counter", "--steps", "2"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "1 inc A=1011 B=11"
    assert main(["compare", "shipped:flip", "--steps", "5"]) == 0
    assert "mismatches=0 reflections_per_step=[34]" in capsys.readouterr().out


def test_render_deterministic_and_overlay(tmp_path):
    trace = tmp_path / "t.txt"
    main(["simulate", _fx("space_half"), "--max-events", "20", "--max-time", "100", "--trace", str(trace)])
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        assert main(["render", _fx("space_half"), "--trace", str(trace), "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    svg = a.read_text()
    assert 'class="trace"' in svg and svg.count("<polyline id=") == 4


def test_render_empty_scene_has_target_only():
    svg = render_svg([], None, V(1, 1))
    assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")
    assert 'class="target"' in svg and "<polyline" not in svg
    import xml.dom.minidom

    xml.dom.minidom.parseString(svg)


def test_parabola_sampled_at_64_points():
    sf = read_scene_file(_fx("space_half"))
    svg = render_svg(sf.components)
    line = next(l for l in svg.splitlines() if "parabola" in l and "points=" in l)
    pts = line.split('points="')[1].split('"')[0].split()
    assert len(pts) == 64
