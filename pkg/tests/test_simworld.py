import hashlib
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guidedog.controller import VelocityCommand
from guidedog.errors import ParseError
from guidedog.simworld import (
    Calibration,
    Renderer,
    bundled_scenarios,
    initial_world,
    light_color_at,
    load_scenario,
    parse_scenario,
    score,
    step_kinematics,
)
from guidedog.simworld.scenario import Light, parse_points
from guidedog.simworld.world import normalize_angle, with_pose
from guidedog.walkable import analyze

CAL = Calibration()

STRAIGHT = """guidedog-scenario 1
name straight
camera width=320 height=240 pitch=18 fov=70
start x=0 y=0 heading=0 altitude=1.2
surface class=road polygon=-50,-50 150,-50 150,50 -50,50
strip class=sidewalk width=2 path=-50,0 150,0
centerline path=-50,0 150,0
goal polygon=90,-1 92,-1 92,1 90,1
"""


@pytest.fixture(scope="module")
def straight():
    return parse_scenario(STRAIGHT)


def light(schedule, offset=0.0):
    return Light("pedestrian", (0.0, 0.0, 2.0), 0.0, schedule, offset)


@pytest.mark.parametrize("t, color", [(0, "red"), (10, "green"), (25, "red"), (19.999, "green"), (20, "red")])
def test_light_schedule(t, color):
    assert light_color_at(light((("red", 10.0), ("green", 10.0))), t) == color


def test_light_offset_shifts_phase():
    lt = light((("red", 10.0), ("green", 10.0)), offset=5.0)
    assert light_color_at(lt, 5.0) == "green"


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e4), st.integers(-5, 5), st.floats(1, 30), st.floats(1, 30))
def test_light_schedule_is_periodic(t, k, red, green):
    lt = light((("red", red), ("green", green)))
    shifted = t + k * lt.cycle
    if shifted < 0:
        return
    # stay clear of phase boundaries, where float rounding decides
    phase = math.fmod(t, lt.cycle)
    if min(abs(phase - red), phase, lt.cycle - phase) < 1e-6:
        return
    assert light_color_at(lt, t) == light_color_at(lt, shifted)


def test_zero_command_only_advances_time(straight):
    w0 = initial_world(straight)
    w1 = step_kinematics(w0, VelocityCommand(), 0.5, CAL)
    assert (w1.drone.x, w1.drone.y, w1.drone.heading, w1.drone.h) == (0, 0, 0, 1.2)
    assert w1.drone.time == 0.5 and w1.step_index == 1


def test_forward_motion(straight):
    w = step_kinematics(initial_world(straight), VelocityCommand(v_f=50), 1.0, CAL)
    assert w.drone.x == pytest.approx(1.0) and w.drone.y == pytest.approx(0.0)


def test_yaw_rate(straight):
    w = step_kinematics(initial_world(straight), VelocityCommand(v_yaw=100), 1.0, CAL)
    assert w.drone.heading == pytest.approx(1.5)


def test_right_is_positive_y(straight):
    w = step_kinematics(initial_world(straight), VelocityCommand(v_lr=50), 1.0, CAL)
    assert w.drone.y == pytest.approx(1.0)
    w = with_pose(initial_world(straight), heading=math.pi / 2)
    w = step_kinematics(w, VelocityCommand(v_f=50, v_lr=50), 1.0, CAL)
    assert (w.drone.x, w.drone.y) == pytest.approx((-1.0, 1.0))


def test_altitude_floor(straight):
    w = step_kinematics(initial_world(straight), VelocityCommand(v_ud=-100), 10.0, CAL)
    assert w.drone.h == 0.0


def test_dt_must_be_positive(straight):
    with pytest.raises(ValueError):
        step_kinematics(initial_world(straight), VelocityCommand(), 0.0, CAL)


def test_normalize_angle():
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


rc = st.integers(-100, 100)


@settings(max_examples=200, deadline=None)
@given(rc, rc, rc, st.floats(-3, 3), st.floats(0.01, 0.5))
def test_two_half_steps_equal_one_step_without_yaw(v_lr, v_f, v_ud, heading, dt):
    w0 = with_pose(initial_world(parse_scenario(STRAIGHT)), heading=heading, h=5.0)
    cmd = VelocityCommand(v_lr, v_f, v_ud, 0)
    a = step_kinematics(step_kinematics(w0, cmd, dt, CAL), cmd, dt, CAL)
    b = step_kinematics(w0, cmd, 2 * dt, CAL)
    for f in ("x", "y", "heading", "h", "time"):
        assert getattr(a.drone, f) == pytest.approx(getattr(b.drone, f), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(rc, st.floats(0.01, 0.5))
def test_heading_integrates_linearly(v_yaw, dt):
    w0 = initial_world(parse_scenario(STRAIGHT))
    cmd = VelocityCommand(v_yaw=v_yaw)
    a = step_kinematics(step_kinematics(w0, cmd, dt, CAL), cmd, dt, CAL)
    assert a.drone.heading == pytest.approx(normalize_angle(2 * dt * v_yaw * CAL.k_yaw), abs=1e-9)


def test_centered_render_is_symmetric(straight):
    frame, _ = Renderer(straight).render(initial_world(straight))
    walk = frame.classes == frame.palette.id_of("sidewalk")
    assert walk.any()
    np.testing.assert_array_equal(walk, walk[:, ::-1])
    a = analyze(frame)
    # pixel x is the column index, so the image midline sits at (W - 1) / 2
    assert a.centroid[0] == pytest.approx((320 - 1) / 2, abs=1e-9)
    assert a.codes == (0, 1, 0)


def test_offset_left_sees_strip_to_the_right(straight):
    r = Renderer(straight)
    world = with_pose(initial_world(straight), y=-1.0)
    # hand projection of the strip-center point 4 m ahead
    pitch = math.radians(18)
    f = 160 / math.tan(math.radians(35))
    fwd, right, up = 4.0, 1.0, -1.2
    depth = fwd * math.cos(pitch) - up * math.sin(pitch)
    down = -fwd * math.sin(pitch) - up * math.cos(pitch)
    u, v = 160 + f * right / depth, 120 + f * down / depth
    assert u > 160
    got = r.project(world, (4.0, 0.0, 0.0))
    assert got[:2] == pytest.approx((u, v))
    frame, _ = r.render(world)
    assert frame.classes[int(v), int(u)] == frame.palette.id_of("sidewalk")
    assert analyze(frame).centroid[0] > 160


def test_nothing_in_view_is_all_void(straight):
    r = Renderer(replace(straight, camera=replace(straight.camera, pitch_deg=-40.0)))
    frame, _ = r.render(initial_world(straight))
    assert not frame.classes.any()
    assert not analyze(frame).present


def test_optical_axis_hits_image_center(straight):
    r = Renderer(straight)
    for heading in (0.0, math.pi / 2, math.pi, -math.pi / 2):
        world = with_pose(initial_world(straight), x=3.0, y=-2.0, heading=heading)
        reach = 1.2 / math.tan(math.radians(18))
        p = (3.0 + reach * math.cos(heading), -2.0 + reach * math.sin(heading), 0.0)
        u, v, _ = r.project(world, p)
        assert u == pytest.approx(160, abs=1e-9) and v == pytest.approx(120, abs=1e-9)


def test_marker_on_axis_lands_in_center_columns():
    reach = 1.2 / math.tan(math.radians(18))
    text = STRAIGHT + f"obstacle class=person polygon={reach - 0.05},-0.05 {reach + 0.05},-0.05 {reach + 0.05},0.05 {reach - 0.05},0.05\n"
    sc = parse_scenario(text)
    frame, _ = Renderer(sc).render(initial_world(sc))
    rows, cols = np.nonzero(frame.classes == frame.palette.id_of("person"))
    assert cols.min() + cols.max() == 319
    assert rows.min() <= 120 <= rows.max()


def frame_hash(frame):
    return hashlib.sha256(frame.classes.tobytes()).hexdigest()


@pytest.mark.parametrize("name", bundled_scenarios())
def test_render_is_deterministic(name):
    sc = load_scenario(name).with_seed(3)
    world = with_pose(initial_world(sc), x=sc.start.x + 2.0)
    a, _ = Renderer(sc).render(world)
    b, _ = Renderer(sc).render(world)
    assert frame_hash(a) == frame_hash(b)


def test_pixel_noise_is_seeded(straight):
    noisy = replace(straight, pixel_noise=0.1)
    w = initial_world(noisy)
    a, _ = Renderer(noisy).render(w)
    b, _ = Renderer(noisy).render(w)
    c, _ = Renderer(replace(noisy, seed=noisy.seed + 1)).render(w)
    assert frame_hash(a) == frame_hash(b) != frame_hash(c)


def records(points, dt=0.1):
    return [{"pose": {"x": x, "y": y}, "time": (i + 1) * dt} for i, (x, y) in enumerate(points)]


def test_score_centered_run(straight):
    m = score(records([(x, 0.0) for x in np.arange(0.5, 91.0, 0.5)]), straight)
    assert m.rms_deviation == 0 and m.red_light_violations == 0
    assert m.goal_reached and m.walkable_fraction == 1.0


def test_score_known_offsets(straight):
    m = score(records([(1, 0.1), (2, -0.2), (3, 0.2)]), straight)
    assert m.rms_deviation == pytest.approx(math.sqrt((0.01 + 0.04 + 0.04) / 3))
    assert m.rms_deviation == pytest.approx(math.sqrt(0.03))
    assert m.max_deviation == pytest.approx(0.2)
    assert not m.goal_reached and m.steps == 3


CROSSING = """guidedog-scenario 1
start x=0 y=0 heading=0 altitude=1.2
surface class=sidewalk polygon=-5,-2 30,-2 30,2 -5,2
surface class=crosswalk_plain polygon=10,-2 16,-2 16,2 10,2
obstacle class=person polygon=20,-0.5 21,-0.5 21,0.5 20,0.5
light kind=pedestrian at=18,1.5,2.3 facing=180 size=0.3,0.8 schedule={schedule} offset=0
crosswalk polygon=10,-2 16,-2 16,2 10,2 light=0
"""


def test_entering_crosswalk_on_red_is_a_violation():
    sc = parse_scenario(CROSSING.format(schedule="red:5,green:5"))
    m = score(records([(9.5, 0), (10.5, 0), (11.5, 0)], dt=1.0), sc)
    assert m.red_light_violations == 1
    m = score(records([(9.5, 0), (9.9, 0), (9.9, 0), (9.9, 0), (9.9, 0), (10.5, 0)], dt=1.0), sc)
    assert m.red_light_violations == 0


def test_obstacle_footprint_hits():
    sc = parse_scenario(CROSSING.format(schedule="green:5"))
    m = score(records([(19.85, 0), (19.92, 0), (20.5, 0)]), sc)
    assert m.obstacle_hits == 2


@pytest.mark.parametrize(
    "text, line",
    [
        ("name x\n", 1),
        ("guidedog-scenario 2\n", 1),
        ("guidedog-scenario 1\nstart x=0 y=0 heading=0 altitude=1\nsurface class=road polygon=0,0 1,0\n", 3),
        ("guidedog-scenario 1\nstart x=0 y=0 heading=0 altitude=1\nsurface class=road polygon=0,0 1,0 1,1\nbogus 1\n", 4),
        ("guidedog-scenario 1\nstart x=0 heading=0\n", 2),
        ("guidedog-scenario 1\nsurface class=marble polygon=0,0 1,0 1,1\n", 2),
    ],
)
def test_scenario_parse_errors(text, line):
    with pytest.raises(ParseError) as exc:
        parse_scenario(text, "bad.scn")
    assert exc.value.line == line
    assert "bad.scn" in str(exc.value)


def test_arc_tokens_expand():
    pts = parse_points(["0,0", "@0,10,10,-90,0,4"])
    # the arc starts on the previous vertex, which is not repeated
    assert len(pts) == 4
    assert pts[0] == (0.0, 0.0)
    assert pts[-1] == pytest.approx((10.0, 10.0))
    assert pts[2] == pytest.approx((10 * math.cos(math.radians(30)), 5.0))


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_scenarios_parse(name):
    sc = load_scenario(name)
    assert sc.surfaces and sc.goal is not None and sc.centerline is not None
