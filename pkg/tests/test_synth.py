import math

import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from textlink.geometry import TextComponent, width_from_height
from textlink.synth import (GenerationError, GeneratorConfig, NoiseModel, Scene, TextInstancePoly,
                            check_scene, divide_instance, extract_tcr, generate_scene, link_labels,
                            load_scene, perturb_components, save_scene, scene_from_json,
                            scene_to_json)


def rect_instance(length, height, x0=0.0, y0=0.0, n=11):
    xs = np.linspace(x0, x0 + length, n)
    top = np.stack([xs, np.full(n, y0)], axis=1)
    bottom = np.stack([xs, np.full(n, y0 + height)], axis=1)
    return TextInstancePoly(0, top, bottom)


def arc_instance(radius=120.0, height=20.0, n=80):
    phi = np.linspace(math.pi, 0.0, n)  # left to right over the top of a circle
    ctr = np.array([200.0, 200.0])
    u = np.stack([np.cos(phi), -np.sin(phi)], axis=1)
    return TextInstancePoly(3, ctr + (radius + height / 2) * u, ctr + (radius - height / 2) * u)


def test_divide_rectangle_into_ten():
    comps = divide_instance(rect_instance(100, 20), 8, 24)
    assert len(comps) == 10
    assert all(c.w == 10 and abs(c.theta) < 1e-12 for c in comps)
    assert [round(c.x, 9) for c in comps] == [5.0 + 10 * k for k in range(10)]
    assert all(c.instance_id == 0 for c in comps)


def test_divide_short_instance_gives_one_component():
    comps = divide_instance(rect_instance(8, 20), 8, 24)
    assert len(comps) == 1
    assert comps[0].x == pytest.approx(4.0)


def test_divide_square_follows_abutting_stride():
    # h = 20 gives w = 10, so a 20-long square holds two abutting tiles
    assert len(divide_instance(rect_instance(20, 20), 8, 24)) == 2


def test_divide_rejects_degenerate_line():
    inst = TextInstancePoly(0, np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([[1.0, 5.0], [1.0, 5.0]]))
    with pytest.raises(ValueError):
        divide_instance(inst)


def test_arc_orientation_tracks_tangent():
    inst = arc_instance()
    comps = divide_instance(inst)
    thetas = np.unwrap([c.theta for c in comps])
    assert np.all(np.diff(thetas) < 0) or np.all(np.diff(thetas) > 0)
    for c in comps:
        phi = math.atan2(-(c.y - 200.0), c.x - 200.0)
        tangent = phi - math.pi / 2  # clockwise travel over the top
        diff = (c.theta - tangent + math.pi) % (2 * math.pi) - math.pi
        assert abs(diff) < 0.1


def test_divide_components_obey_width_law_and_tile_line():
    scene = generate_scene(GeneratorConfig(), seed=3)
    for inst in scene.instances:
        comps = divide_instance(inst)
        for c in comps:
            assert c.w == width_from_height(c.h)
        gaps = [math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(comps, comps[1:])]
        widths = [0.5 * (a.w + b.w) for a, b in zip(comps, comps[1:])]
        # abutting along a curve: chord never exceeds the summed half widths by much
        for g, w in zip(gaps, widths):
            assert g <= w * 1.05 + 1e-9
        mid = 0.5 * (inst.top + inst.bottom)
        length = np.sum(np.linalg.norm(np.diff(mid, axis=0), axis=1))
        covered = sum(c.w for c in comps)
        assert length - covered < max(c.w for c in comps) + 1e-6


def test_tcr_rectangle():
    tcr = extract_tcr(rect_instance(100, 20))
    assert not tcr.empty
    xs, ys = tcr.polygon[:, 0], tcr.polygon[:, 1]
    assert (xs.min(), xs.max()) == pytest.approx((5.0, 95.0))
    assert (ys.min(), ys.max()) == pytest.approx((4.0, 16.0))
    assert Polygon(tcr.polygon).area == pytest.approx(90 * 12)


def test_tcr_too_short_is_flagged():
    assert extract_tcr(rect_instance(8, 20)).empty


def test_tcr_inside_instance_for_random_instances():
    for seed in range(15):
        scene = generate_scene(GeneratorConfig(), seed=seed)
        for inst in scene.instances:
            tcr = extract_tcr(inst)
            if tcr.empty:
                continue
            poly = inst.polygon().buffer(1e-7)
            assert all(poly.contains(Point(p)) for p in tcr.polygon)
            assert Polygon(tcr.polygon).area < inst.polygon().area


def test_generate_empty_and_deterministic():
    empty = generate_scene(GeneratorConfig(), seed=1, n_instances=0)
    assert empty.instances == [] and empty.components == []
    a = scene_to_json(generate_scene(GeneratorConfig(), seed=11))
    b = scene_to_json(generate_scene(GeneratorConfig(), seed=11))
    assert a == b


def test_sine_scene_invariants():
    cfg = GeneratorConfig(families=("sine",))
    scene = generate_scene(cfg, seed=7, n_instances=5)
    assert len(scene.instances) == 5
    assert check_scene(scene) == []


@pytest.mark.parametrize("cfg", [GeneratorConfig(), GeneratorConfig.adversarial()],
                         ids=["default", "adversarial"])
def test_scene_invariants_hold_over_many_seeds(cfg):
    for seed in range(20):
        scene = generate_scene(cfg, seed=seed)
        assert check_scene(scene) == []
        polys = [i.polygon() for i in scene.instances]
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                assert not polys[i].intersects(polys[j])


def test_adversarial_scenes_contain_stacked_pairs():
    scene = generate_scene(GeneratorConfig.adversarial(), seed=0)
    polys = [i.polygon() for i in scene.instances]
    hmax = max(c.h for c in scene.components)
    close = [polys[i].distance(polys[j]) for i in range(len(polys)) for j in range(i + 1, len(polys))]
    assert min(close) < hmax


def test_infeasible_config_raises_with_reason():
    cfg = GeneratorConfig(width=100, height=100, length_range=(300, 400), max_tries=20)
    with pytest.raises(GenerationError, match="could only place"):
        generate_scene(cfg, seed=0, n_instances=2)


def test_scene_json_round_trip(tmp_path):
    scene = generate_scene(GeneratorConfig(), seed=5)
    path = tmp_path / "s.json"
    save_scene(scene, path)
    back = load_scene(path)
    assert scene_to_json(back) == scene_to_json(scene)
    assert back.components == scene.components
    with pytest.raises(ValueError):
        scene_from_json({**scene_to_json(scene), "format_version": 99})


def comps_line(n, h=20.0):
    return [TextComponent(10.0 * k, 0.0, h, 10.0, instance_id=k % 3) for k in range(n)]


def test_zero_noise_is_identity():
    comps = comps_line(30)
    assert perturb_components(comps, NoiseModel.zero(), seed=4) == comps


def test_full_drop_empties():
    nm = NoiseModel(drop_rate=1.0, spurious_rate=0.0)
    assert perturb_components(comps_line(30), nm, seed=4) == []


def test_perturbation_deterministic_and_normalised():
    scene = generate_scene(GeneratorConfig(), seed=2)
    a = perturb_components(scene.components, NoiseModel(), seed=9, scene=scene)
    b = perturb_components(scene.components, NoiseModel(), seed=9, scene=scene)
    assert a == b
    assert all(abs(c.cos_t ** 2 + c.sin_t ** 2 - 1) < 1e-12 for c in a)
    assert all(c.w == width_from_height(c.h) for c in a)
    spurious = [c for c in a if c.instance_id is None]
    polys = [i.polygon() for i in scene.instances]
    assert all(not p.contains(Point(c.x, c.y)) for c in spurious for p in polys)


def test_center_noise_monte_carlo():
    n, h, rel = 10_000, 20.0, 0.1
    comps = [TextComponent(50.0, 50.0, h, 10.0)] * n
    nm = NoiseModel(center_sigma=rel, height_sigma=0.0, theta_sigma=0.0, drop_rate=0.0,
                    spurious_rate=0.0)
    out = perturb_components(comps, nm, seed=17)
    dx = np.array([c.x - 50.0 for c in out])
    dy = np.array([c.y - 50.0 for c in out])
    sigma = rel * h
    assert abs(dx.mean()) < 3 * sigma / math.sqrt(n)
    assert abs(dy.mean()) < 3 * sigma / math.sqrt(n)
    r = np.hypot(dx, dy)
    expected = sigma * math.sqrt(math.pi / 2)  # Rayleigh mean
    sd = sigma * math.sqrt((4 - math.pi) / 2)
    assert abs(r.mean() - expected) < 3 * sd / math.sqrt(n)


def test_link_labels():
    comps = [TextComponent(0, 0, 1, 1, instance_id=1), TextComponent(0, 0, 1, 1, instance_id=1),
             TextComponent(0, 0, 1, 1, instance_id=2), TextComponent(0, 0, 1, 1)]
    lab = link_labels(comps)
    assert lab(0, 1) == 1 and lab(0, 2) == 0
    assert lab(3, 0) == 0 and lab(3, 3) == 0


def test_check_scene_reports_violations():
    inst = rect_instance(100, 20, 10, 10)
    bad = TextComponent(500.0, 15.0, 20, 10, instance_id=0)
    msgs = check_scene(Scene(200, 200, [inst], [bad]))
    assert any("outside the scene" in m for m in msgs)
    assert any("center outside instance" in m for m in msgs)
