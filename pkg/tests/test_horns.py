import math

import pytest
from hypothesis import given, strategies as st

from hornsim.dynamics import VehicleState, Wall, body_to_world
from hornsim.horns import (Material, Row, compute_deflection, contact_wrench, make_configuration, make_horn,
                           material_preset, spring_energy, update_damage)

WALL = Wall(x_wall=0.5, mu=0.3)


def test_soft_is_more_compliant_and_more_damped():
    soft, hard = material_preset(Material.SOFT), material_preset(Material.HARD)
    assert soft.k < hard.k
    assert soft.c > hard.c
    assert math.isinf(soft.failure_energy)
    assert math.isfinite(hard.failure_energy)


def test_configuration_rows():
    assert [h.row for h in make_configuration("FullSoft").horns] == [Row.UPPER, Row.LOWER]
    assert [h.row for h in make_configuration("HalfSoft").horns] == [Row.UPPER]
    assert all(h.material is Material.HARD for h in make_configuration("FullHard").horns)


def test_pair_doubles_constants():
    h = make_horn("u", Row.UPPER, Material.SOFT, k=100.0, c=1.0)
    assert (h.k, h.c) == (200.0, 2.0)


def test_upper_tip_leads_lower_tip():
    cfg = make_configuration("FullSoft")
    assert cfg.horn("upper").attach_body[0] > cfg.horn("lower").attach_body[0]


def test_row_height_validated():
    with pytest.raises(ValueError):
        make_horn("u", Row.UPPER, Material.SOFT, tip=(0.1, -0.05))
    with pytest.raises(ValueError):
        make_configuration("Bogus")


def test_deflection_level_body():
    horn = make_horn("u", Row.UPPER, Material.SOFT, tip=(0.1, 0.05))
    s = VehicleState(x=0.41, z=1.0, vx=0.2)
    d, rate = compute_deflection(horn, s, WALL)
    assert d == pytest.approx(0.01, abs=1e-12)
    assert rate == pytest.approx(0.2)


def test_no_deflection_away_from_wall():
    horn = make_horn("u", Row.UPPER, Material.SOFT, tip=(0.1, 0.05))
    assert compute_deflection(horn, VehicleState(x=0.3, z=1.0), WALL) == (0.0, 0.0)


def test_pitch_raises_upper_tip_penetration():
    horn = make_horn("u", Row.UPPER, Material.SOFT, tip=(0.1, 0.05))
    level = compute_deflection(horn, VehicleState(x=0.41, z=1.0), WALL)[0]
    leaning = compute_deflection(horn, VehicleState(x=0.41, z=1.0, theta=0.1), WALL)[0]
    assert leaning > level


def test_deflection_not_capped():
    cfg = make_configuration("FullSoft")
    horn = cfg.horn("upper")
    s = VehicleState(x=0.5 - horn.attach_body[0] + 0.05, z=1.0)
    d = compute_deflection(horn, s, WALL)[0]
    assert d == pytest.approx(0.05)
    _, cs = contact_wrench(cfg, s, WALL)
    assert cs["upper"].saturated


def test_symmetric_levers_cancel_moment():
    cfg = make_configuration("FullSoft", lower_forward=None)
    s = VehicleState(x=0.5 - cfg.horns[0].attach_body[0] + 0.01, z=1.0)
    w, cs = contact_wrench(cfg, s, Wall(x_wall=0.5, mu=0.0))
    assert cs["upper"].in_contact and cs["lower"].in_contact
    assert w.my == pytest.approx(0.0, abs=1e-12)
    assert w.fx < 0.0


def test_upper_contact_alone_pitches_nose_up():
    cfg = make_configuration("HalfSoft")
    s = VehicleState(x=0.5 - cfg.horns[0].attach_body[0] + 0.01, z=1.0)
    w, _ = contact_wrench(cfg, s, Wall(x_wall=0.5, mu=0.0))
    assert w.fx == pytest.approx(-cfg.horns[0].k * 0.01)
    assert w.my < 0.0


def test_compression_only():
    cfg = make_configuration("HalfSoft")
    s = VehicleState(x=0.5 - cfg.horns[0].attach_body[0] + 0.001, z=1.0, vx=-2.0)
    w, cs = contact_wrench(cfg, s, WALL)
    assert cs["upper"].normal_force == 0.0
    assert (w.fx, w.fz, w.my) == (0.0, 0.0, 0.0)


def test_friction_opposes_sliding():
    cfg = make_configuration("HalfSoft")
    s = VehicleState(x=0.5 - cfg.horns[0].attach_body[0] + 0.01, z=1.0, vz=0.5)
    w, cs = contact_wrench(cfg, s, WALL)
    assert w.fz < 0.0
    assert abs(w.fz) <= WALL.mu * cs["upper"].normal_force + 1e-12


def test_spring_energy():
    cfg = make_configuration("HalfSoft")
    s = VehicleState(x=0.5 - cfg.horns[0].attach_body[0] + 0.02, z=1.0)
    assert spring_energy(cfg, s, WALL) == pytest.approx(0.5 * cfg.horns[0].k * 0.02 ** 2)


def test_damage_accumulates_compression_work():
    h = make_horn("u", Row.UPPER, Material.HARD, failure_energy=1.0)
    h = update_damage(h, f_n=10.0, deflection_rate=0.5, dt=0.1)
    assert h.absorbed_energy == pytest.approx(0.5)
    assert not h.failed
    h = update_damage(h, f_n=10.0, deflection_rate=0.5, dt=0.4)
    assert h.absorbed_energy == pytest.approx(2.5)
    assert h.failed


def test_restitution_does_not_count():
    h = make_horn("u", Row.UPPER, Material.HARD)
    assert update_damage(h, 10.0, -0.5, 0.1) == h
    assert update_damage(h, 0.0, 0.5, 0.1) == h


def test_soft_never_fails():
    h = make_horn("u", Row.UPPER, Material.SOFT)
    for _ in range(100):
        h = update_damage(h, 100.0, 1.0, 0.1)
    assert not h.failed


def test_failed_horn_exerts_nothing():
    cfg = make_configuration("FullHard")
    broken = cfg.with_horns([type(h)(**{**h.__dict__, "failed": True}) for h in cfg.horns])
    s = VehicleState(x=0.5 - cfg.horns[0].attach_body[0] + 0.01, z=1.0)
    w, _ = contact_wrench(broken, s, WALL)
    assert (w.fx, w.fz, w.my) == (0.0, 0.0, 0.0)
    assert spring_energy(broken, s, WALL) == 0.0


@given(st.floats(0.0, 0.05), st.floats(-0.4, 0.4), st.floats(-1, 1), st.floats(-1, 1))
def test_wall_only_pushes_back(pen, theta, vx, vz):
    cfg = make_configuration("FullSoft")
    s = VehicleState(x=0.5 - 0.08 + pen, z=1.0, theta=theta, vx=vx, vz=vz)
    w, cs = contact_wrench(cfg, s, WALL)
    assert w.fx <= 0.0
    for hc in cs.horns:
        assert hc.normal_force >= 0.0
        assert abs(hc.friction_force) <= WALL.mu * hc.normal_force + 1e-12


def test_single_upper_horn_wrench():
    horn = make_horn("upper", Row.UPPER, Material.SOFT, tip=(0.1, 0.05), pair=1)
    cfg = make_configuration("HalfSoft").with_horns([horn])
    s = VehicleState(x=0.41, z=1.0)
    w, cs = contact_wrench(cfg, s, Wall(x_wall=0.5, mu=0.0))
    assert w.fx == pytest.approx(-3.0)
    # energy-consistent sign: a push on a point above the centre pitches away from the wall
    assert w.my == pytest.approx(-0.15)
    assert cs["upper"].in_contact


def test_free_flight_zero_wrench():
    cfg = make_configuration("FullSoft")
    w, cs = contact_wrench(cfg, VehicleState(x=0.0, z=1.0), WALL)
    assert (w.fx, w.fz, w.my) == (0.0, 0.0, 0.0)
    assert not cs.any_contact


def test_lower_contact_alone_pitches_toward_wall():
    cfg = make_configuration("FullSoft")
    lower = cfg.horn("lower")
    # tilted away from the wall so the lower tip leads
    tip_x = body_to_world(lower.attach_body, VehicleState(theta=-0.2))[0]
    s = VehicleState(x=0.5 - tip_x + 0.005, z=1.0, theta=-0.2)
    w, cs = contact_wrench(cfg, s, Wall(x_wall=0.5, mu=0.0))
    assert cs["lower"].in_contact and not cs["upper"].in_contact
    assert w.my > 0.0
