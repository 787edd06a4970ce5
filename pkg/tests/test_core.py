import dataclasses
import json

import numpy as np
import pytest

from dcboost.convex import L1, Linear, Quadratic
from dcboost.core import (
    DcProblem,
    DirectNu,
    EpsSchedule,
    GrippoNu,
    InexactMode,
    IterationRecord,
    LambdaBarRule,
    RatioNu,
    SolverConfig,
    Termination,
    Trace,
    TRACE_CSV_COLUMNS,
    ZeroNu,
    ZhangHagerNu,
    config_from_flat,
    config_to_flat,
    validate,
)
from dcboost import problems


# --- objective values --------------------------------------------------------


def test_phi_known_values():
    ex1 = problems.get("ex1")
    ex2 = problems.get("ex2")
    assert ex1.phi([-1.0, -1.0]) == pytest.approx(-2.0, abs=1e-15)
    assert ex2.phi([1.5, 0.0]) == pytest.approx(-1.125, abs=1e-15)
    assert ex1.phi([0.0, 0.0]) == 0.0


def test_phi_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        problems.get("ex1").phi([1.0, 2.0, 3.0])


def test_phi_matches_closed_form(rng):
    closed = {
        "ex1": lambda x: x[0] ** 2 + x[1] ** 2 + x[0] + x[1] - abs(x[0]) - abs(x[1]),
        "ex2": lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2) + abs(x[0]) + abs(x[1]) - 2.5 * x[0],
    }
    for name, fn in closed.items():
        prob = problems.get(name)
        for _ in range(20):
            x = rng.uniform(-5, 5, 2)
            assert prob.phi(x) == pytest.approx(fn(x), abs=1e-12)


# --- problem construction ------------------------------------------------------


def test_from_components_takes_min_modulus():
    ex1 = problems.get("ex1")
    assert ex1.sigma == 1.0
    ex2 = problems.get("ex2")
    assert ex2.sigma == 1.0


def test_sigma_above_modulus_rejected():
    g = Quadratic(1.5) + Linear([1.0, 1.0])
    h = Quadratic(0.5) + L1(1.0)
    with pytest.raises(ValueError, match="modulus"):
        DcProblem("bad", g, h, dim=2, sigma=2.0)
    with pytest.raises(ValueError, match="sigma"):
        DcProblem("bad", g, h, dim=2, sigma=0.0)


# --- validate -------------------------------------------------------------------


def test_validate_reference_config_clean():
    cfg = problems.experiment_config()
    assert validate(problems.get("ex1"), cfg) == []


def test_validate_theta_boundary():
    cfg = dataclasses.replace(problems.experiment_config(), theta=0.5)
    msgs = validate(problems.get("ex1"), cfg)
    assert any("theta ≥ sigma/2" in m for m in msgs)


def test_validate_beta_boundary():
    cfg = dataclasses.replace(problems.experiment_config(), beta=1.0)
    msgs = validate(problems.get("ex1"), cfg)
    assert any("beta ∉ (0,1)" in m for m in msgs)


def test_validate_is_pure():
    cfg = dataclasses.replace(problems.experiment_config(), beta=1.0, rho=-1.0)
    prob = problems.get("ex2")
    assert validate(prob, cfg) == validate(prob, cfg)


def test_validate_positive_tolerances():
    cfg = dataclasses.replace(problems.experiment_config(), stop_step_tol=0.0)
    assert any("stop_step_tol" in m for m in validate(problems.get("ex1"), cfg))


# --- schedules -------------------------------------------------------------------


def test_eps_schedule_values():
    assert EpsSchedule.zero().at(5) == 0.0
    geo = EpsSchedule.geometric(1.0, 0.5)
    assert [geo.at(k) for k in range(3)] == [1.0, 0.5, 0.25]
    har = EpsSchedule.harmonic2(2.0)
    assert har.at(0) == 2.0
    assert har.at(3) == pytest.approx(2.0 / 16)


def test_eps_schedule_summable():
    # the nonzero schedules must have convergent partial sums
    for sched in (EpsSchedule.geometric(1.0, 0.9), EpsSchedule.harmonic2(1.0)):
        tail = sum(sched.at(k) for k in range(10_000, 11_000))
        assert tail < 1e-3


def test_eps_schedule_validation():
    with pytest.raises(ValueError):
        EpsSchedule.geometric(1.0, 1.0)
    with pytest.raises(ValueError):
        EpsSchedule("geometric", -1.0, 0.5)
    with pytest.raises(ValueError):
        EpsSchedule("nope")


def test_lambda_bar_rules():
    assert LambdaBarRule.constant(2.5).trial(7) == 2.5
    assert LambdaBarRule.zero_boost().trial(0) == 0.0


# --- nu strategy specs -------------------------------------------------------------


def test_nu_spec_validation():
    with pytest.raises(ValueError):
        DirectNu(delta_min=1.0)
    with pytest.raises(ValueError):
        DirectNu(delta_min=0.5, delta=0.4)
    with pytest.raises(ValueError):
        ZhangHagerNu(eta_min=0.5, eta_max=0.4)
    with pytest.raises(ValueError):
        ZhangHagerNu(c0_offset=0.0)
    with pytest.raises(ValueError):
        GrippoNu(m=0)
    with pytest.raises(ValueError):
        RatioNu(omega=0.0)


def test_direct_delta_resolution():
    assert DirectNu(delta_min=0.2).delta_at(3) == 0.2
    assert DirectNu(delta_min=0.2, delta=0.6).delta_at(3) == 0.6
    spec = DirectNu(delta_min=0.2, delta_rule=lambda k: 0.5 + 0.1 * (k % 2))
    assert spec.delta_at(0) == 0.5
    assert spec.delta_at(1) == 0.6
    with pytest.raises(ValueError, match="delta rule"):
        DirectNu(delta_min=0.5, delta_rule=lambda k: 0.1).delta_at(0)


# --- config round trip ----------------------------------------------------------------


@pytest.mark.parametrize(
    "nu",
    [
        ZeroNu(),
        DirectNu(delta_min=0.25, delta=0.5, nu0=0.3, fraction=0.9),
        ZhangHagerNu(eta_min=0.1, eta_max=0.8, c0_offset=2.0, eta=0.5),
        GrippoNu(m=4),
        RatioNu(omega=0.01),
    ],
)
def test_config_flat_round_trip(nu):
    cfg = SolverConfig(
        rho=0.6,
        beta=0.1,
        theta=0.2,
        lambda_bar=LambdaBarRule.constant(1.0),
        eps=EpsSchedule.harmonic2(0.5),
        nu=nu,
        stop_step_tol=1e-5,
        d_zero_tol=1e-12,
        max_iter=321,
        max_backtracks=42,
        inexact_mode=InexactMode.PERTURBED_EXACT,
    )
    flat = config_to_flat(cfg)
    json.dumps(flat)
    assert config_from_flat(flat) == cfg


# --- trace serialization -----------------------------------------------------------------


def _tiny_trace():
    rec = IterationRecord(
        k=0,
        x=np.array([1.0, 1.0]),
        phi_x=2.0,
        eps_k=0.0,
        eps_certified=0.0,
        w=np.array([2.0, 2.0]),
        y=np.array([1 / 3, 1 / 3]),
        xi=np.array([2.0, 2.0]),
        d_norm=float(np.sqrt(8.0 / 9.0)),
        inexact_lhs=0.0,
        inexact_rhs=0.0,
        nu_k=0.0,
        lambda_bar=1.0,
        lambda_k=1.0,
        n_backtracks=0,
        phi_y=2.0 / 9.0,
        phi_next=-10.0 / 9.0,
    )
    return Trace(
        problem_name="ex1",
        config=problems.experiment_config(),
        x0=np.array([1.0, 1.0]),
        records=[rec],
        final_x=np.array([-1 / 3, -1 / 3]),
        final_phi=-10.0 / 9.0,
        termination=Termination.MAX_ITER,
    )


def test_trace_jsonl_round_trip(tmp_path):
    trace = _tiny_trace()
    path = tmp_path / "t.jsonl"
    trace.write_jsonl(path)
    back = Trace.read_jsonl(path)
    assert back.problem_name == trace.problem_name
    assert back.config == trace.config
    assert back.termination is trace.termination
    np.testing.assert_array_equal(back.x0, trace.x0)
    np.testing.assert_array_equal(back.final_x, trace.final_x)
    assert len(back.records) == 1
    a, b = trace.records[0], back.records[0]
    for field in ("phi_x", "d_norm", "lambda_k", "phi_next", "nu_k"):
        assert getattr(a, field) == getattr(b, field)
    np.testing.assert_array_equal(a.y, b.y)
    assert b.tau is None and b.tau_hat is None


def test_trace_jsonl_exact_floats(tmp_path):
    # repr round-trip keeps float64 values bit-exact through the file
    trace = _tiny_trace()
    path = tmp_path / "t.jsonl"
    trace.write_jsonl(path)
    back = Trace.read_jsonl(path)
    assert back.records[0].phi_next == trace.records[0].phi_next
    assert back.records[0].d_norm == trace.records[0].d_norm


def test_trace_csv_columns(tmp_path):
    trace = _tiny_trace()
    path = tmp_path / "t.csv"
    trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRACE_CSV_COLUMNS)
    assert TRACE_CSV_COLUMNS == [
        "k", "phi_x", "eps_k", "d_norm", "inexact_lhs", "inexact_rhs",
        "nu_k", "lambda_k", "n_backtracks", "phi_y", "phi_next",
        "tau_hat", "tau",
    ]
    row = lines[1].split(",")
    assert row[0] == "0"
    assert float(row[1]) == 2.0
    assert row[-1] == ""  # tau not populated


def test_trace_read_rejects_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        Trace.read_jsonl(path)


def test_trace_read_rejects_headerless(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"k": 0}\n')
    with pytest.raises(ValueError, match="header"):
        Trace.read_jsonl(path)
