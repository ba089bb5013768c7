import dataclasses
import json
import math

import numpy as np
import pytest

from wireleg.control import GainSchedule
from wireleg.harness import cli
from wireleg.harness.config import (ConfigError, builtin_config, builtin_names, load_config,
                                    resolve)
from wireleg.harness.experiments import (ImpactSettings, Scenario, run_impact_case,
                                         run_pi_bench, run_spring_characterization,
                                         run_tracking_experiment)
from wireleg.harness.trace import COLUMNS, Trace, emit_trace, read_trace, sidecar_path
from wireleg.kinematics import jacobian

# -- traces -------------------------------------------------------------------


def sample_trace(n=5):
    tr = Trace()
    rng = np.random.default_rng(3)
    for k in range(n):
        row = {name: float(v) for name, v in zip(COLUMNS, rng.normal(size=len(COLUMNS)))}
        row["t"] = k * 1e-3
        row["K_vs"] = 1.0 / 3.0 + k
        tr.append(row)
    return tr


def test_empty_trace_writes_header_only(tmp_path):
    path = emit_trace(Trace(), tmp_path / "empty.csv")
    assert path.read_text() == ",".join(COLUMNS) + "\n"


def test_trace_round_trip_is_exact(tmp_path):
    tr = sample_trace()
    back = read_trace(emit_trace(tr, tmp_path / "t.csv", {"name": "x"}))
    assert back.columns == tr.columns
    for name in COLUMNS:
        assert back[name].tobytes() == tr[name].tobytes()
    meta = json.loads(sidecar_path(tmp_path / "t.csv").read_text())
    assert meta["rows"] == 5 and meta["scenario"] == {"name": "x"}


def test_trace_columns_cover_recorded_signals():
    needed = {"t", "tau_out_knee", "tau_ref_knee", "tau_alpha_knee", "tau_l_knee",
              "ground_force", "foot_x_des", "foot_z", "K_vs", "K_d", "omega_l_hat",
              "com_height", "com_height_kin", "saturated"}
    assert needed <= set(COLUMNS)


def test_emit_trace_names_bad_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_trace(sample_trace(), tmp_path / "missing" / "t.csv")


def test_recorded_trace_is_uniform_and_finite(swing_trace):
    dt = np.diff(swing_trace["t"])
    np.testing.assert_allclose(dt, 1e-3, rtol=1e-9)
    for name in COLUMNS:
        assert np.all(np.isfinite(swing_trace[name])), name


# -- config -------------------------------------------------------------------


def test_builtin_configs_resolve():
    names = builtin_names()
    assert {"pi-bench", "characterize", "track", "impact", "stability", "swing"} <= set(names)
    for name in names:
        assert builtin_config(name).scenario.schedules


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="top level: colour"):
        resolve({"colour": 1})


def test_unknown_section_key():
    with pytest.raises(ConfigError, match=r"\[knee\]: K_x"):
        resolve({"knee": {"K_x": 1.0}})


def test_unknown_schedule_key():
    with pytest.raises(ConfigError, match="schedules.0"):
        resolve({"schedules": [{"mode": "linear", "stiffness": 3}]})


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError):
        resolve({"knee": {"J_m": -1.0}})


def test_partial_plant_table_keeps_defaults():
    cfg = resolve({"knee": {"K_w": 4000}, "impact": {"impulses": [100, 300]}})
    assert cfg.scenario.knee.K_w == 4000.0 and isinstance(cfg.scenario.knee.K_w, float)
    assert cfg.scenario.knee.J_m == Scenario().knee.J_m
    assert cfg.impact.impulses == (100, 300)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("dt = = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError, match="no built-in"):
        builtin_config("nope")


# -- experiments -------------------------------------------------------------------


def test_pi_bench_dc_and_bandwidth():
    dc = run_pi_bench(Scenario(), amplitude=0.0, offset=5.0, duration=1.0)
    assert abs(dc.dc_error) < 1e-5 and not dc.saturated
    ac = run_pi_bench(Scenario(), amplitude=10.0, freq=5.0, duration=1.0)
    assert ac.amplitude_ratio >= 0.95


def test_pi_bench_saturation_is_flagged():
    res = run_pi_bench(Scenario(), amplitude=0.0, offset=100.0, duration=0.6)
    assert res.saturated
    assert np.max(res.trace["tau_out"]) == pytest.approx(33.0, abs=1e-12)
    # the locked wire rings around the clamped torque
    late = res.trace["t"] >= 0.4
    assert np.mean(res.trace["tau_l"][late]) == pytest.approx(33.0, rel=0.02)


def test_tracking_needs_time_after_settling():
    with pytest.raises(ValueError, match="settle"):
        run_tracking_experiment(Scenario(duration=0.5), settle=1.0)


def test_doubling_linear_stiffness_reduces_tracking_error():
    scen = Scenario(schedules=[GainSchedule.linear(500.0, 100.0),
                               GainSchedule.linear(1000.0, 100.0)], duration=2.0)
    soft, stiff = run_tracking_experiment(scen)
    assert stiff.peak_error < soft.peak_error


def test_zero_amplitude_tracking_holds_position():
    scen = Scenario(schedules=[GainSchedule()], duration=1.5)
    (res,) = run_tracking_experiment(scen, amplitude=0.0, settle=1.0)
    assert res.peak_error < 1e-4


def test_characterization_skips_unreachable_points():
    sched = GainSchedule.linear(75.0, 10.0)
    table = run_spring_characterization(Scenario(), sched, [0.0, 0.01, 0.2], speed=0.05,
                                        settle=0.1)
    assert table.skipped == [0.2]
    assert [p.deflection for p in table.points] == [0.0, 0.01]
    assert abs(table.points[0].force) < 0.1


def test_zero_impulse_stands_still(impact_config):
    scen = dataclasses.replace(impact_config.scenario, duration=1.0)
    sched = GainSchedule()
    rep, tr = run_impact_case(scen, sched, 0.0, impact_config.impact)
    assert not rep.flight
    q = (tr["q_hip"][-1], tr["theta_l_knee"][-1])
    standing = abs((jacobian(*q, scen.geometry).T @ [0.0, tr["ground_force"][-1]])[1])
    assert rep.peak_knee_load == pytest.approx(standing, rel=0.03)


def test_impact_report_invariants(impact_run):
    reports, _ = impact_run
    assert any(rep.flight for rep in reports)
    for rep in reports:
        assert rep.peak_knee_load >= rep.mean_knee_load >= 0
        assert rep.max_com_deviation >= 0 and rep.steady_com_error >= 0
        assert rep.max_com_deviation >= rep.steady_com_error


def test_stiffness_dips_at_impact_and_recovers(impact_run):
    reports, traces = impact_run
    for rep in reports:
        if rep.schedule != "nonlinear":
            continue
        tr = traces[(rep.impulse, rep.schedule)]
        t, k = tr["t"], tr["K_des"]
        window = (t >= rep.impact_time) & (t < rep.impact_time + 0.3)
        assert np.min(k[window]) < 0.9 * 1000.0
        assert np.mean(k[t >= t[-1] - 0.3]) > np.min(k[window])


def test_impact_settings_reject_unknown_key():
    with pytest.raises(ConfigError):
        resolve({"impact": {"impulse": [1.0]}})
    assert ImpactSettings().impulses == (200.0, 500.0, 800.0)


# -- command line -------------------------------------------------------------------


def run_cli(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def test_cli_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli(out, "pi-bench", "--duration", "0.2", "--no-figures") == 0
    assert (a / "pi_bench.csv").read_bytes() == (b / "pi_bench.csv").read_bytes()
    assert (a / "pi_bench_summary.json").read_bytes() == (b / "pi_bench_summary.json").read_bytes()


def test_cli_writes_figures(tmp_path):
    assert run_cli(tmp_path, "stability") == 0
    assert list(tmp_path.glob("popov_*.png")) and list(tmp_path.glob("popov_*.csv"))
    summary = json.loads((tmp_path / "stability_summary.json").read_text())
    assert all(rep["certified"] for rep in summary["results"].values())


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[knee]\nstiffness = 3\n")
    assert run_cli(tmp_path, "stability", "--config", str(cfg)) == 2
    assert "unknown key" in capsys.readouterr().err


def test_cli_strict_stability_fails_uncertified(tmp_path):
    cfg = tmp_path / "stiff.toml"
    cfg.write_text('[[schedules]]\nmode = "linear"\nK_vs1 = 40000.0\nK_vs2 = 0.0\n'
                   'K_d1 = 50.0\nK_d2 = 0.0\n')
    assert run_cli(tmp_path, "stability", "--config", str(cfg), "--no-figures") == 0
    assert run_cli(tmp_path, "stability", "--config", str(cfg), "--no-figures",
                   "--strict") == 1


def test_summary_handles_non_finite(tmp_path):
    path = cli.write_summary(tmp_path / "s.json", {"x": math.inf, "y": np.float64(2.0)})
    assert json.loads(path.read_text()) == {"x": "inf", "y": 2.0}


def test_slug():
    assert cli.slug("linear K_vs=1000 K_d=50") == "linear-k-vs-1000-k-d-50"
