"""The bench experiments: torque-loop bench, spring characterisation, radial
tracking and impact mitigation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..control import (ControllerConfig, GainSchedule, PiGains, PiState, pi_torque_step,
                       stiffness_schedule)
from ..kinematics import LegGeometry, WorkspaceError
from ..leg import KneeLimits, LinkMasses, Probe
from ..plant import GroundModel, PlantParams, step as plant_step, PlantState
from ..trajectory import (CpgTrajectory, _check_radius, GaitParams, RadialSinusoid, ReferenceSample,
                          impulse_profile)
from .sim import build_loop, settle_index, static_sag
from .trace import Trace

HIP_DEFAULT = PlantParams(J_m=0.01, B_m=0.05, J_l=0.012, B_l=0.05, tau_cfm=0.15, tau_cfl=0.05,
                          rigid_coupling=True)
KNEE_DEFAULT = PlantParams()


@dataclass
class Scenario:
    """Everything needed to run one experiment family."""
    name: str = "default"
    hip: PlantParams = HIP_DEFAULT
    knee: PlantParams = KNEE_DEFAULT
    geometry: LegGeometry = LegGeometry()
    links: LinkMasses = LinkMasses()
    ground: GroundModel = GroundModel()
    knee_limits: KneeLimits = KneeLimits()
    gains: PiGains = PiGains()
    controller: ControllerConfig = ControllerConfig()
    schedules: list = field(default_factory=lambda: [GainSchedule()])
    dt: float = 2e-5
    duration: float = 3.0
    body_mass_share: float = 3.75
    stance_radius: float = 0.27

    def loop(self, sched: GainSchedule, **kwargs):
        return build_loop(self.hip, self.knee, self.geometry, sched, self.gains,
                          self.controller, self.links, self.ground,
                          knee_limits=self.knee_limits, dt=self.dt, **kwargs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schedules"] = [asdict(s) for s in self.schedules]
        return out


def _hold_reference(x) -> callable:
    x = np.asarray(x, dtype=float)

    def ref(t):
        return ReferenceSample(x.copy(), np.zeros(2), np.zeros(2), np.zeros(2), "stance")

    return ref


# -- torque-loop bench -----------------------------------------------------

@dataclass
class PiBenchResult:
    amplitude_ratio: float
    phase_lag_deg: float
    dc_error: float
    saturated: bool
    trace: Trace


def _sine_fit(t, y, freq):
    """Least-squares ``(amplitude, phase, offset)`` of ``y`` at ``freq``."""
    w = 2.0 * math.pi * freq
    A = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    (s, c, m), *_ = np.linalg.lstsq(A, y, rcond=None)
    return math.hypot(s, c), math.atan2(c, s), m


def run_pi_bench(scenario: Scenario, amplitude: float = 10.0, freq: float = 5.0,
                 offset: float = 0.0, duration: float = 1.0) -> PiBenchResult:
    """Drive the locked knee with a sinusoidal torque reference.

    The output torque is the wire torque on the locked load.  The ratio and
    lag come from a least-squares sine fit over the last half of the run.
    """
    knee = scenario.knee
    gains = scenario.gains
    inner_dt = 1.0 / gains.rate_hz
    n_sub = int(round(inner_dt / scenario.dt))
    st = PiState()
    x = PlantState()
    tau_out = 0.0
    trace = Trace(("t", "tau_ref", "tau_out", "tau_l", "saturated"))
    saturated = False
    for k in range(int(round(duration * gains.rate_hz))):
        t = k * inner_dt
        tau_ref = offset + amplitude * math.sin(2.0 * math.pi * freq * t)
        tau_out = pi_torque_step(tau_ref, tau_out / knee.K_I, gains, st, knee)
        saturated = saturated or st.saturated
        trace.append({"t": t, "tau_ref": tau_ref, "tau_out": tau_out, "tau_l": x.tau_l,
                      "saturated": float(st.saturated)})
        x = plant_step(x, tau_out, 0.0, knee, scenario.dt, n_sub, load_locked=True)
    t = trace["t"]
    late = t >= duration / 2
    if amplitude > 0:
        a_ref, p_ref, _ = _sine_fit(t[late], trace["tau_ref"][late], freq)
        a_out, p_out, _ = _sine_fit(t[late], trace["tau_l"][late], freq)
        ratio = a_out / a_ref
        lag = math.degrees((p_ref - p_out + math.pi) % (2.0 * math.pi) - math.pi)
    else:
        ratio, lag = 1.0, 0.0
    tail = t >= duration - 0.1
    dc = float(np.mean(trace["tau_l"][tail] - trace["tau_ref"][tail])) if amplitude == 0 else 0.0
    return PiBenchResult(ratio, lag, dc, saturated, trace)


# -- spring characterisation ------------------------------------------------

@dataclass
class SpringPoint:
    deflection: float
    force: float
    expected: float


@dataclass
class SpringTable:
    schedule: GainSchedule
    points: list
    skipped: list
    slope: float
    trace: Trace

    @property
    def max_relative_error(self) -> float:
        errs = [abs(p.force - p.expected) / abs(p.expected) for p in self.points
                if p.expected != 0.0]
        return max(errs) if errs else 0.0


def expected_spring_force(deflection: float, sched: GainSchedule) -> float:
    """Radial restoring force of the commanded virtual spring (N, outward +)."""
    return stiffness_schedule(deflection, sched) * deflection


def run_spring_characterization(scenario: Scenario, sched: GainSchedule, deflections,
                                speed: float = 0.01, margin: float = 0.01,
                                settle: float = 0.3) -> SpringTable:
    """Force-deflection table of the virtual spring from a slow probe sweep.

    A stiff probe pins the foot and its anchor is swept along the leg ray,
    compressing then extending the leg at constant ``speed`` (m/s) over
    ``max|deflection| + margin`` each way.  At each requested deflection the
    radial probe force is interpolated on the loading and unloading
    branches and averaged, which cancels the velocity-odd damping and
    friction contributions.  Deflection is the true foot deflection.
    Deflections outside the workspace are skipped and listed.
    """
    geom = scenario.geometry
    r0 = scenario.stance_radius
    u = np.array([0.0, -1.0])
    x0 = r0 * u
    wanted, skipped = [], []
    for delta in deflections:
        try:
            _check_radius(r0 - delta, geom)
            wanted.append(float(delta))
        except WorkspaceError:
            skipped.append(float(delta))
    span = max([abs(d) for d in wanted], default=0.0) + margin
    _check_radius(r0 - span, geom)
    _check_radius(r0 + span, geom)

    # hip held high enough that the ground is never reached
    loop = scenario.loop(sched, body_mode="fixed", body_height=1.0)
    loop.hold(x0)
    body = loop.leg.body_z
    probe = Probe((x0[0], body + x0[1]))
    loop.leg.set_probe(probe)
    ref = _hold_reference(x0)
    trace = Trace()
    loop.run(ref, settle, trace)
    # piecewise-constant anchor motion, one anchor update per control cycle;
    # the first leg only preloads, the two full branches are recorded
    dt = loop.controller.outer_dt
    step = speed * dt
    preload = np.arange(0.0, span, step)
    down = np.arange(span, -span, -step)
    up = np.arange(-span, span + 0.5 * step, step)
    path = np.concatenate([preload, down, up])
    direction = np.concatenate([np.zeros(len(preload)), -np.ones(len(down)), np.ones(len(up))])
    defl, force = [], []
    for delta, sgn in zip(path, direction):
        anchor = x0 - delta * u
        probe.anchor = (anchor[0], body + anchor[1])
        probe.velocity = tuple(-(sgn if sgn else 1.0) * speed * u)
        loop.leg.set_probe(probe)
        loop.run(ref, dt, trace)
        foot, _ = loop.leg.foot_true()
        Fx, Fz, _ = loop.leg.foot_forces()
        r = float(np.hypot(*foot))
        # the leg pushes the foot outward against the probe force
        defl.append(r0 - r)
        force.append(-float(np.array([Fx, Fz]) @ foot) / r)
    defl = np.array(defl)
    force = np.array(force)
    points = []
    for delta in wanted:
        branch = []
        for sgn in (1.0, -1.0):
            m = direction == sgn
            order = np.argsort(defl[m])
            branch.append(np.interp(delta, defl[m][order], force[m][order]))
        points.append(SpringPoint(delta, 0.5 * (branch[0] + branch[1]),
                                  expected_spring_force(delta, sched)))
    d = np.array([p.deflection for p in points])
    f = np.array([p.force for p in points])
    slope = float(d @ f / (d @ d)) if len(points) and d @ d > 0 else float("nan")
    return SpringTable(sched, points, skipped, slope, trace)


# -- radial tracking ---------------------------------------------------------

@dataclass
class TrackingResult:
    schedule: GainSchedule
    peak_error: float
    rms_error: float
    trace: Trace


def run_tracking_experiment(scenario: Scenario, amplitude: float = 0.03, freq: float = 2.0,
                            center: float = 0.27, settle: float = 1.0) -> list:
    """Suspended leg following a radial sinusoid under each schedule."""
    if not scenario.duration > settle:
        raise ValueError(f"duration {scenario.duration:g} s must exceed the settle time "
                         f"{settle:g} s")
    results = []
    for sched in scenario.schedules:
        loop = scenario.loop(sched, body_mode="fixed", body_height=1.0)
        ref = RadialSinusoid(amplitude, freq, center, scenario.geometry)
        loop.hold(ref(0.0).x_des)
        trace = loop.run(ref, scenario.duration)
        late = trace["t"] >= settle
        err = (trace["radial_des"] - trace["radial"])[late]
        results.append(TrackingResult(sched, float(np.max(np.abs(err))),
                                      float(np.sqrt(np.mean(err**2))), trace))
    return results


def run_swing_experiment(scenario: Scenario, gait: GaitParams = GaitParams()) -> Trace:
    """Suspended leg following the periodic foot path, clear of the ground."""
    sched = scenario.schedules[0]
    loop = scenario.loop(sched, body_mode="fixed", body_height=1.0)
    ref = CpgTrajectory(gait, scenario.geometry)
    loop.hold(ref(0.0).x_des)
    return loop.run(ref, scenario.duration)


# -- impact mitigation --------------------------------------------------------

@dataclass
class ImpactReport:
    schedule: str
    impulse: float
    flight: bool
    impact_time: float
    peak_knee_load: float
    mean_knee_load: float
    max_com_deviation: float
    steady_com_error: float
    settle_time: float

    METRICS = ("peak_knee_load", "mean_knee_load", "max_com_deviation",
               "steady_com_error", "settle_time")

    def metrics(self) -> dict:
        return {k: getattr(self, k) for k in self.METRICS}


@dataclass(frozen=True)
class ImpactSettings:
    impulses: tuple = (200.0, 500.0, 800.0)
    pulse_duration: float = 0.2
    pulse_shape: str = "half-sine"
    force_share: float = 0.25
    push_time: float = 0.5
    load_window: float = 0.5
    steady_window: float = 0.3
    settle_band: float = 0.05


def impact_schedules() -> list:
    """The four linear corner cases and the nonlinear schedule."""
    return [
        GainSchedule.linear(1000.0, 50.0),
        GainSchedule.linear(1000.0, 150.0),
        GainSchedule.linear(500.0, 50.0),
        GainSchedule.linear(500.0, 150.0),
        GainSchedule(),
    ]


def _impact_start(t, grf, t_push):
    after = t >= t_push
    air = np.flatnonzero(after & (grf <= 0.0))
    if air.size == 0:
        return None
    touch = np.flatnonzero((np.arange(len(t)) > air[0]) & (grf > 0.0))
    return int(touch[0]) if touch.size else None


def impact_metrics(trace: Trace, sched_label: str, impulse: float, settings: ImpactSettings,
                   z_nominal: float) -> ImpactReport:
    t = trace["t"]
    z = trace["com_height"]
    tau = np.abs(trace["tau_l_knee"])
    i0 = _impact_start(t, trace["ground_force"], settings.push_time)
    flight = i0 is not None
    if not flight:
        i0 = int(np.searchsorted(t, settings.push_time))
    t0 = t[i0]
    win = (t >= t0) & (t < t0 + settings.load_window)
    after = t >= t0
    dev = np.abs(z - z_nominal)
    steady = t >= t[-1] - settings.steady_window
    z_ss = float(np.mean(z[steady]))
    swing = np.abs(z[after] - z_ss)
    band = settings.settle_band * float(np.max(swing)) if swing.size else 0.0
    settle = 0.0
    if band > 0:
        j = settle_index(z[after], z_ss, band)
        if j > 0:
            zs = z[after] - z_ss
            ta = t[after]
            # linear interpolation of the last band crossing
            k = j - 1
            if k + 1 < len(zs):
                a0 = abs(zs[k]) - band
                a1 = abs(zs[k + 1]) - band
                frac = a0 / (a0 - a1) if a0 != a1 else 0.0
                settle = float(ta[k] + frac * (ta[k + 1] - ta[k]) - t0)
            else:
                settle = float(ta[-1] - t0)
    return ImpactReport(
        schedule=sched_label, impulse=impulse, flight=flight, impact_time=float(t0),
        peak_knee_load=float(np.max(tau[win])), mean_knee_load=float(np.mean(tau[win])),
        max_com_deviation=float(np.max(dev[after])),
        steady_com_error=float(np.mean(dev[steady])),
        settle_time=settle,
    )


def run_impact_case(scenario: Scenario, sched: GainSchedule, impulse: float,
                    settings: ImpactSettings = ImpactSettings()):
    """One drop: stand, push off through the feed-forward, land, recover."""
    r0 = scenario.stance_radius
    loop = scenario.loop(sched, body_mode="free", body_mass=scenario.body_mass_share)
    weight = scenario.body_mass_share * scenario.links.gravity
    sag = static_sag(sched, weight)
    ground = scenario.ground
    # start in static equilibrium: spring carries the body, ground carries it too
    z_body = ground.ground_height + r0 - sag - weight / ground.k_g
    loop.hold(np.array([0.0, -(r0 - sag)]), body_z=z_body, phase="stance")
    ref = _hold_reference((0.0, -r0))
    peak = impulse * settings.force_share

    def push(t):
        if peak <= 0:
            return 0.0
        return impulse_profile(t - settings.push_time, peak, settings.pulse_duration,
                               settings.pulse_shape)

    trace = loop.run(ref, scenario.duration, push=push)
    report = impact_metrics(trace, sched.label, impulse, settings,
                            ground.ground_height + r0)
    return report, trace


def run_impact_experiment(scenario: Scenario, settings: ImpactSettings = ImpactSettings(),
                          impulses=None):
    """Every schedule against every impulse; returns ``(reports, traces)``."""
    reports, traces = [], {}
    for impulse in (settings.impulses if impulses is None else impulses):
        for sched in scenario.schedules:
            report, trace = run_impact_case(scenario, sched, impulse, settings)
            reports.append(report)
            traces[(impulse, sched.label)] = trace
    return reports, traces
