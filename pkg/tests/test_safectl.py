import math

import numpy as np
import pytest

from rsi_certify import dynamics as dyn
from rsi_certify import safectl as sc
from rsi_certify.errors import InfeasibleBox, NoStaticCapPossible


def config(I_bar=10.0, kappa=1.0, Delta=0.1, tau_bar=0.0, L_h=0.0,
           eps_I=0.0, r_u=(math.inf,), u_box=((0.0, 1.0),),
           slack_weight=1e6):
    return sc.ControlConfig(I_bar=I_bar, kappa=kappa, Delta=Delta,
                            tau_bar=tau_bar, L_h=L_h, eps_I=eps_I,
                            r_u=r_u, u_box=u_box, slack_weight=slack_weight)


# ---------------------------------------------------------------------------
# barrier residuals


def test_barrier_residual_boundary_neutrality():
    cfg = config()
    res = sc.barrier_residual(10.0, cfg, F_hat=0.0)
    assert res.residual == 0.0
    assert not res.violation


def test_barrier_residual_violation_on_boundary():
    res = sc.barrier_residual(10.0, config(), F_hat=1.0)
    assert res.residual == 1.0
    assert res.violation


def test_barrier_residual_interior_informational():
    # I below the ceiling: positive residual is informational, not a
    # violation (the interior allows positive growth budget)
    res = sc.barrier_residual(9.0, config(kappa=2.0), F_hat=-1.0)
    assert res.residual == pytest.approx(1.0)  # -1 - 2*(-1)
    assert not res.violation
    assert res.informational


def test_robust_residual_addition():
    assert sc.robust_residual(-0.5, 0.0, 0.0) == -0.5
    assert sc.robust_residual(-0.5, 0.2, 0.1) == pytest.approx(-0.2)
    assert sc.robust_residual(-0.1, 0.2, 0.1) == pytest.approx(0.2)


def test_config_rejects_overshooting_gain():
    with pytest.raises(ValueError):
        config(kappa=20.0, Delta=0.1)


def test_nonlinear_class_k_callback():
    cubic = lambda r: 2.0 * r + 0.1 * r ** 3
    cfg = sc.ControlConfig(I_bar=10.0, kappa=2.0, Delta=0.1, alpha_fn=cubic)
    # residual uses the callback: F_hat - alpha(h)
    res = sc.barrier_residual(9.0, cfg, F_hat=0.0)
    assert res.residual == pytest.approx(-cubic(-1.0))
    # interior budget is -alpha(h): positive inside, zero at the boundary
    assert sc.barrier_budget(9.0, cfg) == pytest.approx(-cubic(-1.0))
    assert sc.barrier_budget(10.0, cfg) == 0.0
    with pytest.raises(ValueError):
        sc.ControlConfig(I_bar=1.0, kappa=1.0, Delta=0.1,
                         alpha_fn=lambda r: r + 1.0)  # alpha(0) != 0


# ---------------------------------------------------------------------------
# QP: closed forms and grid-search oracle


def grid_search_1d(u_ref, a, b, lo, hi, rho, n=4_000_001):
    """Dense oracle for the 1-D program."""
    u = np.linspace(lo, hi, n)
    z = np.maximum(0.0, a * u - b)
    obj = 0.5 * (u - u_ref) ** 2 + rho * z ** 2
    k = int(np.argmin(obj))
    return float(u[k]), float(z[k])


def test_qp_unconstrained_reference_feasible():
    cfg = config()
    res = sc.qp_step([0.5], [0.5], [1.0], b_rhs=10.0, config=cfg)
    assert res.u_star[0] == pytest.approx(0.5)
    assert res.slack == 0.0
    assert not res.barrier_active


def test_qp_hard_clamp_high_penalty():
    # 1-D KKT closed form: rho -> inf forces u -> b/a = 0
    cfg = config(u_box=((-1.0, 1.0),), slack_weight=1e9)
    res = sc.qp_step([1.0], [0.0], [1.0], b_rhs=0.0, config=cfg)
    assert res.u_star[0] == pytest.approx(0.0, abs=1e-8)
    assert res.slack == pytest.approx(0.0, abs=1e-8)


def test_qp_finite_penalty_splits_between_u_and_slack():
    # KKT: lam = (u_ref - b) / (a^2 + 1/(2 rho)) = 1 / 1.5, u = 1 - lam
    cfg = config(u_box=((-1.0, 1.0),), slack_weight=1.0)
    res = sc.qp_step([1.0], [0.0], [1.0], b_rhs=0.0, config=cfg)
    assert res.u_star[0] == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert res.slack == pytest.approx(1.0 / 3.0, abs=1e-9)
    u_o, z_o = grid_search_1d(1.0, 1.0, 0.0, -1.0, 1.0, 1.0)
    assert res.u_star[0] == pytest.approx(u_o, abs=1e-6)


def test_qp_matches_grid_search_1d_fixtures():
    fixtures = [
        dict(u_ref=1.0, a=1.0, b=0.0, lo=-1.0, hi=1.0, rho=1.0),
        dict(u_ref=0.9, a=2.0, b=0.5, lo=0.0, hi=1.0, rho=10.0),
        dict(u_ref=-0.4, a=-1.5, b=0.3, lo=-1.0, hi=1.0, rho=5.0),
        dict(u_ref=0.2, a=0.7, b=-0.1, lo=0.0, hi=0.6, rho=100.0),
        dict(u_ref=1.0, a=1.0, b=2.0, lo=0.0, hi=1.0, rho=1.0),
    ]
    for f in fixtures:
        cfg = config(u_box=((f["lo"], f["hi"]),), slack_weight=f["rho"])
        res = sc.qp_step([f["u_ref"]], [0.5 * (f["lo"] + f["hi"])],
                         [f["a"]], f["b"], cfg)
        u_o, _ = grid_search_1d(f["u_ref"], f["a"], f["b"], f["lo"],
                                f["hi"], f["rho"])
        assert res.u_star[0] == pytest.approx(u_o, abs=1e-6), f
        # exact feasibility of hard constraints
        assert f["lo"] - 1e-12 <= res.u_star[0] <= f["hi"] + 1e-12
        assert f["a"] * res.u_star[0] <= f["b"] + res.slack + 1e-9


def test_qp_matches_grid_search_2d():
    rng = np.random.default_rng(17)
    for trial in range(8):
        u_ref = rng.uniform(-1, 1, 2)
        a = rng.uniform(-2, 2, 2)
        b = rng.uniform(-0.5, 0.5)
        rho = float(rng.uniform(0.5, 50))
        cfg = config(u_box=((-1.0, 1.0), (-1.0, 1.0)),
                     r_u=(math.inf, math.inf), slack_weight=rho)
        res = sc.qp_step(u_ref, [0.0, 0.0], a, b, cfg)
        # dense 2-D oracle
        grid = np.linspace(-1, 1, 1001)
        U1, U2 = np.meshgrid(grid, grid, indexing="ij")
        Z = np.maximum(0.0, a[0] * U1 + a[1] * U2 - b)
        obj = 0.5 * ((U1 - u_ref[0]) ** 2 + (U2 - u_ref[1]) ** 2) \
            + rho * Z ** 2
        k = np.unravel_index(np.argmin(obj), obj.shape)
        best = obj[k]
        z_res = max(0.0, a @ res.u_star - b)
        obj_res = 0.5 * float((res.u_star - u_ref) @ (res.u_star - u_ref)) \
            + rho * z_res ** 2
        # the analytic optimum can only be at least as good as the grid
        assert obj_res <= best + 1e-6, (trial, res, best)
        assert abs(res.u_star[0] - grid[k[0]]) < 5e-3
        assert abs(res.u_star[1] - grid[k[1]]) < 5e-3


def test_qp_rate_limits_hard():
    cfg = config(r_u=(0.5,), u_box=((0.0, 1.0),), Delta=0.1)
    # rate window is u_prev +- 0.05
    res = sc.qp_step([1.0], [0.2], [1.0], b_rhs=10.0, config=cfg)
    assert res.u_star[0] == pytest.approx(0.25)
    res2 = sc.qp_step([0.0], [0.2], [1.0], b_rhs=10.0, config=cfg)
    assert res2.u_star[0] == pytest.approx(0.15)


def test_qp_infeasible_box():
    cfg = config(r_u=(0.1,), u_box=((0.8, 1.0),), Delta=0.1)
    with pytest.raises(InfeasibleBox):
        sc.qp_step([0.9], [0.0], [1.0], b_rhs=1.0, config=cfg)


# ---------------------------------------------------------------------------
# observer


def test_observer_full_correction():
    cfg = config(Delta=1e-12)
    state = sc.ObserverState(3.0)
    out = sc.observer_update(state, 1.0, lambda s: 1.0, (5.0, 0.0, 1.0), cfg)
    assert out.I_hat == pytest.approx(5.0, abs=1e-9)


def test_observer_pure_prediction():
    cfg = config(Delta=0.5)
    out = sc.observer_update(sc.ObserverState(2.0), 3.0, lambda s: 2.0,
                             None, cfg)
    assert out.I_hat == pytest.approx(2.0 + 0.5 * 2.0 * 3.0)


def test_observer_blended_update():
    cfg = config(Delta=0.1)
    out = sc.observer_update(sc.ObserverState(1.0), 2.0, lambda s: 1.0,
                             (1.5, 0.0, 0.5), cfg)
    assert out.I_hat == pytest.approx(1.45)


def test_observer_tracks_model_consistent_run():
    # full-confidence benchmarks each step zero the error at correction
    # time; what remains is the one-step prediction mismatch, O(Delta^2)
    cfg = config(I_bar=100.0, kappa=1.0, Delta=0.05)
    phi = dyn.PhiSpec.power(1.0, c=0.5)
    I = 1.0
    obs = sc.ObserverState(I)
    worst = 0.0
    for _ in range(40):
        obs = sc.observer_update(obs, 1.0, phi, (I, 0.0, 1.0), cfg)
        I = sc._plant_advance(phi, 1.0, 1.0, I, cfg.Delta)
        worst = max(worst, abs(obs.I_hat - I) / I)
    # Euler-vs-exact one-step gap for dI = 0.5 I: (Delta*0.5)^2/2 relative
    assert worst <= (cfg.Delta * 0.5) ** 2


def test_observer_zero_interval_correction_is_exact():
    # with a zero-length prediction interval and unit confidence the
    # estimate lands exactly on the benchmark
    cfg = config(Delta=1e-300)
    out = sc.observer_update(sc.ObserverState(7.0), 5.0, lambda s: 3.0,
                             (2.5, 0.0, 1.0), cfg)
    assert out.I_hat == pytest.approx(2.5, abs=1e-12)


# ---------------------------------------------------------------------------
# throttle certificates


def test_throttle_cap_sublinear_certified():
    cert = sc.throttle_cap(dyn.PhiSpec.power(0.8), requested_cap=10.0)
    assert cert.phi_bar == 10.0
    assert cert.osgood.divergent


def test_throttle_cap_superlinear_impossible():
    with pytest.raises(NoStaticCapPossible):
        sc.throttle_cap(dyn.PhiSpec.power(1.2))


def test_throttle_cap_linear_notes_exponential():
    cert = sc.throttle_cap(dyn.PhiSpec.power(1.0), requested_cap=2.0)
    assert "exponential" in cert.note
    # comparison solution oracle: growth under the cap is exp(phi_bar * t)
    res = dyn.integrate(dyn.envelope_rhs(dyn.PhiSpec.power(1.0), 2.0), 1.0,
                        horizon=3.0, blowup_threshold=1e9, rtol=1e-10)
    assert res.I[-1] == pytest.approx(math.exp(6.0), rel=1e-7)


# ---------------------------------------------------------------------------
# closed-loop supervision


def supercritical_grid():
    grid = []
    for p in (1.2, 1.5, 2.0, 3.0):
        for kappa, I_bar, I0 in ((1.0, 10.0, 1.0), (2.0, 5.0, 0.5),
                                 (0.5, 20.0, 2.0), (4.0, 8.0, 1.0),
                                 (1.0, 3.0, 0.2)):
            grid.append((p, kappa, I_bar, I0))
    return grid


def safe_period(p, kappa, I_bar, I0):
    # the sampler must beat the within-step escape of the throttled plant:
    # from state I at the full budget, the zero-order-hold comparison ODE
    # escapes no sooner than I / (kappa (I_bar - I)(p-1)), worst near I0
    escape = I0 / (kappa * I_bar * (p - 1.0))
    return min(0.1 / kappa, 0.2 * escape)


def test_closed_loop_invariance_exact_state():
    # 20 supercritical plants: I(t_k) <= I_bar at every sample, zero slack
    # (a stiff slack penalty makes the feasibility relaxation inert)
    assert len(supercritical_grid()) == 20
    for p, kappa, I_bar, I0 in supercritical_grid():
        cfg = config(I_bar=I_bar, kappa=kappa,
                     Delta=safe_period(p, kappa, I_bar, I0),
                     u_box=((0.0, 1.0),), slack_weight=1e14)
        scenario = sc.PlantScenario(phi=dyn.PhiSpec.power(p, c=2.0), I0=I0,
                                    n_steps=400, u_ref=1.0)
        log = sc.supervise(scenario, cfg)
        assert log.final_status == "completed"
        assert log.max_overshoot <= 1e-9, (p, kappa, I_bar, I0)
        assert all(s.slack <= 1e-9 for s in log.steps), (p, kappa)
        assert all(a == "certify" for a in log.actions())


def test_closed_loop_estimation_error_and_latency_margin():
    # bounded estimation error and actuation latency stay within the
    # documented per-step violation margin kappa*eps_I + L_h*tau_bar
    for p in (1.5, 2.0):
        phi = dyn.PhiSpec.power(p, c=2.0)
        kappa, I_bar, I0 = 1.0, 10.0, 1.0
        eps_i, tau = 0.05, 0.02
        # L_h bounds the drift of the applied rate over the delay window:
        # max Phi'(I)*rate over the operating set [0, I_bar]
        rate_max = phi(I_bar) * 1.0
        lh = 2.0 * p * I_bar ** (p - 1) * rate_max
        cfg = config(I_bar=I_bar, kappa=kappa, Delta=0.1, tau_bar=tau,
                     L_h=lh, eps_I=eps_i)
        scenario = sc.PlantScenario(phi=phi, I0=I0, n_steps=300, u_ref=1.0,
                                    state_error=eps_i, latency=tau)
        log = sc.supervise(scenario, cfg)
        margin = kappa * eps_i + lh * tau
        assert log.max_violation_rate <= margin + 1e-9, (p, log.max_violation_rate, margin)
        assert log.max_overshoot <= eps_i + lh * tau / kappa + 1e-9


def test_supervisor_escalates_on_persistent_slack():
    # start above the ceiling: budget negative, throttle floors at zero,
    # slack stays positive -> escalation after 3 consecutive steps
    cfg = config(I_bar=1.0, kappa=1.0, Delta=0.1)
    scenario = sc.PlantScenario(phi=dyn.PhiSpec.power(1.5, c=1.0), I0=2.0,
                                n_steps=10, u_ref=1.0)
    log = sc.supervise(scenario, cfg)
    acts = log.actions()
    assert acts[0] == "certify"  # one slack step is not yet persistent
    assert "escalate" in acts
    first = acts.index("escalate")
    assert first == 2  # third consecutive slack step


def test_supervisor_escalates_on_governance_threshold():
    cfg = config(I_bar=100.0, kappa=1.0, Delta=0.1)
    scenario = sc.PlantScenario(phi=dyn.PhiSpec.power(0.8), I0=1.0,
                                n_steps=5, u_ref=0.1, ptot_hat=0.95)
    log = sc.supervise(scenario, cfg,
                       sc.PolicyThresholds(governance_delta=0.1))
    assert all(a == "escalate" for a in log.actions())


def test_supervisor_shutdown_on_antagonism():
    cfg = config(I_bar=100.0, kappa=1.0, Delta=0.1)
    scenario = sc.PlantScenario(phi=dyn.PhiSpec.power(1.0, c=0.5), I0=1.0,
                                n_steps=50, u_ref=1.0,
                                antagonism=(0.4, 0.2))
    # budget at I0: phi(1)*0.5... antagonism 0.6 > theta * gain
    log = sc.supervise(scenario, cfg,
                       sc.PolicyThresholds(antagonism_theta=0.5))
    assert log.final_status == "shutdown"
    assert log.actions()[-1] == "shutdown"


def test_supervisor_shutdown_on_lost_divergence():
    cfg = config(I_bar=100.0, kappa=1.0, Delta=0.1)
    scenario = sc.PlantScenario(phi=dyn.PhiSpec.power(0.8), I0=1.0,
                                n_steps=5, u_ref=1.0, osgood_ok=False)
    log = sc.supervise(scenario, cfg)
    assert log.final_status == "shutdown"
    assert len(log.steps) == 1


def test_subcritical_plant_under_cap_all_certify():
    # sublinear plant far from the ceiling: comparison solution bounds the
    # trajectory and no intervention triggers
    phi = dyn.PhiSpec.power(0.8)
    cfg = config(I_bar=1e5, kappa=1.0, Delta=0.1)
    scenario = sc.PlantScenario(phi=phi, I0=1.0, n_steps=200, u_ref=1.0)
    log = sc.supervise(scenario, cfg)
    assert all(a == "certify" for a in log.actions())
    # oracle: closed form of dI = I^0.8 (exponent 0.2 comparison solution)
    T = 200 * cfg.Delta
    bound = (1.0 + 0.2 * T) ** 5.0
    assert log.steps[-1].I_true <= bound * (1 + 1e-6)


def test_supervision_log_jsonl_roundtrip(tmp_path):
    cfg = config(I_bar=5.0, kappa=1.0, Delta=0.1)
    scenario = sc.PlantScenario(phi=dyn.PhiSpec.power(1.5), I0=1.0,
                                n_steps=20, u_ref=1.0)
    log = sc.supervise(scenario, cfg)
    path = tmp_path / "run.jsonl"
    log.write_jsonl(path)
    import json
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == 20
    assert {"k", "t", "I_true", "I_hat", "u", "slack", "action",
            "budget", "violation_rate"} <= set(lines[0])
