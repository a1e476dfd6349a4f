"""Sampled-data barrier-certificate throttling.

The safety set is {I <= I_bar} with barrier coordinate h = I - I_bar.  Each
sample period a small dense quadratic program filters the requested
actuation so the predicted improvement rate respects the barrier budget,
with explicit margins for worst-case actuation latency (L_h * tau_bar) and
antagonistic residuals; a penalized slack keeps the program feasible and
doubles as the escalation signal.  An observer propagates the capability
estimate between benchmark evaluations, and a supervisor runs the closed
loop against a simulated plant, certifying, escalating, or shutting down
per the governance thresholds.

Orientation note: the reported barrier residual is F_hat - kappa*(I - I_bar)
and a positive value at or above the boundary is a violation; below the
boundary the sign flips to an allowance, so the enforced interior budget is
kappa*(I_bar - I), which shrinks to zero exactly at the boundary.  Both
orientations agree where it matters (rate <= 0 on the boundary).  With
exact state and kappa*Delta <= 1 the discrete loop keeps I(t_k) <= I_bar;
with estimation error bounded by eps_I and latency tau_bar the per-step
budget violation never exceeds kappa*eps_I + L_h*tau_bar.

Sampling caveat: the guarantees assume the barrier rate is Lipschitz on the
operating set over one period.  A zero-order-hold command on a strongly
superlinear plant can escape within a single period if Delta exceeds
roughly I/(kappa*(I_bar - I)*(p - 1)) at the current state; pick the sample
period below that scale (it is most restrictive when the state is small).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .errors import InfeasibleBox, NoStaticCapPossible


@dataclass(frozen=True)
class ControlConfig:
    """Barrier and actuation parameters for the sampled-data loop.

    ``alpha_fn`` optionally replaces the linear barrier gain with any
    strictly increasing function through zero (extended class-K); the
    linear default alpha(r) = kappa*r is what the robustness analysis
    assumes, so nonlinear choices are for experimentation.
    """

    I_bar: float                     # capability ceiling (nats)
    kappa: float                     # linear barrier gain, alpha(r) = kappa*r
    Delta: float                     # sample period (s)
    tau_bar: float = 0.0             # worst-case actuation latency (s)
    L_h: float = 0.0                 # Lipschitz bound on the barrier rate
    eps_I: float = 0.0               # certified state-estimation error (nats)
    r_u: tuple[float, ...] = (math.inf,)   # per-channel actuation rate limit
    u_box: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    slack_weight: float = 1e6        # rho_s, penalty on the barrier slack
    alpha_fn: object = None          # optional monotone class-K callback

    def __post_init__(self):
        if self.Delta <= 0:
            raise ValueError("Delta must be positive")
        if self.tau_bar < 0:
            raise ValueError("tau_bar must be nonnegative")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.slack_weight <= 0:
            raise ValueError("slack_weight must be positive")
        if len(self.r_u) != len(self.u_box):
            raise ValueError("r_u and u_box must have matching channel counts")
        for lo, hi in self.u_box:
            if lo > hi:
                raise ValueError(f"u_box interval ({lo}, {hi}) not ordered")
        if self.alpha_fn is not None:
            if abs(self.alpha_fn(0.0)) > 1e-12:
                raise ValueError("alpha_fn must vanish at zero")
            if self.alpha_fn(1.0) <= self.alpha_fn(-1.0):
                raise ValueError("alpha_fn must be strictly increasing")
        elif self.kappa * self.Delta > 1.0 + 1e-12:
            raise ValueError(
                f"kappa*Delta = {self.kappa * self.Delta:.3g} exceeds 1; the "
                "discrete barrier update would overshoot the boundary")

    def alpha(self, r: float) -> float:
        """Barrier gain function: the configured callback or kappa * r."""
        if self.alpha_fn is not None:
            return float(self.alpha_fn(r))
        return self.kappa * r

    @property
    def n_channels(self) -> int:
        return len(self.u_box)


@dataclass(frozen=True)
class ObserverState:
    """Capability estimate with the most recent benchmark correction."""

    I_hat: float
    last_benchmark: tuple[float, float, float] | None = None  # (value, age, K)

    def __post_init__(self):
        if not math.isfinite(self.I_hat):
            raise ValueError("I_hat must be finite")
        if self.last_benchmark is not None:
            k = self.last_benchmark[2]
            if not 0.0 <= k <= 1.0:
                raise ValueError("benchmark confidence must lie in [0, 1]")


# ---------------------------------------------------------------------------
# barrier residuals


@dataclass(frozen=True)
class BarrierResidual:
    residual: float
    h: float
    violation: bool        # positive residual at or above the boundary
    informational: bool    # positive residual strictly inside the set


def barrier_residual(I: float, config: ControlConfig,
                     F_hat: float) -> BarrierResidual:
    """Residual F_hat - alpha(I - I_bar) of the barrier inequality.

    At or above the boundary a positive residual flags a genuine violation;
    strictly inside the set the same arithmetic yields a positive number
    whenever the predicted rate is below the (positive) interior allowance,
    so it is reported as informational only.
    """
    h = I - config.I_bar
    residual = F_hat - config.alpha(h)
    above = h >= 0.0
    positive = residual > 0.0
    return BarrierResidual(residual, h, positive and above,
                           positive and not above)


def robust_residual(base: float, sigma_I: float, sigma_x: float) -> float:
    """Tighten a barrier residual by the antagonistic sector bounds
    (|h'| = 1 for the linear barrier coordinate)."""
    if sigma_I < 0 or sigma_x < 0:
        raise ValueError("sector bounds must be nonnegative")
    return base + sigma_I + sigma_x


def barrier_budget(I_hat: float, config: ControlConfig,
                   sigma_I: float = 0.0, sigma_x: float = 0.0,
                   use_estimation_margin: bool = True) -> float:
    """Interior rate budget -alpha(I_hat - I_bar) less the latency,
    estimation, and antagonism margins.  May be negative near or above the
    boundary, in which case the QP throttles to the box floor and takes
    slack."""
    budget = -config.alpha(I_hat - config.I_bar)
    budget -= config.L_h * config.tau_bar
    if use_estimation_margin:
        budget -= config.eps_I
    budget -= sigma_I + sigma_x
    return budget


# ---------------------------------------------------------------------------
# dense active-set QP


@dataclass(frozen=True)
class QpResult:
    u_star: np.ndarray
    slack: float
    barrier_active: bool
    objective: float


def _effective_box(u_prev: np.ndarray, config: ControlConfig):
    lo = np.empty(config.n_channels)
    hi = np.empty(config.n_channels)
    for i, (b_lo, b_hi) in enumerate(config.u_box):
        r = config.r_u[i] * config.Delta
        lo[i] = max(b_lo, u_prev[i] - r)
        hi[i] = min(b_hi, u_prev[i] + r)
        if lo[i] > hi[i] + 1e-15:
            raise InfeasibleBox(
                f"channel {i}: box [{b_lo}, {b_hi}] and rate window "
                f"[{u_prev[i] - r}, {u_prev[i] + r}] do not intersect")
    return lo, hi


def qp_step(u_ref, u_prev, a_row, b_rhs: float,
            config: ControlConfig) -> QpResult:
    """Solve min 0.5||u - u_ref||^2 + rho_s*z^2 subject to a.u <= b + z,
    z >= 0, the actuation box, and the per-step rate limits.

    Solved exactly by enumerating box-clamp patterns: with the barrier row
    active at multiplier lam, free channels sit at u_ref - lam*a and the
    slack at lam/(2 rho_s); the multiplier follows from the tight
    constraint.  The KKT point of this convex program is unique, so the
    first consistent pattern is the optimum.
    """
    u_ref = np.asarray(u_ref, dtype=float).ravel()
    u_prev = np.asarray(u_prev, dtype=float).ravel()
    a = np.asarray(a_row, dtype=float).ravel()
    m = config.n_channels
    if not (u_ref.size == u_prev.size == a.size == m):
        raise InfeasibleBox(f"expected {m}-channel vectors")
    lo, hi = _effective_box(u_prev, config)

    def objective(u, z):
        return 0.5 * float((u - u_ref) @ (u - u_ref)) \
            + config.slack_weight * z * z

    # barrier inactive: box projection feasible?
    u_proj = np.clip(u_ref, lo, hi)
    if float(a @ u_proj) <= b_rhs + 1e-12:
        return QpResult(u_proj, 0.0, False, objective(u_proj, 0.0))

    # barrier active: enumerate clamp patterns (free / at-lo / at-hi)
    rho = config.slack_weight
    best = None
    for pattern in itertools.product((0, 1, 2), repeat=m):
        u = np.empty(m)
        free = []
        for i, p in enumerate(pattern):
            if p == 0:
                free.append(i)
            else:
                u[i] = lo[i] if p == 1 else hi[i]
        denom = sum(a[i] * a[i] for i in free) + 1.0 / (2.0 * rho)
        clamped_term = sum(a[i] * u[i] for i in range(m) if i not in free)
        free_ref = sum(a[i] * u_ref[i] for i in free)
        lam = (clamped_term + free_ref - b_rhs) / denom
        if lam <= 1e-15:
            continue  # barrier multiplier must be positive here
        ok = True
        for i in free:
            u[i] = u_ref[i] - lam * a[i]
            if not lo[i] - 1e-12 <= u[i] <= hi[i] + 1e-12:
                ok = False
                break
        if not ok:
            continue
        # KKT sign conditions at the clamped bounds: the bound multiplier
        # (u_ref - lam*a - u) must push outward
        for i, p in enumerate(pattern):
            if p == 1 and u_ref[i] - lam * a[i] > lo[i] + 1e-12:
                ok = False
            elif p == 2 and u_ref[i] - lam * a[i] < hi[i] - 1e-12:
                ok = False
        if not ok:
            continue
        z = lam / (2.0 * rho)
        u = np.clip(u, lo, hi)
        cand = QpResult(u, float(z), True, objective(u, z))
        if best is None or cand.objective < best.objective - 1e-15:
            best = cand
    if best is None:
        # all channels pinned at the floor; slack absorbs the rest
        u = np.where(a > 0, lo, np.where(a < 0, hi, np.clip(u_ref, lo, hi)))
        z = max(0.0, float(a @ u) - b_rhs)
        best = QpResult(u, z, True, objective(u, z))
    return best


# ---------------------------------------------------------------------------
# observer


def observer_update(state: ObserverState, phi_svc_hat: float, Phi,
                    benchmark: tuple[float, float, float] | None,
                    config: ControlConfig,
                    throttle: float = 1.0) -> ObserverState:
    """One prediction-correction step of the capability observer.

    Prediction integrates the envelope rate Phi(I_hat) * phi_svc_hat *
    throttle over the sample period; the correction blends in the latest
    benchmark value with its confidence weight (zero when no benchmark
    arrived this period).
    """
    phi_val = Phi(state.I_hat) if callable(Phi) else float(Phi)
    predicted = state.I_hat + config.Delta * phi_val * phi_svc_hat * throttle
    if benchmark is None:
        return ObserverState(predicted, state.last_benchmark)
    value, age, confidence = benchmark
    corrected = predicted + confidence * (value - state.I_hat)
    return ObserverState(corrected, (value, age, confidence))


# ---------------------------------------------------------------------------
# static throttle certificate


@dataclass(frozen=True)
class ThrottleCertificate:
    phi_bar: float
    osgood: dyn.OsgoodResult
    note: str


def throttle_cap(phi_spec: dyn.PhiSpec, requested_cap: float = 1.0,
                 I0: float | None = None) -> ThrottleCertificate:
    """Certify a constant service cap against the state factor.

    When the reciprocal integral of the state factor diverges, any constant
    cap keeps the closed loop nonsingular (constants cannot change the
    divergence class), so the requested cap is certified.  A convergent
    integral cannot be repaired by any constant cap: NoStaticCapPossible.
    """
    if requested_cap <= 0:
        raise NoStaticCapPossible("requested cap must be positive")
    # divergence class of a power-type factor does not depend on the start
    # point; anchor away from an underflowing domain floor
    start = max(phi_spec.domain_floor, 1.0) if I0 is None \
        else max(I0, phi_spec.domain_floor)
    res = dyn.osgood_classify(phi_spec, start)
    if not res.divergent:
        raise NoStaticCapPossible(
            "state factor has a convergent reciprocal integral "
            f"(value {res.value:.6g}); no constant service cap can restore "
            "divergence")
    note = ("closed-loop growth at most exponential at the cap rate"
            if abs(res.tail_exponent - 1.0) < 1e-9
            else "reciprocal integral divergent under any constant cap")
    return ThrottleCertificate(float(requested_cap), res, note)


# ---------------------------------------------------------------------------
# closed-loop supervisor


@dataclass
class PlantScenario:
    """Simulated control-affine plant dI/dt = Phi(I) * phi_svc * u."""

    phi: dyn.PhiSpec
    I0: float
    phi_svc_true: float = 1.0
    phi_svc_meas: float | None = None     # telemetry value; defaults to true
    n_steps: int = 100
    u_ref: float = 1.0
    state_error: float = 0.0              # |e_k| <= eps amplitude, alternating
    latency: float = 0.0                  # actuation delay within [0, tau_bar]
    benchmark_every: int = 0              # 0 = exact state each sample
    antagonism: tuple[float, float] = (0.0, 0.0)  # (sigma_I, sigma_x)
    ptot_hat: float | None = None         # governance signal, constant
    osgood_ok: bool = True

    def measured_phi_svc(self) -> float:
        return self.phi_svc_true if self.phi_svc_meas is None else self.phi_svc_meas


@dataclass(frozen=True)
class PolicyThresholds:
    governance_delta: float = 0.1      # throttle-and-escalate margin on ptot
    escalate_consecutive_slack: int = 3
    antagonism_theta: float = 0.5      # fraction of the current gain budget
    slack_tol: float = 1e-9


@dataclass
class StepLog:
    k: int
    t: float
    I_true: float
    I_hat: float
    u: float
    slack: float
    action: str
    budget: float
    violation_rate: float

    def to_json_dict(self) -> dict:
        return {"k": self.k, "t": self.t, "I_true": self.I_true,
                "I_hat": self.I_hat, "u": self.u, "slack": self.slack,
                "action": self.action, "budget": self.budget,
                "violation_rate": self.violation_rate}


@dataclass
class SupervisionLog:
    steps: list[StepLog]
    final_status: str          # "completed" | "shutdown"
    max_overshoot: float       # max(I - I_bar) over samples
    max_violation_rate: float  # max per-step budget violation

    def actions(self) -> list[str]:
        return [s.action for s in self.steps]

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for s in self.steps:
                fh.write(json.dumps(s.to_json_dict(), sort_keys=True) + "\n")


def _plant_advance(phi: dyn.PhiSpec, phi_svc: float, u: float, I: float,
                   dt: float, substeps: int = 16) -> float:
    """Exact-enough zero-order-hold plant integration (RK4 substeps)."""
    if u <= 0 or dt <= 0:
        return I
    h = dt / substeps
    y = I
    for _ in range(substeps):
        k1 = phi(y) * phi_svc * u
        k2 = phi(y + 0.5 * h * k1) * phi_svc * u
        k3 = phi(y + 0.5 * h * k2) * phi_svc * u
        k4 = phi(y + h * k3) * phi_svc * u
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def supervise(scenario: PlantScenario, config: ControlConfig,
              policy: PolicyThresholds = PolicyThresholds()) -> SupervisionLog:
    """Run the sampled-data barrier loop against a simulated plant.

    Per sample: synthesize telemetry, update the observer (or use the
    exact state with the configured bounded error), build the barrier row
    a = Phi(I_hat)*phi_svc_hat against the interior budget, filter the
    reference throttle through the QP, and apply it with the scenario's
    actuation latency.  Actions: escalate when the governance elasticity
    exceeds 1 - delta or the QP slack stays positive for the configured
    run of steps; shutdown when the antagonism budget is blown or the
    gain's reciprocal integral stops diverging.
    """
    if scenario.latency > config.tau_bar + 1e-12:
        raise ValueError("scenario latency exceeds the configured tau_bar")
    I = scenario.I0
    u_prev = np.zeros(config.n_channels)
    steps: list[StepLog] = []
    consecutive_slack = 0
    max_overshoot = -math.inf
    max_violation = 0.0
    sigma_i, sigma_x = scenario.antagonism
    observer = ObserverState(scenario.I0)
    final = "completed"

    for k in range(scenario.n_steps):
        t = k * config.Delta
        I_sample = I
        max_overshoot = max(max_overshoot, I_sample - config.I_bar)

        # -- state estimate
        if scenario.benchmark_every <= 0:
            err = scenario.state_error * (1 if k % 2 == 0 else -1)
            I_hat = I + err
        else:
            benchmark = None
            if k % scenario.benchmark_every == 0:
                benchmark = (I, 0.0, 1.0)
            observer = observer_update(
                observer, scenario.measured_phi_svc(), scenario.phi,
                benchmark, config, throttle=float(u_prev[0]))
            I_hat = observer.I_hat

        # -- governance checks before actuation
        action = "certify"
        if not scenario.osgood_ok:
            action = "shutdown"
        else:
            gain_budget = scenario.phi(max(I_hat, scenario.phi.domain_floor)) \
                * scenario.measured_phi_svc()
            if sigma_i + sigma_x > policy.antagonism_theta * gain_budget:
                action = "shutdown"
        if action == "shutdown":
            steps.append(StepLog(k, t, I_sample, I_hat, 0.0, 0.0, action,
                                 0.0, 0.0))
            final = "shutdown"
            break

        # -- barrier QP
        a_row = np.full(config.n_channels,
                        scenario.phi(max(I_hat, scenario.phi.domain_floor))
                        * scenario.measured_phi_svc())
        budget = barrier_budget(I_hat, config, sigma_i, sigma_x,
                                use_estimation_margin=False)
        u_ref = np.full(config.n_channels, scenario.u_ref)
        qp = qp_step(u_ref, u_prev, a_row, budget, config)
        u_k = qp.u_star

        if qp.slack > policy.slack_tol:
            consecutive_slack += 1
        else:
            consecutive_slack = 0
        if consecutive_slack >= policy.escalate_consecutive_slack:
            action = "escalate"
        if scenario.ptot_hat is not None and \
                scenario.ptot_hat > 1.0 - policy.governance_delta:
            action = "escalate"

        # -- per-step budget violation against the TRUE state, measured at
        # command-application instants (intersample drift is covered by the
        # L_h * tau_bar margin)
        def _violation(state: float, command: float) -> float:
            rate = scenario.phi(max(state, scenario.phi.domain_floor)) \
                * scenario.phi_svc_true * command
            return rate - config.kappa * (config.I_bar - state)

        # -- actuate with latency: previous command holds during the delay
        if scenario.latency > 0:
            step_violation = _violation(I, float(u_prev[0]))
            I = _plant_advance(scenario.phi, scenario.phi_svc_true,
                               float(u_prev[0]), I, scenario.latency)
            step_violation = max(step_violation, _violation(I, float(u_k[0])))
            I = _plant_advance(scenario.phi, scenario.phi_svc_true,
                               float(u_k[0]), I,
                               config.Delta - scenario.latency)
        else:
            step_violation = _violation(I, float(u_k[0]))
            I = _plant_advance(scenario.phi, scenario.phi_svc_true,
                               float(u_k[0]), I, config.Delta)
        max_violation = max(max_violation, step_violation)

        steps.append(StepLog(k, t, I_sample, I_hat, float(u_k[0]), qp.slack,
                             action, budget, max(0.0, step_violation)))
        u_prev = u_k

    return SupervisionLog(steps, final, max_overshoot, max_violation)
