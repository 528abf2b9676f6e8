"""Plant models and fixed-step closed-loop simulation.

Plants expose ``deriv(x, u)`` / ``output(x, u)`` and are integrated with
classical RK4 under zero-order-hold control. Input dead time is realized as
a command buffer of round(delay / dt) slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DIVERGENCE_LIMIT = 1e6

# Closed-loop state matrix and disturbance vector reported for the cloud-
# controlled pendulum benchmark; simulated verbatim for reporting only (it
# is not derivable from the printed pendulum parameters, and it carries an
# unstable eigenvalue).
REFERENCE_CLOSED_LOOP_A = ((0.0, 1.0), (58.1, -0.193))
REFERENCE_DISTURBANCE_B = (0.0, -0.255)


class SimulationDiverged(RuntimeError):
    """State left the sane range; carries the offending step index."""

    def __init__(self, step: int, detail: str):
        super().__init__(f"simulation diverged at step {step}: {detail}")
        self.step = step


def rk4_step(deriv, x, u: float, dt: float):
    """One classical 4th-order Runge-Kutta update with held input u."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(deriv(x, u), dtype=float)
    k2 = np.asarray(deriv(x + 0.5 * dt * k1, u), dtype=float)
    k3 = np.asarray(deriv(x + 0.5 * dt * k2, u), dtype=float)
    k4 = np.asarray(deriv(x + dt * k3, u), dtype=float)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite state after RK4 update")
    return out


@dataclass(frozen=True)
class FrictionModel:
    """Viscous (cv * omega) plus dry (cd * sign(omega)) joint friction."""

    enabled: bool = False
    cv: float = 0.05
    cd: float = 0.02

    def __post_init__(self):
        if self.cv < 0 or self.cd < 0:
            raise ValueError("friction coefficients must be >= 0")


@dataclass(frozen=True)
class PendulumParams:
    """Cart-mounted inverted pendulum, 2-state (angle, angular rate) form.

    ``a`` is the equivalent amplification factor coupling the input to the
    angle dynamics; the canonical benchmark value 1/(m + mc) = 0.1 is the
    default (the alternative reading l/(m + mc) = 0.05 is configurable).
    """

    g: float = 9.8
    m: float = 2.0
    mc: float = 8.0
    l: float = 0.5
    a: float = 0.1
    friction: FrictionModel = field(default_factory=FrictionModel)

    def __post_init__(self):
        for name in ("g", "m", "mc", "l"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.min_denominator > 0:
            raise ValueError(
                "4l/3 - a*m*l must stay positive; got "
                f"{self.min_denominator} for a={self.a}"
            )

    @property
    def min_denominator(self) -> float:
        return 4.0 * self.l / 3.0 - self.a * self.m * self.l


def pendulum_deriv(x, u: float, p: PendulumParams) -> tuple[float, float]:
    """Nonlinear pendulum dynamics (theta_dot, omega_dot) under input u."""
    th, om = float(x[0]), float(x[1])
    denom = 4.0 * p.l / 3.0 - p.a * p.m * p.l * math.cos(th) ** 2
    if denom <= 0:
        raise ValueError(f"pendulum denominator {denom} <= 0 at theta={th}")
    num = (
        p.g * math.sin(th)
        - 0.5 * p.a * p.m * p.l * om * om * math.sin(2.0 * th)
        - p.a * math.cos(th) * u
    )
    if p.friction.enabled:
        num -= p.friction.cv * om + p.friction.cd * float(np.sign(om))
    return (om, num / denom)


def linearize_pendulum(p: PendulumParams) -> tuple[np.ndarray, np.ndarray]:
    """Small-angle (A, B) at the upright equilibrium.

    Dry friction is non-smooth at zero rate and is excluded; the viscous
    term contributes the A[1,1] entry when friction is enabled.
    """
    d = p.min_denominator
    a21 = p.g / d
    a22 = -p.friction.cv / d if p.friction.enabled else 0.0
    a = np.array([[0.0, 1.0], [a21, a22]])
    b = np.array([0.0, -p.a / d])
    return a, b


@dataclass(frozen=True, eq=False)
class LtiPlant:
    """State-space realization with an input dead time in seconds."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float
    delay: float = 0.0

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError(f"A must be square, got {a.shape}")
        b = np.asarray(self.b, dtype=float).reshape(n)
        c = np.asarray(self.c, dtype=float).reshape(n)
        if self.delay < 0:
            raise ValueError(f"delay must be >= 0, got {self.delay}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", float(self.d))

    @property
    def n_states(self) -> int:
        return self.a.shape[0]


def make_lti_from_tf(num, den, delay: float = 0.0) -> LtiPlant:
    """Controllable canonical realization of num(s)/den(s) (highest first)."""
    num = [float(v) for v in num]
    den = [float(v) for v in den]
    if not den or den[0] == 0.0:
        raise ValueError("denominator leading coefficient must be nonzero")
    n = len(den) - 1
    if n < 1:
        raise ValueError("denominator must have degree >= 1")
    if len(num) > len(den):
        raise ValueError(
            f"improper transfer function: numerator degree {len(num)-1} "
            f"exceeds denominator degree {n}"
        )
    a_coef = [v / den[0] for v in den]
    b_coef = [0.0] * (len(den) - len(num)) + [v / den[0] for v in num]
    a = np.zeros((n, n))
    if n > 1:
        a[:-1, 1:] = np.eye(n - 1)
    a[-1, :] = [-a_coef[n - k] for k in range(n)]
    b = np.zeros(n)
    b[-1] = 1.0
    d = b_coef[0]
    c = np.array([b_coef[n - k] - a_coef[n - k] * d for k in range(n)])
    return LtiPlant(a=a, b=b, c=c, d=d, delay=delay)


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step closed-loop run description."""

    dt: float
    t_final: float
    control_every: int = 1
    x0: tuple[float, ...] = (0.0, 0.0)
    setpoint: float | tuple[tuple[float, float], ...] = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if int(self.control_every) != self.control_every or self.control_every < 1:
            raise ValueError(f"control_every must be an integer >= 1, got {self.control_every}")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if not isinstance(self.setpoint, (int, float)):
            prof = tuple((float(t), float(v)) for t, v in self.setpoint)
            if any(prof[k][0] >= prof[k + 1][0] for k in range(len(prof) - 1)):
                raise ValueError("setpoint profile times must increase")
            object.__setattr__(self, "setpoint", prof)
        else:
            object.__setattr__(self, "setpoint", float(self.setpoint))

    def setpoint_at(self, t: float) -> float:
        if isinstance(self.setpoint, float):
            return self.setpoint
        r = self.setpoint[0][1]
        for t0, v in self.setpoint:
            if t >= t0:
                r = v
        return r

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform-grid closed-loop record plus run metadata."""

    t: np.ndarray
    states: np.ndarray
    y: np.ndarray
    u: np.ndarray
    r: np.ndarray
    meta: dict

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.y) == len(self.u) == len(self.r) == self.states.shape[0] == n):
            raise ValueError("all trajectory series must share one length")

    def to_csv(self) -> str:
        """Serialize on the layout chosen by meta['kind']."""
        lines = []
        if self.meta.get("kind") in ("pendulum", "linear"):
            lines.append("t,x1,x2,y,u,r")
            cols = (self.t, self.states[:, 0], self.states[:, 1], self.y, self.u, self.r)
        else:
            lines.append("t,y,u,r")
            cols = (self.t, self.y, self.u, self.r)
        for row in zip(*cols):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


class PendulumPlant:
    """Simulation adapter for the nonlinear pendulum; output is the angle."""

    kind = "pendulum"
    delay = 0.0

    def __init__(self, params: PendulumParams):
        self.params = params

    @property
    def n_states(self) -> int:
        return 2

    def deriv(self, x, u):
        return pendulum_deriv(x, u, self.params)

    def output(self, x, u: float = 0.0) -> float:
        return float(x[0])


class StateSpacePlant:
    """Simulation adapter for an LtiPlant (with its input dead time)."""

    kind = "lti"

    def __init__(self, lti: LtiPlant):
        self.lti = lti
        self.delay = lti.delay

    @property
    def n_states(self) -> int:
        return self.lti.n_states

    def deriv(self, x, u):
        return self.lti.a @ x + self.lti.b * u

    def output(self, x, u: float = 0.0) -> float:
        return float(self.lti.c @ x + self.lti.d * u)


class ZeroController:
    """Always outputs zero; baseline and sanity-check controller."""

    def reset(self):
        pass

    def compute(self, t, r, y, x=None) -> float:
        return 0.0


def simulate_closed_loop(plant, controller, sim: SimConfig) -> Trajectory:
    """Run the loop r -> e -> controller -> u -> plant -> y at fixed step.

    The controller is sampled every ``control_every`` integration steps and
    its command is held (ZOH) in between; the plant sees the command delayed
    by round(delay / dt) steps. Aborts with SimulationDiverged when any
    state magnitude exceeds 1e6.
    """
    n = sim.n_steps
    delay_steps = round(plant.delay / sim.dt)
    x = np.asarray(sim.x0, dtype=float)
    if x.shape != (plant.n_states,):
        raise ValueError(f"x0 must have {plant.n_states} states, got {x.shape}")
    t_grid = np.arange(n + 1) * sim.dt
    states = np.empty((n + 1, plant.n_states))
    ys = np.empty(n + 1)
    us = np.empty(n + 1)
    rs = np.empty(n + 1)
    cmd_history = np.zeros(n + 1)
    u_cmd = 0.0
    for m in range(n + 1):
        t = float(t_grid[m])
        r = sim.setpoint_at(t)
        if delay_steps == 0:
            u_applied_now = u_cmd  # actuator still holds the previous command
        elif m >= delay_steps:
            u_applied_now = cmd_history[m - delay_steps]
        else:
            u_applied_now = 0.0
        y = plant.output(x, u_applied_now)
        if m % sim.control_every == 0:
            u_cmd = controller.compute(t, r, y, x)
        states[m] = x
        ys[m] = y
        us[m] = u_cmd
        rs[m] = r
        cmd_history[m] = u_cmd
        if m == n:
            break
        u_applied = cmd_history[m - delay_steps] if m >= delay_steps else 0.0
        x = rk4_step(plant.deriv, x, float(u_applied), sim.dt)
        if not np.all(np.isfinite(x)) or np.abs(x).max() > DIVERGENCE_LIMIT:
            raise SimulationDiverged(m + 1, f"|state| = {np.abs(x).max():.3e}")
    meta = {
        "kind": plant.kind,
        "dt": sim.dt,
        "t_final": sim.t_final,
        "control_every": sim.control_every,
        "delay_steps": delay_steps,
        "delay_rounding_error_s": plant.delay - delay_steps * sim.dt,
        "seed": sim.seed,
    }
    return Trajectory(t=t_grid, states=states, y=ys, u=us, r=rs, meta=meta)


def given_linear_system(omega, x0, sim: SimConfig) -> Trajectory:
    """Simulate the reported closed-loop matrices under a disturbance signal.

    ``omega`` is a callable t -> float (None means identically zero). The
    record maps the disturbance into the trajectory's u column.
    """
    a = np.asarray(REFERENCE_CLOSED_LOOP_A)
    b = np.asarray(REFERENCE_DISTURBANCE_B)
    if omega is None:
        omega = lambda t: 0.0
    n = sim.n_steps
    t_grid = np.arange(n + 1) * sim.dt
    x = np.asarray(x0, dtype=float).reshape(2)
    states = np.empty((n + 1, 2))
    us = np.empty(n + 1)
    for m in range(n + 1):
        w = float(omega(float(t_grid[m])))
        states[m] = x
        us[m] = w
        if m == n:
            break
        x = rk4_step(lambda xx, uu: a @ xx + b * uu, x, w, sim.dt)
        if not np.all(np.isfinite(x)) or np.abs(x).max() > DIVERGENCE_LIMIT:
            raise SimulationDiverged(m + 1, f"|state| = {np.abs(x).max():.3e}")
    meta = {"kind": "linear", "dt": sim.dt, "t_final": sim.t_final, "seed": sim.seed}
    return Trajectory(
        t=t_grid,
        states=states,
        y=states[:, 0].copy(),
        u=us,
        r=np.zeros(n + 1),
        meta=meta,
    )
