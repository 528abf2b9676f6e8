"""Cloud controller inference engine.

Two engines share the scaling / aggregation machinery:

* the grid engine: symmetric, equally spaced triangle (or Gaussian) premise
  clouds on each input universe, singleton consequents, and the canonical
  rule (i, j) -> -(i+j). In deterministic mode only the four rules whose
  premise cells bracket the input fire; in stochastic mode the flank
  denominators of those rules are re-sampled per drop and the drop-averaged
  weights are aggregated.
* the rule-list engine: arbitrary triangle antecedent/consequent clouds,
  evaluated per rule with the conclusion-side sampling scheme, for
  asymmetric-width setups the grid engine cannot express.

Both produce a crisp output by the weighted-average (center) method and are
wrapped by :class:`CloudController` for closed-loop use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .clouds import TriangleCloud, sample_entropy
from .rng import RandomSource

# Gaussian premise width as a fraction of the center spacing, chosen so
# adjacent memberships cross at 0.5 at the midpoint like the triangles do.
GAUSS_WIDTH_RATIO = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

RECOMMENDED_DROPS = (1000, 3000)

DENOMINATOR_EPS_FRACTION = 1e-6


class DegenerateCellError(RuntimeError):
    """All four corner weights vanished; the cell cannot be aggregated."""


@dataclass(frozen=True)
class Partition:
    """2j+1 equally spaced triangle premise clouds covering [lo, hi].

    Center number i (i = -j..j) sits at mid + i * spacing; every cloud's
    flanks reach the neighboring centers, so adjacent memberships sum to 1
    on the shared interval when he = 0.
    """

    lo: float
    hi: float
    j: int
    he: float = 0.0
    clouds: tuple[TriangleCloud, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.j < 1:
            raise ValueError(f"j must be >= 1, got {self.j}")
        if self.he < 0:
            raise ValueError(f"he must be >= 0, got {self.he}")
        clouds = tuple(
            TriangleCloud(self.center(i), self.spacing, self.spacing, self.he)
            for i in range(-self.j, self.j + 1)
        )
        object.__setattr__(self, "clouds", clouds)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_range(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def spacing(self) -> float:
        return self.half_range / self.j

    def center(self, i: int) -> float:
        return self.mid + i * self.spacing

    @property
    def centers(self) -> tuple[float, ...]:
        return tuple(self.center(i) for i in range(-self.j, self.j + 1))

    def cloud(self, i: int) -> TriangleCloud:
        return self.clouds[i + self.j]


def build_partition(lo: float, hi: float, j: int, he: float = 0.0) -> Partition:
    """Construct the symmetric premise partition for one input universe."""
    return Partition(lo=lo, hi=hi, j=j, he=he)


@dataclass(frozen=True)
class ConsequentFamily:
    """4j+1 singleton output values k * h / (2j), k = -2j..2j."""

    h: float
    j: int

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError(f"h must be > 0, got {self.h}")
        if self.j < 1:
            raise ValueError(f"j must be >= 1, got {self.j}")

    @property
    def spacing(self) -> float:
        return self.h / (2 * self.j)

    def value(self, k: int) -> float:
        if abs(k) > 2 * self.j:
            raise ValueError(f"consequent index {k} outside [-{2*self.j}, {2*self.j}]")
        return k * self.h / (2 * self.j)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(self.value(k) for k in range(-2 * self.j, 2 * self.j + 1))


@dataclass(frozen=True)
class RuleBase:
    """Mapping (i, j) premise pair -> consequent index, stored as a table."""

    j: int
    table: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        m = 2 * self.j + 1
        if len(self.table) != m or any(len(row) != m for row in self.table):
            raise ValueError(f"rule table must be {m}x{m}")
        for row in self.table:
            for k in row:
                if abs(k) > 2 * self.j:
                    raise ValueError(f"consequent index {k} outside [-{2*self.j}, {2*self.j}]")

    @classmethod
    def canonical(cls, j: int) -> "RuleBase":
        """The standard antisymmetric base: (i, j) -> -(i+j)."""
        table = tuple(
            tuple(-(i + jj) for jj in range(-j, j + 1)) for i in range(-j, j + 1)
        )
        return cls(j=j, table=table)

    def index(self, i: int, jj: int) -> int:
        return self.table[i + self.j][jj + self.j]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=int)


@dataclass
class ControllerState:
    """Per-loop mutable memory: previous error and previous control value."""

    prev_error: float = 0.0
    prev_control: float = 0.0
    primed: bool = False

    def reset(self):
        self.prev_error = 0.0
        self.prev_control = 0.0
        self.primed = False


@dataclass(frozen=True)
class ControllerConfig:
    """Full description of one grid-engine cloud controller instance."""

    ke: float
    kde: float
    ku: float
    pe: Partition
    pde: Partition
    consequents: ConsequentFamily
    rules: RuleBase | None = None
    drops: int = 3000
    mode: str = "stochastic"
    shape: str = "triangle"
    output: str = "positional"
    derror: str = "difference"

    def __post_init__(self):
        for name in ("ke", "kde", "ku"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.drops < 1:
            raise ValueError(f"drops must be >= 1, got {self.drops}")
        if self.mode not in ("stochastic", "deterministic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.shape not in ("triangle", "normal"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.output not in ("positional", "incremental"):
            raise ValueError(f"unknown output mode {self.output!r}")
        if self.derror not in ("difference", "rate"):
            raise ValueError(f"unknown derror mode {self.derror!r}")
        if self.rules is None:
            object.__setattr__(self, "rules", RuleBase.canonical(self.pe.j))
        if not (self.pe.j == self.pde.j == self.consequents.j == self.rules.j):
            raise ValueError("pe, pde, consequents and rules must share one j")
        lo, hi = RECOMMENDED_DROPS
        if self.mode == "stochastic" and not (lo <= self.drops <= hi):
            warnings.warn(
                f"drop count {self.drops} outside the recommended range "
                f"[{lo}, {hi}]",
                stacklevel=3,
            )


def scale_and_clamp(e: float, de: float, cfg: ControllerConfig) -> tuple[float, float]:
    """Apply the input gains and saturate into the premise universes."""
    es = min(max(cfg.ke * e, cfg.pe.lo), cfg.pe.hi)
    des = min(max(cfg.kde * de, cfg.pde.lo), cfg.pde.hi)
    return es, des


def locate_cell(es: float, p: Partition) -> int:
    """Cell index i with center(i) <= es < center(i+1), edges clamped."""
    i = math.floor((es - p.lo) / p.spacing) - p.j
    return min(max(i, -p.j), p.j - 1)


def _locate_cells(es: np.ndarray, p: Partition) -> np.ndarray:
    i = np.floor((es - p.lo) / p.spacing).astype(int) - p.j
    return np.clip(i, -p.j, p.j - 1)


def sampled_denominators(
    p: Partition, i: int, rng: RandomSource, n: int
) -> np.ndarray:
    """Per-drop sampled flank widths N(center(i+1), he) - N(center(i), he).

    Draws whose magnitude underflows 1e-6 * spacing are rejected and
    redrawn so the sampled memberships stay finite.
    """
    eps = DENOMINATOR_EPS_FRACTION * p.spacing
    hi, lo = p.center(i + 1), p.center(i)
    den = rng.normal(hi, p.he, n) - rng.normal(lo, p.he, n)
    bad = np.abs(den) < eps
    while bad.any():
        m = int(bad.sum())
        den[bad] = rng.normal(hi, p.he, m) - rng.normal(lo, p.he, m)
        bad = np.abs(den) < eps
    return den


def fire_corner_weights(
    es: float,
    des: float,
    i: int,
    j: int,
    pe: Partition,
    pde: Partition,
    mode: str = "deterministic",
    rng: RandomSource | None = None,
    drops: int = 1,
) -> tuple[float, float, float, float]:
    """Firing weights of the four rules bracketing cell (i, j).

    Weight order: (lo, lo), (lo, hi), (hi, lo), (hi, hi) where lo/hi name
    the premise clouds at the cell's lower/upper centers. Deterministic
    mode divides by the exact spacings and the four weights sum to 1;
    stochastic mode divides by per-drop sampled denominators, clamps each
    product into [0, 1] and returns the drop means.
    """
    ne_lo = pe.center(i + 1) - es
    ne_hi = es - pe.center(i)
    nd_lo = pde.center(j + 1) - des
    nd_hi = des - pde.center(j)
    if mode == "deterministic":
        me_lo, me_hi = ne_lo / pe.spacing, ne_hi / pe.spacing
        md_lo, md_hi = nd_lo / pde.spacing, nd_hi / pde.spacing
        return (me_lo * md_lo, me_lo * md_hi, me_hi * md_lo, me_hi * md_hi)
    if rng is None:
        raise ValueError("stochastic mode needs a RandomSource")
    den_e = sampled_denominators(pe, i, rng, drops)
    den_d = sampled_denominators(pde, j, rng, drops)
    me_lo, me_hi = ne_lo / den_e, ne_hi / den_e
    md_lo, md_hi = nd_lo / den_d, nd_hi / den_d
    w = (
        np.clip(me_lo * md_lo, 0.0, 1.0),
        np.clip(me_lo * md_hi, 0.0, 1.0),
        np.clip(me_hi * md_lo, 0.0, 1.0),
        np.clip(me_hi * md_hi, 0.0, 1.0),
    )
    return tuple(float(wk.mean()) for wk in w)


def consequent_singletons(
    i: int, j: int, jmax: int, h: float = 1.0
) -> tuple[float, float, float, float]:
    """Canonical singleton values fired at the four corners of cell (i, j)."""
    v = h / (2 * jmax)
    return (-(i + j) * v, -(i + j + 1) * v, -(i + j + 1) * v, -(i + j + 2) * v)


def aggregate(w, u) -> float:
    """Weighted average of consequent values (center method)."""
    sw = float(np.sum(w))
    if sw <= 0.0:
        raise DegenerateCellError("all firing weights are zero")
    return float(np.dot(w, u) / sw)


def _corner_values(cfg: ControllerConfig, i: int, j: int) -> tuple[float, float, float, float]:
    rb = cfg.rules
    return (
        cfg.consequents.value(rb.index(i, j)),
        cfg.consequents.value(rb.index(i, j + 1)),
        cfg.consequents.value(rb.index(i + 1, j)),
        cfg.consequents.value(rb.index(i + 1, j + 1)),
    )


def _normal_shape_ustar(
    es: float, des: float, cfg: ControllerConfig, rng: RandomSource | None
) -> float:
    """Gaussian-premise variant: every rule fires, weighted by bell products."""
    ce = np.asarray(cfg.pe.centers)
    cd = np.asarray(cfg.pde.centers)
    vals = np.asarray(cfg.consequents.values)[cfg.rules.as_array() + 2 * cfg.rules.j]
    we = GAUSS_WIDTH_RATIO * cfg.pe.spacing
    wd = GAUSS_WIDTH_RATIO * cfg.pde.spacing
    if cfg.mode == "deterministic":
        mu = np.exp(-0.5 * ((es - ce) / we) ** 2)
        nu = np.exp(-0.5 * ((des - cd) / wd) ** 2)
        wbar = mu[:, None] * nu[None, :]
    else:
        if rng is None:
            raise ValueError("stochastic mode needs a RandomSource")
        k = cfg.drops
        ene = sample_entropy(we, cfg.pe.he, rng, k)
        end = sample_entropy(wd, cfg.pde.he, rng, k)
        mu = np.exp(-0.5 * ((es - ce[:, None]) / ene[None, :]) ** 2)
        nu = np.exp(-0.5 * ((des - cd[:, None]) / end[None, :]) ** 2)
        wbar = np.einsum("ik,jk->ij", mu, nu) / k
    return aggregate(wbar.ravel(), vals.ravel())


def controller_step(
    e: float,
    de: float,
    cfg: ControllerConfig,
    state: ControllerState,
    rng: RandomSource | None = None,
    trace: list | None = None,
) -> float:
    """One inference step from raw (error, error change) to control output.

    Positional mode returns ku * u*; incremental mode accumulates it onto
    the previous control value held in ``state``.
    """
    es, des = scale_and_clamp(e, de, cfg)
    if cfg.shape == "triangle":
        i = locate_cell(es, cfg.pe)
        j = locate_cell(des, cfg.pde)
        w = fire_corner_weights(es, des, i, j, cfg.pe, cfg.pde, cfg.mode, rng, cfg.drops)
        ustar = aggregate(w, _corner_values(cfg, i, j))
    else:
        i = locate_cell(es, cfg.pe)
        j = locate_cell(des, cfg.pde)
        w = (math.nan,) * 4
        ustar = _normal_shape_ustar(es, des, cfg, rng)
    out = cfg.ku * ustar
    if cfg.output == "incremental":
        out = state.prev_control + out
    state.prev_control = out
    if trace is not None:
        trace.append((es, des, i, j, *w, ustar))
    return out


def deterministic_output_scaled(cfg: ControllerConfig, es, des):
    """ku * u* of the deterministic triangle grid engine on scaled inputs.

    Array-aware closed form used by the structure certification; equivalent
    to controller_step with unit input gains and positional output.
    """
    es = np.asarray(es, dtype=float)
    des = np.asarray(des, dtype=float)
    pe, pde = cfg.pe, cfg.pde
    i = _locate_cells(es, pe)
    j = _locate_cells(des, pde)
    jm = cfg.rules.j
    vals = np.asarray(cfg.consequents.values)
    rb = cfg.rules.as_array()
    me_lo = (pe.mid + (i + 1) * pe.spacing - es) / pe.spacing
    me_hi = 1.0 - me_lo
    md_lo = (pde.mid + (j + 1) * pde.spacing - des) / pde.spacing
    md_hi = 1.0 - md_lo
    u11 = vals[rb[i + jm, j + jm] + 2 * jm]
    u12 = vals[rb[i + jm, j + 1 + jm] + 2 * jm]
    u21 = vals[rb[i + 1 + jm, j + jm] + 2 * jm]
    u22 = vals[rb[i + 1 + jm, j + 1 + jm] + 2 * jm]
    num = me_lo * md_lo * u11 + me_lo * md_hi * u12 + me_hi * md_lo * u21 + me_hi * md_hi * u22
    out = cfg.ku * num  # the four weights sum to 1 exactly in this mode
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class InferenceRule:
    """One rule of the rule-list engine: antecedent clouds -> consequent cloud."""

    antecedents: tuple[TriangleCloud, ...]
    consequent: TriangleCloud

    def __post_init__(self):
        if not self.antecedents:
            raise ValueError("a rule needs at least one antecedent cloud")


def _sampled_triangle_mu(c: TriangleCloud, x: float, rng: RandomSource, n: int) -> np.ndarray:
    en1 = sample_entropy(c.en1, c.he, rng, n)
    en2 = sample_entropy(c.en2, c.he, rng, n)
    if x < c.ex:
        return np.maximum(1.0 + (x - c.ex) / en1, 0.0)
    return np.maximum(1.0 - (x - c.ex) / en2, 0.0)


def general_controller_step(
    x,
    rules,
    drops: int = 3000,
    mode: str = "stochastic",
    rng: RandomSource | None = None,
) -> float | None:
    """Rule-list engine step: weighted balance of per-rule conclusion means.

    Per rule and drop, the firing weight w is the product of the (sampled)
    antecedent memberships and maps to a conclusion sample on the consequent
    cloud: ex + (1-w) * en2 when the first input sits left of the first
    antecedent's expectation, ex - (1-w) * en1 otherwise (the consequent
    width is itself re-sampled per drop). Returns None when no rule fires,
    signalling the caller to hold its previous output.
    """
    x = tuple(float(v) for v in x)
    if not rules:
        raise ValueError("need at least one rule")
    fired_w: list[float] = []
    fired_u: list[float] = []
    for rule in rules:
        if len(rule.antecedents) != len(x):
            raise ValueError(
                f"rule has {len(rule.antecedents)} antecedents for {len(x)} inputs"
            )
        c = rule.consequent
        rightward = x[0] < rule.antecedents[0].ex
        if mode == "deterministic":
            w = 1.0
            for a, xv in zip(rule.antecedents, x):
                w *= _deterministic_mu(a, xv)
            if w <= 0.0:
                continue
            enu = c.en2 if rightward else c.en1
            u = c.ex + (1.0 - w) * enu if rightward else c.ex - (1.0 - w) * enu
            fired_w.append(w)
            fired_u.append(u)
        else:
            if rng is None:
                raise ValueError("stochastic mode needs a RandomSource")
            w = np.ones(drops)
            for a, xv in zip(rule.antecedents, x):
                w = w * _sampled_triangle_mu(a, xv, rng, drops)
            enu = sample_entropy(c.en2 if rightward else c.en1, c.he, rng, drops)
            u = c.ex + (1.0 - w) * enu if rightward else c.ex - (1.0 - w) * enu
            wbar = float(w.mean())
            if wbar <= 0.0:
                continue
            fired_w.append(wbar)
            fired_u.append(float(u.mean()))
    if not fired_w:
        return None
    return float(np.dot(fired_w, fired_u) / np.sum(fired_w))


def _deterministic_mu(c: TriangleCloud, x: float) -> float:
    if x < c.ex:
        return max(1.0 + (x - c.ex) / c.en1, 0.0)
    return max(1.0 - (x - c.ex) / c.en2, 0.0)


def _error_change(e: float, state: ControllerState, derror: str, period: float) -> float:
    if derror == "rate":
        de = (e - state.prev_error) / period if state.primed else 0.0
        state.primed = True
    else:
        de = e - state.prev_error
    state.prev_error = e
    return de


class CloudController:
    """Closed-loop wrapper: tracks the previous error and feeds the engine.

    In difference mode the error change is e(k) - e(k-1) with the previous
    error initialized to zero. ``period`` is the controller sampling
    interval in seconds; derror="rate" divides the difference by it and
    uses a zero change on the first sample (there is no previous sample to
    difference, and dividing by a small period would manufacture a kick).
    """

    def __init__(
        self,
        cfg: ControllerConfig,
        rng: RandomSource | None = None,
        period: float = 1.0,
        trace: list | None = None,
    ):
        if cfg.mode == "stochastic" and rng is None:
            raise ValueError("stochastic config needs a RandomSource")
        if not (period > 0):
            raise ValueError(f"period must be > 0, got {period}")
        self.cfg = cfg
        self.rng = rng
        self.period = period
        self.state = ControllerState()
        self.trace = trace

    def reset(self):
        self.state.reset()

    def compute(self, t: float, r: float, y: float, x=None) -> float:
        e = r - y
        de = _error_change(e, self.state, self.cfg.derror, self.period)
        return controller_step(e, de, self.cfg, self.state, self.rng, self.trace)


class GeneralCloudController:
    """Closed-loop wrapper for the rule-list engine with hold-on-no-fire."""

    def __init__(
        self,
        rules,
        ke: float,
        kde: float,
        ku: float,
        lo: float = -1.0,
        hi: float = 1.0,
        drops: int = 3000,
        mode: str = "stochastic",
        output: str = "positional",
        derror: str = "difference",
        rng: RandomSource | None = None,
        period: float = 1.0,
    ):
        self.rules = tuple(rules)
        self.ke, self.kde, self.ku = ke, kde, ku
        self.lo, self.hi = lo, hi
        self.drops = drops
        self.mode = mode
        self.output = output
        self.derror = derror
        self.rng = rng
        self.period = period
        self.state = ControllerState()

    def reset(self):
        self.state.reset()

    def compute(self, t: float, r: float, y: float, x=None) -> float:
        e = r - y
        de = _error_change(e, self.state, self.derror, self.period)
        es = min(max(self.ke * e, self.lo), self.hi)
        des = min(max(self.kde * de, self.lo), self.hi)
        ustar = general_controller_step((es, des), self.rules, self.drops, self.mode, self.rng)
        if ustar is None:
            return self.state.prev_control
        out = self.ku * ustar
        if self.output == "incremental":
            out = self.state.prev_control + out
        self.state.prev_control = out
        return out
