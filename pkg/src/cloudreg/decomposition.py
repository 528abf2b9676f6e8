"""Structure certification: the grid-engine controller output splits exactly
into a global multi-value relay term plus a local PD term.

On each premise cell (i, j) the deterministic controller satisfies, to
floating-point roundoff,

    ku * u*(es, des) = u_G(i, j) + u_L(es, des)

with the relay level u_G = -ku * (i + j + 1) / (M - 1) constant per cell and
the local term affine in each input,

    u_L = -ku / (M - 1) * [(es - mid_i) / D_e + (des - mid_j) / D_de],

whose slopes are the local gains K_p = -ku / ((M - 1) * D_e) and
K_D = -ku / ((M - 1) * D_de). A frequently printed variant multiplies the
two bracket fractions instead of summing them (with a factor 2 in the
gains); that product form does not satisfy the identity, and the verifier
reports its residual alongside for the record.

Stochastic mode substitutes per-drop sampled flank denominators for D_e,
D_de, making K_p, K_D random variables; the identity is certified in
deterministic mode only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import (
    ControllerConfig,
    RuleBase,
    Partition,
    _locate_cells,
    deterministic_output_scaled,
    locate_cell,
    sampled_denominators,
)
from .rng import RandomSource


@dataclass(frozen=True)
class DecompositionReport:
    """Per-cell certification record.

    u_l is evaluated at the cell's lower-left corner (where it equals
    +ku / (M - 1) in deterministic mode); residual is the max identity
    mismatch over the verification grid points falling in the cell.
    """

    cell: tuple[int, int]
    u_g: float
    u_l: float
    kp: float
    kd: float
    residual: float

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual must be >= 0")


@dataclass(frozen=True, eq=False)
class DecompositionCertificate:
    """Grid-verification summary for one (j, ku) controller instance."""

    j: int
    ku: float
    grid_n: int
    max_residual: float
    product_form_max_residual: float
    complement_max_mismatch: float
    cells: tuple[DecompositionReport, ...]
    relay: np.ndarray

    @property
    def certified(self) -> bool:
        return self.max_residual <= 1e-12


def global_term(i: int, j: int, ku: float, m: int) -> float:
    """Relay level of cell (i, j): -ku * (i + j + 1) / (m - 1)."""
    if m < 3 or m % 2 == 0:
        raise ValueError(f"m must be an odd integer >= 3, got {m}")
    return -ku * (i + j + 1) / (m - 1)


def _denominators(
    pe: Partition,
    pde: Partition,
    i: int,
    j: int,
    mode: str,
    rng: RandomSource | None,
) -> tuple[float, float]:
    if mode == "deterministic":
        return pe.spacing, pde.spacing
    if rng is None:
        raise ValueError("stochastic mode needs a RandomSource")
    de = float(sampled_denominators(pe, i, rng, 1)[0])
    dd = float(sampled_denominators(pde, j, rng, 1)[0])
    return de, dd


def local_term(
    es: float,
    des: float,
    i: int,
    j: int,
    pe: Partition,
    pde: Partition,
    ku: float,
    m: int,
    mode: str = "deterministic",
    rng: RandomSource | None = None,
) -> float:
    """Local PD correction on cell (i, j); one sampled realization when stochastic."""
    de, dd = _denominators(pe, pde, i, j, mode, rng)
    mid_i = 0.5 * (pe.center(i) + pe.center(i + 1))
    mid_j = 0.5 * (pde.center(j) + pde.center(j + 1))
    return -ku / (m - 1) * ((es - mid_i) / de + (des - mid_j) / dd)


def local_term_product_form(
    es: float,
    des: float,
    i: int,
    j: int,
    pe: Partition,
    pde: Partition,
    ku: float,
    m: int,
    mode: str = "deterministic",
    rng: RandomSource | None = None,
) -> float:
    """The commonly printed product variant; kept for the discrepancy report."""
    de, dd = _denominators(pe, pde, i, j, mode, rng)
    fe = (2.0 * es - pe.center(i) - pe.center(i + 1)) / de
    fd = (2.0 * des - pde.center(j) - pde.center(j + 1)) / dd
    return -ku / (m - 1) * fe * fd


def local_gains(
    i: int,
    j: int,
    pe: Partition,
    pde: Partition,
    ku: float,
    m: int,
    mode: str = "deterministic",
    rng: RandomSource | None = None,
) -> tuple[float, float]:
    """Local PD gains (kp, kd) of cell (i, j)."""
    de, dd = _denominators(pe, pde, i, j, mode, rng)
    return -ku / ((m - 1) * de), -ku / ((m - 1) * dd)


def local_term_complement(cfg: ControllerConfig, es: float, des: float) -> float:
    """u_L via the exact complement ku * u* - u_G (deterministic cross-check)."""
    i = locate_cell(es, cfg.pe)
    j = locate_cell(des, cfg.pde)
    m = 2 * cfg.pe.j + 1
    return deterministic_output_scaled(cfg, es, des) - global_term(i, j, cfg.ku, m)


def relay_table(cfg: ControllerConfig) -> np.ndarray:
    """Relay levels indexed [i + j_max, j + j_max] over the (2j)^2 cells."""
    _require_certifiable(cfg)
    jm = cfg.pe.j
    m = 2 * jm + 1
    table = np.empty((2 * jm, 2 * jm))
    for i in range(-jm, jm):
        for j in range(-jm, jm):
            table[i + jm, j + jm] = global_term(i, j, cfg.ku, m)
    return table


def _require_certifiable(cfg: ControllerConfig):
    if cfg.mode != "deterministic":
        raise ValueError("certification runs in deterministic mode only")
    if cfg.shape != "triangle":
        raise ValueError("certification covers the triangle grid engine only")
    if cfg.rules.table != RuleBase.canonical(cfg.pe.j).table:
        raise ValueError("certification assumes the canonical rule base")
    if cfg.consequents.h != 1.0:
        raise ValueError("certification assumes a unit output universe (h = 1)")


def verify_decomposition(cfg: ControllerConfig, grid_n: int = 101) -> DecompositionCertificate:
    """Evaluate controller vs relay + PD split on a grid_n x grid_n lattice.

    Returns the max identity residual (certified when <= 1e-12), the
    residual of the printed product form for comparison, the mismatch of
    the complement cross-check, and per-cell records.
    """
    _require_certifiable(cfg)
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    pe, pde = cfg.pe, cfg.pde
    jm = pe.j
    m = 2 * jm + 1
    es = np.linspace(pe.lo, pe.hi, grid_n)
    des = np.linspace(pde.lo, pde.hi, grid_n)
    ee, dd = np.meshgrid(es, des, indexing="ij")
    out = np.asarray(deterministic_output_scaled(cfg, ee, dd))
    ci = _locate_cells(ee, pe)
    cj = _locate_cells(dd, pde)
    mid_i = pe.mid + (ci + 0.5) * pe.spacing
    mid_j = pde.mid + (cj + 0.5) * pde.spacing
    u_g = -cfg.ku * (ci + cj + 1) / (m - 1)
    u_l = -cfg.ku / (m - 1) * ((ee - mid_i) / pe.spacing + (dd - mid_j) / pde.spacing)
    resid = np.abs(out - (u_g + u_l))
    u_l_prod = (
        -cfg.ku
        / (m - 1)
        * (2.0 * (ee - mid_i) / pe.spacing)
        * (2.0 * (dd - mid_j) / pde.spacing)
    )
    resid_prod = np.abs(out - (u_g + u_l_prod))
    comp = np.abs((out - u_g) - u_l)
    cells = []
    for i in range(-jm, jm):
        for j in range(-jm, jm):
            in_cell = (ci == i) & (cj == j)
            kp, kd = local_gains(i, j, pe, pde, cfg.ku, m)
            cells.append(
                DecompositionReport(
                    cell=(i, j),
                    u_g=global_term(i, j, cfg.ku, m),
                    u_l=local_term(pe.center(i), pde.center(j), i, j, pe, pde, cfg.ku, m),
                    kp=kp,
                    kd=kd,
                    residual=float(resid[in_cell].max()) if in_cell.any() else 0.0,
                )
            )
    return DecompositionCertificate(
        j=jm,
        ku=cfg.ku,
        grid_n=grid_n,
        max_residual=float(resid.max()),
        product_form_max_residual=float(resid_prod.max()),
        complement_max_mismatch=float(comp.max()),
        cells=tuple(cells),
        relay=relay_table(cfg),
    )
