//! The Box scheme: `Nt` equal-bandwidth time layers, each carrying `Ns`
//! superposition layers.
//!
//! Refinement information is assigned to the cells one at a time, either
//! row by row or always to the time layer with the most unallocated power.
//! The receiver decodes in the same order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::broadcast::LayerAllocation;
use crate::channel::{layer_diversity, BandwidthRatio, ChannelConfig, TAU};
use crate::error::{domain, Error, Result};
use crate::lp::{solve, LpBuilder};
use crate::scheme::{Allocation, SchemeExponent, SchemeId};

/// Fractional rate back-off that keeps a cell strictly inside its DMT segment.
pub const EPS_RATE: f64 = 1e-9;

/// Largest `Ns·Nt` accepted by [`box_bruteforce_small`].
pub const MAX_BRUTEFORCE_CELLS: usize = 6;

/// Number of coarse samples of `[0, MN]` taken by [`box_max_exponent`].
pub const COARSE_STEPS: usize = 64;

/// Order in which cells receive refinement information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FillOrder {
    /// `(1,1), …, (1,Nt), (2,1), …`
    #[default]
    Sequential,
    /// Next cell goes to the time layer with the largest remaining power
    /// exponent; ties go to the lowest time index.
    MaxAvailablePower,
}

impl fmt::Display for FillOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FillOrder::Sequential => "sequential",
            FillOrder::MaxAvailablePower => "max_available_power",
        })
    }
}

impl FromStr for FillOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "sequential" | "seq" => Ok(FillOrder::Sequential),
            "max_available_power" | "max_power" => Ok(FillOrder::MaxAvailablePower),
            other => Err(format!("unknown fill order '{other}'")),
        }
    }
}

/// Tracks which cell comes next under a fill order.
struct Cursor {
    order: FillOrder,
    ns: usize,
    filled: Vec<usize>,
    step: usize,
}

impl Cursor {
    fn new(order: FillOrder, ns: usize, nt: usize) -> Self {
        Self {
            order,
            ns,
            filled: vec![0; nt],
            step: 0,
        }
    }

    /// Next `(row, column)`, given the current power exponent of each column.
    fn next(&mut self, available: impl Fn(usize) -> f64) -> Option<(usize, usize)> {
        let nt = self.filled.len();
        if self.step == self.ns * nt {
            return None;
        }
        let col = match self.order {
            FillOrder::Sequential => self.step % nt,
            FillOrder::MaxAvailablePower => {
                let mut best: Option<usize> = None;
                for j in (0..nt).filter(|&j| self.filled[j] < self.ns) {
                    if best.is_none_or(|c| available(j) > available(c)) {
                        best = Some(j);
                    }
                }
                best.expect("an unfilled column remains")
            }
        };
        let row = self.filled[col];
        self.filled[col] += 1;
        self.step += 1;
        Some((row, col))
    }
}

/// Power exponents and rates of every cell.
///
/// `gamma[i][j]` and `rate[i][j]` index superposition layer `i + 1` of time
/// layer `j + 1`; an unchanged power exponent with zero rate marks a
/// skipped cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxGrid {
    pub nt: usize,
    pub ns: usize,
    pub gamma: Vec<Vec<f64>>,
    pub rate: Vec<Vec<f64>>,
    /// Exponent contributed by the refinements decoded before each visit,
    /// in visit order; the last entry covers the whole grid.
    pub cum_rate: Vec<f64>,
    pub order: FillOrder,
    pub b: f64,
    pub m_tx: usize,
    pub n_rx: usize,
}

impl BoxGrid {
    /// Builds a grid from per-cell values, deriving the prefix sums.
    pub fn new(gamma: Vec<Vec<f64>>, rate: Vec<Vec<f64>>, order: FillOrder, b: BandwidthRatio, cfg: &ChannelConfig) -> Result<Self> {
        let ns = gamma.len();
        let nt = gamma.first().map_or(0, Vec::len);
        if ns == 0 || nt == 0 {
            return domain("a grid needs at least one cell");
        }
        if rate.len() != ns || gamma.iter().chain(&rate).any(|row| row.len() != nt) {
            return domain("gamma and rate must both be Ns × Nt");
        }
        let mut grid = Self {
            nt,
            ns,
            gamma,
            rate,
            cum_rate: Vec::new(),
            order,
            b: b.get(),
            m_tx: cfg.tx(),
            n_rx: cfg.rx(),
        };
        grid.validate()?;
        grid.cum_rate = grid.prefix_sums(b);
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        for j in 0..self.nt {
            for i in 0..self.ns {
                let (prev, cur, r) = (self.gamma_prev(i, j), self.gamma[i][j], self.rate[i][j]);
                if !(cur >= 0.0 && cur <= prev) {
                    return domain(format!("power exponents must not increase down column {}", j + 1));
                }
                if !(r >= 0.0) {
                    return domain(format!("negative rate in cell ({}, {})", i + 1, j + 1));
                }
                if cur == prev && r > 0.0 {
                    return domain(format!("cell ({}, {}) has rate but no power", i + 1, j + 1));
                }
            }
        }
        Ok(())
    }

    /// `γ_{i−1,j}` with the implicit top row of ones.
    pub fn gamma_prev(&self, i: usize, j: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.gamma[i - 1][j]
        }
    }

    pub fn is_skipped(&self, i: usize, j: usize) -> bool {
        self.gamma[i][j] == self.gamma_prev(i, j) && self.rate[i][j] == 0.0
    }

    /// Cells in decoding order.
    pub fn visit_order(&self) -> Vec<(usize, usize)> {
        let mut cursor = Cursor::new(self.order, self.ns, self.nt);
        let mut out = Vec::with_capacity(self.ns * self.nt);
        while let Some(cell) = {
            let filled = cursor.filled.clone();
            cursor.next(|j| if filled[j] == 0 { 1.0 } else { self.gamma[filled[j] - 1][j] })
        } {
            out.push(cell);
        }
        out
    }

    fn prefix_sums(&self, b: BandwidthRatio) -> Vec<f64> {
        let w = b.get() / self.nt as f64;
        let mut out = Vec::with_capacity(self.ns * self.nt + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for (i, j) in self.visit_order() {
            acc += w * self.rate[i][j];
            out.push(acc);
        }
        out
    }
}

/// Exponent of a grid: the minimum over cells of diversity plus decoded
/// prefix, and the all-decoded term. Skipped cells are never in outage.
pub fn box_grid_exponent(grid: &BoxGrid, b: BandwidthRatio, cfg: &ChannelConfig) -> Result<f64> {
    cfg.require_single_block("box_grid_exponent")?;
    grid.validate()?;
    let w = b.get() / grid.nt as f64;
    let mut decoded = 0.0;
    let mut best = f64::INFINITY;
    for (i, j) in grid.visit_order() {
        if grid.is_skipped(i, j) {
            continue;
        }
        let r = grid.rate[i][j];
        let d = layer_diversity(r, grid.gamma_prev(i, j), grid.gamma[i][j], cfg)?;
        best = best.min(d + decoded);
        decoded += w * r;
    }
    Ok(best.min(decoded))
}

/// Places a broadcast allocation in every time layer (`γ_{i,j} = γ_i`,
/// `r_{i,j} = r_i`).
pub fn grid_from_layers(alloc: &LayerAllocation, n_time: usize, b: BandwidthRatio, cfg: &ChannelConfig) -> Result<BoxGrid> {
    if n_time == 0 {
        return domain("at least one time layer is required");
    }
    let gamma = alloc.gammas.iter().map(|&g| vec![g; n_time]).collect();
    let rate = alloc.rates.iter().map(|&r| vec![r; n_time]).collect();
    BoxGrid::new(gamma, rate, FillOrder::Sequential, b, cfg)
}

fn check_dims(cfg: &ChannelConfig, ns: usize, nt: usize) -> Result<()> {
    cfg.require_single_block("the Box scheme")?;
    if ns == 0 || nt == 0 {
        return domain("Ns and Nt must be positive");
    }
    Ok(())
}

/// Greedy test of whether exponent `d` is reachable; returns the grid it built.
///
/// Cells are visited in `order`. A cell that cannot help reach `d` is
/// skipped; otherwise it gets the lowest DMT segment whose diversity
/// lands exactly on `d` minus what is already decoded. The test succeeds
/// once the decoded refinements alone exceed `d`.
pub fn box_is_achievable(
    d: f64,
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    n_super: usize,
    n_time: usize,
    order: FillOrder,
) -> Result<(bool, BoxGrid)> {
    check_dims(cfg, n_super, n_time)?;
    if !(d >= 0.0) {
        return domain(format!("target exponent must be non-negative, got {d}"));
    }
    let (ns, nt, m) = (n_super, n_time, cfg.min_ant());
    let w = b.get() / nt as f64;
    let mut gamma = vec![vec![f64::NAN; nt]; ns];
    let mut rate = vec![vec![0.0; nt]; ns];
    let mut cursor = Cursor::new(order, ns, nt);
    let mut r_bar = 0.0;
    let mut done = false;

    loop {
        let filled = cursor.filled.clone();
        let avail = |j: usize| if filled[j] == 0 { 1.0 } else { gamma[filled[j] - 1][j] };
        let Some((i, j)) = cursor.next(avail) else { break };
        let g_prev = if i == 0 { 1.0 } else { gamma[i - 1][j] };
        gamma[i][j] = g_prev;
        if done || cfg.full_diversity() * g_prev + r_bar < d {
            continue;
        }
        let delta_at = |k: usize| (cfg.corner(k) * g_prev + r_bar - d) / cfg.slope(k);
        let pick = match (0..m).find(|&k| (0.0..g_prev).contains(&delta_at(k))) {
            Some(k) => Some((k, delta_at(k))),
            None => (0..m)
                .rev()
                .find(|&k| delta_at(k) >= g_prev)
                .map(|k| (k, g_prev * (1.0 - EPS_RATE))),
        };
        let Some((k, delta)) = pick else { continue };
        let g_cur = if i + 1 == ns { 0.0 } else { g_prev - delta };
        let gap = g_prev - g_cur;
        if !(gap > 0.0) {
            continue;
        }
        let r = k as f64 * gap + delta.min(gap * (1.0 - EPS_RATE));
        if !(r > 0.0) && g_cur != 0.0 {
            continue;
        }
        gamma[i][j] = g_cur;
        rate[i][j] = r;
        r_bar += w * r;
        if r_bar > d {
            done = true;
        }
    }
    let grid = BoxGrid::new(gamma, rate, order, b, cfg)?;
    Ok((done, grid))
}

/// Largest exponent the greedy construction certifies, to within `tol`.
///
/// Scans `COARSE_STEPS + 1` equally spaced targets in `[0, MN]`, then
/// bisects between the highest achievable sample and the next one.
pub fn box_max_exponent(
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    n_super: usize,
    n_time: usize,
    order: FillOrder,
    tol: f64,
) -> Result<SchemeExponent> {
    check_dims(cfg, n_super, n_time)?;
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    let top = cfg.full_diversity();
    let step = top / COARSE_STEPS as f64;
    let scan: Vec<(f64, bool, BoxGrid)> = (0..=COARSE_STEPS)
        .into_par_iter()
        .map(|s| {
            let d = s as f64 * step;
            box_is_achievable(d, b, cfg, n_super, n_time, order).map(|(ok, g)| (d, ok, g))
        })
        .collect::<Result<_>>()?;

    let achieved: Vec<f64> = scan.iter().filter(|s| s.1).map(|s| s.0).collect();
    let best_idx = scan.iter().rposition(|s| s.1);
    let Some(best_idx) = best_idx else {
        // d = 0 is always reachable, so this only happens on degenerate input
        return Err(Error::Domain("no target exponent was achievable".into()));
    };
    let (mut lo, _, mut grid) = scan[best_idx].clone();
    let mut hi = if best_idx == COARSE_STEPS { top } else { scan[best_idx + 1].0 };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (ok, g) = box_is_achievable(mid, b, cfg, n_super, n_time, order)?;
        if ok {
            lo = mid;
            grid = g;
        } else {
            hi = mid;
        }
    }
    Ok(SchemeExponent::new(SchemeId::BoxGreedy, b.get(), lo)
        .with("ns", n_super)
        .with("nt", n_time)
        .with("order", order.to_string())
        .with("tol", tol)
        .with("achievable_samples", achieved)
        .with_allocation(Allocation::Grid(grid)))
}

/// Per-cell choice in the exhaustive search: `None` skips the cell.
type CellChoice = Option<usize>;

fn bruteforce_lp(b: f64, cfg: &ChannelConfig, ns: usize, nt: usize, choice: &[CellChoice]) -> Option<(f64, Vec<f64>)> {
    // variable 0 is the exponent; γ_{i,j} and δ_{i,j} follow; a skipped
    // cell reuses the γ variable of the cell above it
    let cells = ns * nt;
    let gvar = |i: usize, j: usize| 1 + i * nt + j;
    let dvar = |i: usize, j: usize| 1 + cells + i * nt + j;
    let mut lp = LpBuilder::new(1 + 2 * cells).maximize(0, 1.0);
    lp.bounds(0, 0.0, cfg.full_diversity());
    let w = b / nt as f64;

    // γ_{i−1,j} as (variable, constant)
    let prev = |i: usize, j: usize| if i == 0 { None } else { Some(gvar(i - 1, j)) };

    let mut decoded: Vec<(usize, f64)> = Vec::new();
    let mut decoded_const = 0.0;
    for i in 0..ns {
        for j in 0..nt {
            let (g, dl) = (gvar(i, j), dvar(i, j));
            lp.bounds(g, 0.0, 1.0).bounds(dl, 0.0, 1.0);
            match choice[i * nt + j] {
                None => {
                    // γ_{i,j} = γ_{i−1,j}, δ = 0
                    lp.bounds(dl, 0.0, 0.0);
                    match prev(i, j) {
                        None => {
                            lp.bounds(g, 1.0, 1.0);
                        }
                        Some(p) => {
                            lp.le(&[(g, 1.0), (p, -1.0)], 0.0);
                            lp.le(&[(p, 1.0), (g, -1.0)], 0.0);
                        }
                    }
                }
                Some(k) => {
                    // γ_{i,j} ≤ γ_{i−1,j}, δ ≤ γ_{i−1,j} − γ_{i,j}
                    match prev(i, j) {
                        None => {
                            lp.le(&[(dl, 1.0), (g, 1.0)], 1.0);
                        }
                        Some(p) => {
                            lp.le(&[(g, 1.0), (p, -1.0)], 0.0);
                            lp.le(&[(dl, 1.0), (g, 1.0), (p, -1.0)], 0.0);
                        }
                    }
                    // a ≤ decoded + (m−k)(n−k)γ_{i−1,j} − (m+n−1−2k)δ
                    let mut row = vec![(0, 1.0), (dl, cfg.slope(k))];
                    row.extend(decoded.iter().map(|&(v, c)| (v, -w * c)));
                    let mut rhs = w * decoded_const;
                    match prev(i, j) {
                        None => rhs += cfg.corner(k),
                        Some(p) => row.push((p, -cfg.corner(k))),
                    }
                    lp.le(&row, rhs);
                    // r = k(γ_{i−1,j} − γ_{i,j}) + δ
                    let kf = k as f64;
                    decoded.push((g, -kf));
                    decoded.push((dl, 1.0));
                    match prev(i, j) {
                        None => decoded_const += kf,
                        Some(p) => decoded.push((p, kf)),
                    }
                }
            }
        }
    }
    let mut row = vec![(0, 1.0)];
    row.extend(decoded.iter().map(|&(v, c)| (v, -w * c)));
    lp.le(&row, w * decoded_const);
    let sol = solve(&lp.build().ok()?);
    let x = sol.x?;
    Some((x[0], x))
}

/// Exact optimum of the Box scheme over all per-cell segment and skip
/// choices, for grids of at most `MAX_BRUTEFORCE_CELLS` cells.
///
/// Each choice vector induces a linear program; strict inequalities are
/// taken in closure, so the result is the supremum over allocations.
pub fn box_bruteforce_small(b: BandwidthRatio, cfg: &ChannelConfig, n_super: usize, n_time: usize) -> Result<SchemeExponent> {
    check_dims(cfg, n_super, n_time)?;
    let cells = n_super * n_time;
    if cells > MAX_BRUTEFORCE_CELLS {
        return Err(Error::Budget(format!(
            "brute force supports at most {MAX_BRUTEFORCE_CELLS} cells, got {cells}"
        )));
    }
    let options = cfg.min_ant() + 1;
    let total = options.pow(cells as u32);
    let results: Vec<Option<f64>> = (0..total)
        .into_par_iter()
        .map(|mut code| {
            let choice: Vec<CellChoice> = (0..cells)
                .map(|_| {
                    let c = code % options;
                    code /= options;
                    c.checked_sub(1)
                })
                .collect();
            bruteforce_lp(b.get(), cfg, n_super, n_time, &choice).map(|(v, _)| v)
        })
        .collect();
    let mut best = 0.0f64;
    let mut arg = 0;
    for (code, v) in results.into_iter().enumerate() {
        if let Some(v) = v {
            if v > best + TAU {
                best = v;
                arg = code;
            }
        }
    }
    Ok(SchemeExponent::new(SchemeId::BoxBruteforce, b.get(), best)
        .with("ns", n_super)
        .with("nt", n_time)
        .with("choice_code", arg))
}
