//! Pure superposition ("broadcast") layering.
//!
//! Layer `i` occupies the power band `ρ^γ_{i−1} − ρ^γ_i` (with `γ_0 = 1`)
//! and carries a refinement of the source at multiplexing rate `r_i`. The
//! receiver peels layers off in order; the distortion exponent is the
//! minimum over "first failure at layer i" events and the all-decoded event.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{layer_diversity_l, BandwidthRatio, ChannelConfig, TAU};
use crate::error::{domain, Error, Result};
use crate::lp::{solve, LpBuilder};
use crate::scheme::{Allocation, SchemeExponent, SchemeId};

/// Default rate back-off applied to closed-form allocations.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Slack used to close the strict inequalities of the finite-layer program.
pub const STRICT_SLACK: f64 = 1e-6;

/// Distance below a band edge at which flat-region allocations are built.
pub const TAU_BAND: f64 = 1e-6;

/// Largest layer count accepted by [`bs_finite_optimal`].
pub const MAX_FINITE_LAYERS: usize = 8;

/// Power exponents and rates of a superposition stack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerAllocation {
    /// `γ_1 … γ_Ns`; `γ_0 = 1` is implicit.
    pub gammas: Vec<f64>,
    /// `r_1 … r_Ns`.
    pub rates: Vec<f64>,
    pub k_target: usize,
    /// Block offset of the target rate band; zero on a single block.
    pub a_target: usize,
    pub epsilon: f64,
}

impl LayerAllocation {
    pub fn n_layers(&self) -> usize {
        self.gammas.len()
    }

    pub fn gamma_prev(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.gammas[i - 1]
        }
    }

    /// Checks strict decrease of the power exponents and the per-layer rate caps.
    pub fn validate(&self, cfg: &ChannelConfig) -> Result<()> {
        if self.gammas.len() != self.rates.len() || self.gammas.is_empty() {
            return domain("allocation needs one rate per power level and at least one layer");
        }
        let m = cfg.min_ant() as f64;
        for i in 0..self.n_layers() {
            let (prev, cur) = (self.gamma_prev(i), self.gammas[i]);
            if !(cur >= 0.0) || cur >= prev {
                return domain(format!("power exponents must strictly decrease at layer {}", i + 1));
            }
            let r = self.rates[i];
            if !(r >= 0.0) || r >= m * (prev - cur) {
                return domain(format!("rate {r} of layer {} exceeds m·Δγ", i + 1));
            }
        }
        Ok(())
    }

    /// Total multiplexing rate `Σ r_i`.
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

fn check_band_index(cfg: &ChannelConfig, k: usize, a: usize) -> Result<()> {
    if k >= cfg.min_ant() || a >= cfg.blocks() {
        return domain(format!(
            "band (k={k}, a={a}) out of range for m={} and L={}",
            cfg.min_ant(),
            cfg.blocks()
        ));
    }
    Ok(())
}

/// The open band of `b` in which the single-block allocation with
/// rate factor `k + 1` is valid: `((m−k−1)(n−k−1)/(k+1), (m−k)(n−k)/(k+1))`.
pub fn single_block_band(cfg: &ChannelConfig, k: usize) -> (f64, f64) {
    let kk = (k + 1) as f64;
    (cfg.corner(k + 1) / kk, cfg.corner(k) / kk)
}

/// Layer `i` of an allocation on band `(k, a)` has exponent
/// `F·b·Σ_{j<i} Δ_j + E·γ_{i−1} − s·Δ_i`, with `F = (kL+a+1)/L`,
/// `E = L(m−k)(n−k) − a(m+n−1−2k)` and `s = m+n−1−2k`.
struct Geometry {
    k: usize,
    a: usize,
    factor: f64,
    top: f64,
    alpha: f64,
}

impl Geometry {
    fn new(b: f64, cfg: &ChannelConfig, k: usize, a: usize) -> Result<Self> {
        check_band_index(cfg, k, a)?;
        let band = BlockBand::new(cfg, k, a);
        if !band.contains(b) {
            return domain(format!(
                "b = {b} lies outside the open band ({}, {}) for k = {k}, a = {a}",
                band.b_lo, band.b_hi
            ));
        }
        let factor = band.rate_factor(cfg);
        Ok(Self {
            k,
            a,
            factor,
            top: band.exponent_hi,
            alpha: 1.0 + (b * factor - band.exponent_hi) / cfg.slope(k),
        })
    }

    fn allocation(&self, gammas: Vec<f64>, epsilon: f64) -> LayerAllocation {
        let rates = (0..gammas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { gammas[i - 1] };
                (self.factor * (prev - gammas[i]) - epsilon).max(0.0)
            })
            .collect();
        LayerAllocation {
            gammas,
            rates,
            k_target: self.k,
            a_target: self.a,
            epsilon,
        }
    }

    /// `γ_i = α^i`: equal exponents in the limit of many layers.
    fn geometric(&self, n_layers: usize, epsilon: f64) -> LayerAllocation {
        let gammas = (1..=n_layers).map(|i| self.alpha.powi(i as i32)).collect();
        self.allocation(gammas, epsilon)
    }

    /// Power levels equalising all `Ns + 1` exponents, the tail included.
    fn equalised(&self, b: f64, n_layers: usize, epsilon: f64) -> LayerAllocation {
        let bf = b * self.factor;
        let tail = bf * self.alpha.powi(n_layers as i32);
        let gammas = (1..=n_layers)
            .map(|i| ((self.top * self.alpha.powi(i as i32) - tail) / (self.top - tail)).max(0.0))
            .collect();
        self.allocation(gammas, epsilon)
    }

    /// Common exponent of [`Geometry::equalised`] without rate back-off.
    fn finite_exponent(&self, b: f64, n_layers: usize) -> f64 {
        let bf = b * self.factor;
        let an = self.alpha.powi(n_layers as i32);
        bf * self.top * (1.0 - an) / (self.top - bf * an)
    }
}

fn require_layers(n_layers: usize) -> Result<()> {
    if n_layers == 0 {
        return domain("at least one layer is required");
    }
    Ok(())
}

/// Geometric power levels `γ_i = α^i` with `r_i = (k+1)Δγ_i − ε`, which
/// make every layer exponent equal to `(k+1)b` as the layer count grows.
pub fn bs_allocation_thm1(
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    k: usize,
    n_layers: usize,
    epsilon: f64,
) -> Result<LayerAllocation> {
    cfg.require_single_block("bs_allocation_thm1")?;
    require_layers(n_layers)?;
    Ok(Geometry::new(b.get(), cfg, k, 0)?.geometric(n_layers, epsilon))
}

/// Power levels that equalise all `Ns + 1` exponents for a finite stack
/// (the tail term included), with `r_i = (k+1)Δγ_i − ε`.
pub fn bs_allocation_thm1_finite(
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    k: usize,
    n_layers: usize,
    epsilon: f64,
) -> Result<LayerAllocation> {
    cfg.require_single_block("bs_allocation_thm1_finite")?;
    require_layers(n_layers)?;
    Ok(Geometry::new(b.get(), cfg, k, 0)?.equalised(b.get(), n_layers, epsilon))
}

/// Exponent of the equal-exponent allocation with `n_layers` layers.
///
/// `b(k+1)·X(1 − α^Ns) / (X − b(k+1)α^Ns)` with `X = (M−k)(N−k)`; tends to
/// `b(k+1)` as the number of layers grows.
pub fn bs_finite_closed_form(b: BandwidthRatio, cfg: &ChannelConfig, k: usize, n_layers: usize) -> Result<f64> {
    cfg.require_single_block("bs_finite_closed_form")?;
    require_layers(n_layers)?;
    Ok(Geometry::new(b.get(), cfg, k, 0)?.finite_exponent(b.get(), n_layers))
}

/// Multi-block counterpart of [`bs_finite_closed_form`] on band `(k, a)`.
pub fn bs_finite_closed_form_l(b: BandwidthRatio, cfg: &ChannelConfig, k: usize, a: usize, n_layers: usize) -> Result<f64> {
    require_layers(n_layers)?;
    Ok(Geometry::new(b.get(), cfg, k, a)?.finite_exponent(b.get(), n_layers))
}

/// Exponent of the best broadcast scheme with unboundedly many layers, single block.
///
/// Equals `(k+1)b` inside the `k`-th open band and is flat at `(M−k)(N−k)`
/// between `(M−k)(N−k)/(k+1)` and `(M−k)(N−k)/k`; saturates at `MN`.
pub fn bs_limit_exponent(b: BandwidthRatio, cfg: &ChannelConfig) -> Result<SchemeExponent> {
    cfg.require_single_block("bs_limit_exponent")?;
    let bv = b.get();
    let mk = |e: f64, k: usize, flat: bool| {
        SchemeExponent::new(SchemeId::BsLimit, bv, e)
            .with("k", k)
            .with("flat", flat)
    };
    if bv >= cfg.corner(0) {
        return Ok(mk(cfg.corner(0), 0, true));
    }
    for k in 0..cfg.min_ant() {
        let (lo, hi) = single_block_band(cfg, k);
        if bv > lo && bv < hi {
            return Ok(mk((k + 1) as f64 * bv, k, false));
        }
        if k >= 1 && bv >= hi && bv <= cfg.corner(k) / k as f64 {
            return Ok(mk(cfg.corner(k), k, true));
        }
    }
    unreachable!("single-block bands and flat regions cover (0, MN)")
}

/// Band `j = kL + a` of the multi-block broadcast exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockBand {
    pub k: usize,
    pub a: usize,
    /// Exponent at the lower and upper `b` edges.
    pub exponent_lo: f64,
    pub exponent_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl BlockBand {
    pub fn new(cfg: &ChannelConfig, k: usize, a: usize) -> Self {
        let l = cfg.blocks() as f64;
        let j1 = (k * cfg.blocks() + a + 1) as f64;
        let exponent_hi = l * cfg.corner(k) - a as f64 * cfg.slope(k);
        let exponent_lo = l * cfg.corner(k) - (a + 1) as f64 * cfg.slope(k);
        Self {
            k,
            a,
            exponent_lo,
            exponent_hi,
            b_lo: l * exponent_lo / j1,
            b_hi: l * exponent_hi / j1,
        }
    }

    /// Exponent gained per unit of bandwidth, `(kL + a + 1)/L`.
    pub fn rate_factor(&self, cfg: &ChannelConfig) -> f64 {
        (self.k * cfg.blocks() + self.a + 1) as f64 / cfg.blocks() as f64
    }

    pub fn contains(&self, b: f64) -> bool {
        b > self.b_lo && b < self.b_hi
    }
}

/// Bands in order of decreasing exponent (`j = 0, 1, …, mL − 1`).
pub fn block_bands(cfg: &ChannelConfig) -> Vec<BlockBand> {
    (0..cfg.min_ant() * cfg.blocks())
        .map(|j| BlockBand::new(cfg, j / cfg.blocks(), j % cfg.blocks()))
        .collect()
}

/// Where `b` falls among the multi-block bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandChoice {
    pub band: BlockBand,
    /// `b` sits in a gap (or above saturation) and the allocation ignores
    /// the excess bandwidth.
    pub flat: bool,
    /// Bandwidth the allocation is designed for.
    pub effective_b: f64,
    pub exponent: f64,
}

/// Locates `b` in the band structure. Gaps between consecutive bands take
/// the constant exponent reached at the right edge of the lower band.
pub fn locate_band(b: f64, cfg: &ChannelConfig) -> BandChoice {
    let bands = block_bands(cfg);
    let top = bands[0];
    if b >= top.b_hi {
        return BandChoice {
            band: top,
            flat: true,
            effective_b: top.b_hi - TAU_BAND,
            exponent: top.exponent_hi,
        };
    }
    for (j, band) in bands.iter().enumerate() {
        if band.contains(b) {
            return BandChoice {
                band: *band,
                flat: false,
                effective_b: b,
                exponent: b * band.rate_factor(cfg),
            };
        }
        if b <= band.b_lo {
            if let Some(lower) = bands.get(j + 1) {
                if b >= lower.b_hi {
                    return BandChoice {
                        band: *lower,
                        flat: true,
                        effective_b: lower.b_hi - TAU_BAND,
                        exponent: lower.exponent_hi,
                    };
                }
            }
        }
    }
    unreachable!("bands and gaps cover (0, MNL²)")
}

/// Multi-block broadcast exponent: `b(kL+a+1)/L` inside band `(k, a)`,
/// constant across the gaps between bands, `MNL` for `b ≥ MNL²`.
pub fn bs_limit_exponent_l(b: BandwidthRatio, cfg: &ChannelConfig) -> SchemeExponent {
    let choice = locate_band(b.get(), cfg);
    SchemeExponent::new(SchemeId::BsLimit, b.get(), choice.exponent)
        .with("k", choice.band.k)
        .with("a", choice.band.a)
        .with("flat", choice.flat)
        .with("gap_fill", choice.flat && cfg.blocks() > 1)
}

/// Multi-block geometric allocation `γ_i = α^i`, `r_i = ((kL+a+1)/L)Δγ_i − ε`.
pub fn bs_allocation_thm4(
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    k: usize,
    a: usize,
    n_layers: usize,
    epsilon: f64,
) -> Result<LayerAllocation> {
    require_layers(n_layers)?;
    Ok(Geometry::new(b.get(), cfg, k, a)?.geometric(n_layers, epsilon))
}

/// Multi-block allocation equalising all `Ns + 1` exponents on band `(k, a)`.
pub fn bs_allocation_thm4_finite(
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    k: usize,
    a: usize,
    n_layers: usize,
    epsilon: f64,
) -> Result<LayerAllocation> {
    require_layers(n_layers)?;
    Ok(Geometry::new(b.get(), cfg, k, a)?.equalised(b.get(), n_layers, epsilon))
}

/// Equal-exponent allocation for any `b`.
///
/// Uses the band containing `b`. Inside a flat region or gap the band just
/// below is used, built at a bandwidth `TAU_BAND` under its upper edge,
/// and the excess bandwidth is left unused.
pub fn bs_allocation(
    b: BandwidthRatio,
    cfg: &ChannelConfig,
    n_layers: usize,
    epsilon: f64,
) -> Result<(LayerAllocation, BandChoice)> {
    require_layers(n_layers)?;
    let choice = locate_band(b.get(), cfg);
    let geometry = Geometry::new(choice.effective_b, cfg, choice.band.k, choice.band.a)?;
    Ok((geometry.equalised(choice.effective_b, n_layers, epsilon), choice))
}

/// Exponents `a(1), …, a(Ns), a(Ns+1)`; the scheme exponent is their minimum.
pub fn bs_layer_exponents(alloc: &LayerAllocation, b: BandwidthRatio, cfg: &ChannelConfig) -> Result<Vec<f64>> {
    if alloc.gammas.len() != alloc.rates.len() {
        return domain("allocation needs one rate per power level");
    }
    let mut out = Vec::with_capacity(alloc.n_layers() + 1);
    let mut decoded = 0.0;
    for i in 0..alloc.n_layers() {
        let d = layer_diversity_l(alloc.rates[i], alloc.gamma_prev(i), alloc.gammas[i], cfg)?;
        out.push(b.get() * decoded + d);
        decoded += alloc.rates[i];
    }
    out.push(b.get() * decoded);
    Ok(out)
}

/// `min_i a(i)` for an allocation.
pub fn bs_allocation_exponent(alloc: &LayerAllocation, b: BandwidthRatio, cfg: &ChannelConfig) -> Result<f64> {
    Ok(bs_layer_exponents(alloc, b, cfg)?.into_iter().fold(f64::INFINITY, f64::min))
}

struct FiniteLp {
    value: f64,
    gammas: Vec<f64>,
    rates: Vec<f64>,
}

/// Solves the finite-layer program for a fixed vector of segment indices.
fn finite_layer_lp(b: f64, cfg: &ChannelConfig, ks: &[usize], slack: f64) -> Option<FiniteLp> {
    let ns = ks.len();
    let a_var = 0;
    let gamma = |i: usize| i; // γ_i for i ≥ 1
    let delta = |i: usize| ns + i; // δ_i for i ≥ 1
    let mut lp = LpBuilder::new(2 * ns + 1).maximize(a_var, 1.0);
    lp.bounds(a_var, 0.0, cfg.full_diversity());
    for i in 1..=ns {
        lp.bounds(gamma(i), 0.0, 1.0).bounds(delta(i), 0.0, 1.0);
    }

    // Linear expression of r_i as (terms, constant).
    let rate = |i: usize| -> (Vec<(usize, f64)>, f64) {
        let k = ks[i - 1] as f64;
        let mut terms = vec![(gamma(i), -k), (delta(i), 1.0)];
        let constant = if i == 1 {
            k
        } else {
            terms.push((gamma(i - 1), k));
            0.0
        };
        (terms, constant)
    };

    let mut decoded: Vec<(usize, f64)> = Vec::new();
    let mut decoded_const = 0.0;
    for i in 1..=ns {
        let k = ks[i - 1];
        // γ_i + slack ≤ γ_{i−1}, δ_i + slack ≤ γ_{i−1} − γ_i
        if i == 1 {
            lp.le(&[(gamma(1), 1.0)], 1.0 - slack);
            lp.le(&[(delta(1), 1.0), (gamma(1), 1.0)], 1.0 - slack);
        } else {
            lp.le(&[(gamma(i), 1.0), (gamma(i - 1), -1.0)], -slack);
            lp.le(&[(delta(i), 1.0), (gamma(i), 1.0), (gamma(i - 1), -1.0)], -slack);
        }
        // a − b·Σ_{j<i} r_j − (m−k)(n−k)γ_{i−1} + (m+n−1−2k)δ_i ≤ 0
        let mut row = vec![(a_var, 1.0), (delta(i), cfg.slope(k))];
        row.extend(decoded.iter().map(|&(v, c)| (v, -b * c)));
        let mut rhs = b * decoded_const;
        if i == 1 {
            rhs += cfg.corner(k);
        } else {
            row.push((gamma(i - 1), -cfg.corner(k)));
        }
        lp.le(&row, rhs);

        let (terms, constant) = rate(i);
        decoded.extend(terms);
        decoded_const += constant;
    }
    let mut row = vec![(a_var, 1.0)];
    row.extend(decoded.iter().map(|&(v, c)| (v, -b * c)));
    lp.le(&row, b * decoded_const);

    let sol = solve(&lp.build().ok()?);
    let x = sol.x?;
    let gammas: Vec<f64> = (1..=ns).map(|i| x[gamma(i)]).collect();
    let rates = (1..=ns)
        .map(|i| {
            let prev = if i == 1 { 1.0 } else { gammas[i - 2] };
            ks[i - 1] as f64 * (prev - gammas[i - 1]) + x[delta(i)]
        })
        .collect();
    Some(FiniteLp {
        value: x[a_var],
        gammas,
        rates,
    })
}

fn index_vectors(m: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = m.pow(len as u32);
    (0..total).map(move |mut code| {
        let mut v = vec![0; len];
        for slot in v.iter_mut().rev() {
            *slot = code % m;
            code /= m;
        }
        v
    })
}

/// Best exponent of a broadcast scheme with at most `n_layers` layers.
///
/// Enumerates every segment-index vector in `{0..m−1}^Ns'` for each
/// `Ns' ≤ n_layers` and solves the induced linear program.
pub fn bs_finite_optimal(b: BandwidthRatio, cfg: &ChannelConfig, n_layers: usize) -> Result<SchemeExponent> {
    cfg.require_single_block("bs_finite_optimal")?;
    if n_layers == 0 || n_layers > MAX_FINITE_LAYERS {
        return Err(Error::Budget(format!(
            "finite-layer optimisation supports 1..={MAX_FINITE_LAYERS} layers, got {n_layers}"
        )));
    }
    let m = cfg.min_ant();
    let candidates: Vec<Vec<usize>> = (1..=n_layers).flat_map(|ns| index_vectors(m, ns)).collect();
    let solved: Vec<Option<FiniteLp>> = candidates
        .par_iter()
        .map(|ks| finite_layer_lp(b.get(), cfg, ks, STRICT_SLACK))
        .collect();

    let mut best: Option<(usize, FiniteLp)> = None;
    for (idx, sol) in solved.into_iter().enumerate() {
        if let Some(sol) = sol {
            if best.as_ref().is_none_or(|(_, cur)| sol.value > cur.value + TAU) {
                best = Some((idx, sol));
            }
        }
    }
    let mut out = SchemeExponent::new(SchemeId::BsFinite, b.get(), 0.0).with("n_layers", n_layers);
    if let Some((idx, sol)) = best {
        let ks = &candidates[idx];
        out.exponent = sol.value.max(0.0);
        out = out
            .with("ks", ks.clone())
            .with_allocation(Allocation::Layers(LayerAllocation {
                gammas: sol.gammas,
                rates: sol.rates,
                k_target: ks[0],
                a_target: 0,
                epsilon: STRICT_SLACK,
            }));
    }
    Ok(out)
}

/// Minimum of the applicable broadcast upper bounds: `(M−k)(N−k)` when
/// `b ≤ (M−k)(N−k)/k`, and `b(k+1)` when `b > (M−k−1)(N−k−1)/(k+1)`.
pub fn bs_upper_envelope(b: BandwidthRatio, cfg: &ChannelConfig) -> Result<f64> {
    cfg.require_single_block("bs_upper_envelope")?;
    let bv = b.get();
    let mut bound = cfg.corner(0);
    for k in 0..cfg.min_ant() {
        if k >= 1 && bv <= cfg.corner(k) / k as f64 {
            bound = bound.min(cfg.corner(k));
        }
        if bv > cfg.corner(k + 1) / (k + 1) as f64 {
            bound = bound.min(bv * (k + 1) as f64);
        }
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(b: f64) -> BandwidthRatio {
        BandwidthRatio::new(b).unwrap()
    }

    fn cfg(m: usize, n: usize, l: usize) -> ChannelConfig {
        ChannelConfig::new(m, n, l).unwrap()
    }

    #[test]
    fn thm1_gammas() {
        let a = bs_allocation_thm1(bw(2.0), &cfg(3, 4, 1), 1, 3, 0.0).unwrap();
        assert_eq!(a.gammas, vec![0.5, 0.25, 0.125]);
        let a = bs_allocation_thm1(bw(0.5), &cfg(1, 1, 1), 0, 2, 0.0).unwrap();
        assert_eq!(a.gammas, vec![0.5, 0.25]);
    }

    #[test]
    fn thm1_rejects_flat_region() {
        assert!(bs_allocation_thm1(bw(0.8), &cfg(3, 4, 1), 2, 3, 0.0).is_err());
        assert!(bs_allocation_thm1(bw(3.0), &cfg(3, 4, 1), 1, 3, 0.0).is_err());
        assert!(bs_allocation_thm1(bw(1.0), &cfg(3, 4, 1), 3, 3, 0.0).is_err());
    }

    #[test]
    fn thm1_layers_share_one_exponent() {
        let c = cfg(3, 4, 1);
        let alloc = bs_allocation_thm1(bw(2.0), &c, 1, 20, 1e-4).unwrap();
        alloc.validate(&c).unwrap();
        for e in bs_layer_exponents(&alloc, bw(2.0), &c).unwrap() {
            assert!((e - 4.0).abs() < 0.01, "{e}");
        }
    }

    #[test]
    fn closed_form_examples() {
        let v = bs_finite_closed_form(bw(2.0), &cfg(3, 4, 1), 1, 3).unwrap();
        assert!((v - 21.0 / 5.5).abs() < 1e-12);
        let v = bs_finite_closed_form(bw(2.0), &cfg(3, 4, 1), 1, 200).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = bs_finite_closed_form(bw(0.5), &cfg(1, 1, 1), 0, 1).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_finite_allocation() {
        let c = cfg(3, 4, 1);
        for (b, k) in [(2.0, 1), (0.5, 2), (8.0, 0)] {
            for ns in [1, 3, 6] {
                let alloc = bs_allocation_thm1_finite(bw(b), &c, k, ns, 1e-9).unwrap();
                let direct = bs_allocation_exponent(&alloc, bw(b), &c).unwrap();
                let closed = bs_finite_closed_form(bw(b), &c, k, ns).unwrap();
                assert!((direct - closed).abs() < 1e-6, "b={b} ns={ns}: {direct} vs {closed}");
            }
        }
    }

    #[test]
    fn closed_form_grows_with_layers() {
        let c = cfg(3, 4, 1);
        let mut prev = 0.0;
        for ns in 1..30 {
            let v = bs_finite_closed_form(bw(2.5), &c, 1, ns).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn limit_examples() {
        let c = cfg(3, 4, 1);
        assert!((bs_limit_exponent(bw(0.5), &c).unwrap().exponent - 1.5).abs() < 1e-12);
        assert_eq!(bs_limit_exponent(bw(0.8), &c).unwrap().exponent, 2.0);
        assert_eq!(bs_limit_exponent(bw(20.0), &c).unwrap().exponent, 12.0);
    }

    #[test]
    fn limit_l_examples() {
        let c = cfg(1, 1, 2);
        assert!((bs_limit_exponent_l(bw(0.5), &c).exponent - 0.5).abs() < 1e-12);
        assert_eq!(bs_limit_exponent_l(bw(16.0), &c).exponent, 2.0);
        assert_eq!(bs_limit_exponent_l(bw(1.5), &c).exponent, 1.0);
        assert!((bs_limit_exponent_l(bw(3.0), &c).exponent - 1.5).abs() < 1e-12);
        assert!((bs_limit_exponent_l(bw(0.5), &cfg(3, 4, 1)).exponent - 1.5).abs() < 1e-12);
    }

    #[test]
    fn thm4_reduces_to_thm1() {
        let c = cfg(1, 1, 1);
        let a4 = bs_allocation_thm4(bw(0.5), &c, 0, 0, 4, 0.0).unwrap();
        let a1 = bs_allocation_thm1(bw(0.5), &c, 0, 4, 0.0).unwrap();
        for (x, y) in a4.gammas.iter().zip(&a1.gammas) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn thm4_layers_share_one_exponent() {
        let c = cfg(1, 1, 2);
        let band = BlockBand::new(&c, 0, 1);
        let b = 0.5 * (band.b_lo + band.b_hi);
        let eps = 1e-6;
        let alloc = bs_allocation_thm4(bw(b), &c, 0, 1, 20, eps).unwrap();
        let ex = bs_layer_exponents(&alloc, bw(b), &c).unwrap();
        let target = b * band.rate_factor(&c);
        // the tail term carries the finite-Ns deficit b·(factor)·α^Ns
        for e in &ex[..ex.len() - 1] {
            assert!((e - target).abs() < 10.0 * eps * 20.0, "{e} vs {target}");
        }
    }

    #[test]
    fn thm4_valid_mid_band() {
        let c = cfg(2, 2, 2);
        let band = BlockBand::new(&c, 0, 0);
        let b = 0.5 * (band.b_lo + band.b_hi);
        let alloc = bs_allocation_thm4(bw(b), &c, 0, 0, 8, 1e-6).unwrap();
        alloc.validate(&c).unwrap();
        assert!(alloc.gammas.iter().all(|&g| g > 0.0 && g < 1.0));
        assert!(bs_allocation_thm4(bw(band.b_hi * 1.01), &c, 0, 0, 8, 1e-6).is_err());
    }

    #[test]
    fn single_layer_reduction() {
        let c = cfg(3, 4, 1);
        let alloc = LayerAllocation {
            gammas: vec![0.0],
            rates: vec![0.7],
            k_target: 0,
            a_target: 0,
            epsilon: 0.0,
        };
        let ex = bs_layer_exponents(&alloc, bw(2.0), &c).unwrap();
        assert!((ex[0] - crate::channel::dmt_zheng_tse(0.7, &c)).abs() < 1e-12);
        assert!((ex[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_allocation_has_zero_exponent() {
        let c = cfg(2, 2, 1);
        let alloc = LayerAllocation {
            gammas: vec![0.5, 0.0],
            rates: vec![0.0, 0.0],
            k_target: 0,
            a_target: 0,
            epsilon: 0.0,
        };
        let ex = bs_layer_exponents(&alloc, bw(1.0), &c).unwrap();
        assert_eq!(ex, vec![4.0, 2.0, 0.0]);
    }

    #[test]
    fn finite_optimal_single_layer_siso() {
        let r = bs_finite_optimal(bw(0.5), &cfg(1, 1, 1), 1).unwrap();
        assert!((r.exponent - 1.0 / 3.0).abs() < 1e-6, "{}", r.exponent);
    }

    #[test]
    fn finite_optimal_budget() {
        assert!(matches!(bs_finite_optimal(bw(1.0), &cfg(2, 2, 1), 9), Err(Error::Budget(_))));
        assert!(bs_finite_optimal(bw(1.0), &cfg(2, 2, 2), 2).is_err());
    }

    #[test]
    fn finite_optimal_saturated_region_bounded() {
        let r = bs_finite_optimal(bw(20.0), &cfg(3, 4, 1), 4).unwrap();
        assert!(r.exponent <= 12.0 + 1e-9);
        assert!(r.exponent > 11.0);
    }

    #[test]
    fn envelope_examples() {
        let c = cfg(3, 4, 1);
        assert!((bs_upper_envelope(bw(0.5), &c).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(bs_upper_envelope(bw(0.8), &c).unwrap(), 2.0);
    }

    #[test]
    fn flat_band_allocation_ignores_excess_bandwidth() {
        let c = cfg(3, 4, 1);
        let (alloc, choice) = bs_allocation(bw(0.8), &c, 16, 1e-6).unwrap();
        assert!(choice.flat);
        assert_eq!(choice.band.k, 2);
        assert!(choice.effective_b < 2.0 / 3.0 && choice.effective_b > 2.0 / 3.0 - 1e-5);
        alloc.validate(&c).unwrap();
        // at the band edge α → 1 and Ns layers reach E·Ns·E/(s + Ns·E) with E = s = 2
        let e = bs_allocation_exponent(&alloc, bw(0.8), &c).unwrap();
        let edge = bs_finite_closed_form(bw(choice.effective_b), &c, 2, 16).unwrap();
        assert!((edge - 2.0 * 32.0 / 34.0).abs() < 1e-4, "{edge}");
        assert!((e - edge).abs() < 1e-4, "{e} vs {edge}");
    }

    #[test]
    fn multi_block_equalised_allocation() {
        let c = cfg(2, 2, 2);
        for (k, a) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let band = BlockBand::new(&c, k, a);
            let b = bw(0.3 * band.b_lo + 0.7 * band.b_hi);
            for ns in [1, 4, 9] {
                let alloc = bs_allocation_thm4_finite(b, &c, k, a, ns, 1e-10).unwrap();
                let ex = bs_layer_exponents(&alloc, b, &c).unwrap();
                let closed = bs_finite_closed_form_l(b, &c, k, a, ns).unwrap();
                for e in ex {
                    assert!((e - closed).abs() < 1e-6, "({k},{a}) ns={ns}: {e} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn gap_allocation_reaches_gap_value() {
        let c = cfg(1, 1, 2);
        let (alloc, choice) = bs_allocation(bw(1.5), &c, 6, 1e-9).unwrap();
        assert!(choice.flat);
        assert_eq!((choice.band.k, choice.band.a), (0, 1));
        let e = bs_allocation_exponent(&alloc, bw(1.5), &c).unwrap();
        assert!((e - 6.0 / 7.0).abs() < 1e-4, "{e}");
    }
}
