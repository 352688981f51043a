//! Problem instance and the diversity-multiplexing calculus.
//!
//! Everything here works at the level of SNR exponents: a layer that
//! carries `r log ρ` bits per channel use using the power band
//! `ρ^γ_prev − ρ^γ_cur` has a genie-aided outage probability decaying as
//! `ρ^{-d}`; the functions below return `d`.

use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Tolerance used when snapping a rate onto an integer multiple of the
/// per-block power gap.
pub const TAU_DEC: f64 = 1e-12;

/// Comparison tolerance for power exponents and exponent values.
pub const TAU: f64 = 1e-9;

/// An `M × N` MIMO channel coded over `L` independently faded blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChannelConfig {
    tx: usize,
    rx: usize,
    blocks: usize,
}

impl ChannelConfig {
    pub fn new(tx_antennas: usize, rx_antennas: usize, blocks: usize) -> Result<Self> {
        if tx_antennas == 0 || rx_antennas == 0 || blocks == 0 {
            return Err(Error::Config(format!(
                "antenna and block counts must be positive (M={tx_antennas}, N={rx_antennas}, L={blocks})"
            )));
        }
        Ok(Self {
            tx: tx_antennas,
            rx: rx_antennas,
            blocks,
        })
    }

    /// Single-block shorthand.
    pub fn mimo(tx_antennas: usize, rx_antennas: usize) -> Result<Self> {
        Self::new(tx_antennas, rx_antennas, 1)
    }

    /// `M`
    pub fn tx(&self) -> usize {
        self.tx
    }

    /// `N`
    pub fn rx(&self) -> usize {
        self.rx
    }

    /// `L`
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// `m = min(M, N)`
    pub fn min_ant(&self) -> usize {
        self.tx.min(self.rx)
    }

    /// `n = max(M, N)`
    pub fn max_ant(&self) -> usize {
        self.tx.max(self.rx)
    }

    /// `M·N·L`, the largest exponent any scheme can reach.
    pub fn full_diversity(&self) -> f64 {
        (self.tx * self.rx * self.blocks) as f64
    }

    /// `(m − k)(n − k)`, the zero-rate diversity of the `k`-th DMT segment.
    pub fn corner(&self, k: usize) -> f64 {
        let m = self.min_ant() as f64;
        let n = self.max_ant() as f64;
        let k = k as f64;
        (m - k) * (n - k)
    }

    /// `m + n − 1 − 2k`, the slope of the `k`-th DMT segment.
    pub fn slope(&self, k: usize) -> f64 {
        (self.min_ant() + self.max_ant()) as f64 - 1.0 - 2.0 * k as f64
    }

    pub(crate) fn require_single_block(&self, what: &str) -> Result<()> {
        if self.blocks != 1 {
            return domain(format!("{what} is defined for a single fading block (L = 1), got L = {}", self.blocks));
        }
        Ok(())
    }
}

/// Channel uses per source sample.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct BandwidthRatio(f64);

impl BandwidthRatio {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return domain(format!("bandwidth ratio must be positive and finite, got {b}"));
        }
        Ok(Self(b))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `r = ((kL + a)/L)·Δγ + δ` with `0 ≤ δ < Δγ/L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDecomposition {
    pub k: usize,
    pub a: usize,
    pub delta: f64,
}

impl RateDecomposition {
    pub fn reconstruct(&self, delta_gamma: f64, blocks: usize) -> f64 {
        let idx = (self.k * blocks + self.a) as f64;
        idx / blocks as f64 * delta_gamma + self.delta
    }
}

/// Splits a multiplexing rate into the integer segment index and the
/// fractional remainder.
///
/// At exact multiples of `Δγ/L` the larger index with `δ = 0` is chosen, so
/// the resulting diversity is right-continuous at its jumps.
pub fn decompose_rate(r: f64, delta_gamma: f64, cfg: &ChannelConfig) -> Result<RateDecomposition> {
    if !(delta_gamma > 0.0) {
        return domain(format!("power gap must be positive, got {delta_gamma}"));
    }
    let m = cfg.min_ant();
    if !(r >= 0.0) || r >= m as f64 * delta_gamma {
        return domain(format!(
            "rate {r} exceeds the layer's degrees of freedom m·Δγ = {}",
            m as f64 * delta_gamma
        ));
    }
    let blocks = cfg.blocks();
    let unit = delta_gamma / blocks as f64;
    let q = r / unit;
    let top = m * blocks - 1;
    let idx = ((q + TAU_DEC).floor() as usize).min(top);
    let delta = (r - idx as f64 * unit).max(0.0);
    Ok(RateDecomposition {
        k: idx / blocks,
        a: idx % blocks,
        delta,
    })
}

/// Optimal diversity-multiplexing tradeoff of a single Rayleigh block.
///
/// Piecewise linear through the points `(k, (M−k)(N−k))`, zero for `r ≥ m`.
pub fn dmt_zheng_tse(r: f64, cfg: &ChannelConfig) -> f64 {
    let m = cfg.min_ant();
    if r >= m as f64 {
        return 0.0;
    }
    let r = r.max(0.0);
    let k = (r.floor() as usize).min(m - 1);
    cfg.corner(k) - cfg.slope(k) * (r - k as f64)
}

fn check_gammas(gamma_prev: f64, gamma_cur: f64) -> Result<()> {
    if !(gamma_prev > 0.0 && gamma_prev <= 1.0) {
        return domain(format!("gamma_prev must lie in (0, 1], got {gamma_prev}"));
    }
    if !(gamma_cur >= 0.0) || gamma_cur >= gamma_prev {
        return domain(format!(
            "power exponents must strictly decrease: gamma_cur = {gamma_cur} is not below gamma_prev = {gamma_prev}"
        ));
    }
    Ok(())
}

/// Genie-aided diversity of a superposition layer on a single block.
///
/// `(m−k)(n−k)·γ_prev − (m+n−1−2k)·δ` where `r = k·Δγ + δ`.
pub fn layer_diversity(r: f64, gamma_prev: f64, gamma_cur: f64, cfg: &ChannelConfig) -> Result<f64> {
    cfg.require_single_block("layer_diversity")?;
    layer_diversity_l(r, gamma_prev, gamma_cur, cfg)
}

/// Genie-aided diversity of a superposition layer spread over `L` blocks.
///
/// `L(m−k)(n−k)·γ_prev − (m+n−1−2k)(a·γ_prev + L·δ)` where
/// `r = ((kL + a)/L)·Δγ + δ`.
pub fn layer_diversity_l(r: f64, gamma_prev: f64, gamma_cur: f64, cfg: &ChannelConfig) -> Result<f64> {
    check_gammas(gamma_prev, gamma_cur)?;
    let dec = decompose_rate(r, gamma_prev - gamma_cur, cfg)?;
    let l = cfg.blocks() as f64;
    let d = l * cfg.corner(dec.k) * gamma_prev - cfg.slope(dec.k) * (dec.a as f64 * gamma_prev + l * dec.delta);
    Ok(d.max(0.0))
}

/// Exponent achievable when the transmitter knows the channel.
///
/// `Σ_{i=1..m} min(b, (2i − 1 + n − m)·L)`; an upper bound for every scheme.
pub fn informed_transmitter_bound(b: BandwidthRatio, cfg: &ChannelConfig) -> f64 {
    let m = cfg.min_ant();
    let n = cfg.max_ant();
    let l = cfg.blocks() as f64;
    (1..=m)
        .map(|i| b.get().min((2 * i + n - m - 1) as f64 * l))
        .sum()
}
