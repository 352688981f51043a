//! Time layering followed by a terminal superposition layer.
//!
//! Of the total bandwidth `b`, a share `b_k` goes to a broadcast tail
//! designed to deliver `(m−k)(n−k)` and the rest `b − b_k` is split evenly
//! among many full-power time layers whose rates shrink geometrically
//! towards the first one. With `k = m` there is no tail and the scheme is
//! pure time layering.

use serde::Serialize;

use crate::channel::{dmt_zheng_tse, BandwidthRatio, ChannelConfig};
use crate::error::{domain, Result};
use crate::scheme::{SchemeExponent, SchemeId};

/// Constants of one LSBLEND configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsblendParams {
    /// Band index `kL + a` of the tail (equal to `k` on a single block).
    pub index: usize,
    /// Tail bandwidth.
    pub b_k: f64,
    /// Band index of the first time layer's rate.
    pub p: usize,
    /// `c_0, c_1, …, c_{index−1}`; `c_0` is `+∞`.
    pub c: Vec<f64>,
}

fn c_const(cfg: &ChannelConfig, j: usize) -> f64 {
    if j == 0 {
        return f64::INFINITY;
    }
    let l = cfg.blocks();
    let k = j / l;
    l as f64 * cfg.slope(k) * ((j + 1) as f64 / j as f64).ln()
}

/// Tail bandwidth for band index `j = kL + a`.
pub fn tail_bandwidth(cfg: &ChannelConfig, j: usize) -> f64 {
    let l = cfg.blocks() as f64;
    let (k, a) = (j / cfg.blocks(), j % cfg.blocks());
    (cfg.corner(k) * l * l - a as f64 * l * cfg.slope(k)) / (j + 1) as f64
}

/// Picks the rate band of the first time layer and the exponent argument
/// remaining inside that band.
fn params(b: f64, cfg: &ChannelConfig, j: usize) -> Result<(LsblendParams, f64)> {
    let b_k = tail_bandwidth(cfg, j);
    if !(b > b_k) {
        return domain(format!("b must exceed b_k = {b_k}"));
    }
    let excess = b - b_k;
    let c: Vec<f64> = (0..j).map(|i| c_const(cfg, i)).collect();
    // Σ_{i=p+1}^{j−1} c_i ≤ excess < Σ_{i=p}^{j−1} c_i, scanning downwards
    let mut used = 0.0;
    let mut p = j - 1;
    while excess >= used + c[p] {
        used += c[p];
        p -= 1;
    }
    Ok((LsblendParams { index: j, b_k, p, c }, excess - used))
}

fn evaluate(b: f64, cfg: &ChannelConfig, j: usize) -> Result<(f64, f64, LsblendParams)> {
    let (params, rest) = params(b, cfg, j)?;
    let l = cfg.blocks() as f64;
    let (k1, a1) = (params.p / cfg.blocks(), params.p % cfg.blocks());
    let r1 = (k1 as f64 + (a1 + 1) as f64 / l) * (-rest / (l * cfg.slope(k1))).exp();
    let exponent = l * cfg.corner(k1) - (r1 - k1 as f64) * l * cfg.slope(k1);
    Ok((exponent, r1, params))
}

fn check_k(cfg: &ChannelConfig, k: usize) -> Result<()> {
    if k == 0 || k > cfg.min_ant() {
        return domain(format!("k must lie in 1..={}, got {k}", cfg.min_ant()));
    }
    Ok(())
}

/// Closed-form exponent of LSBLEND with tail parameter `k ∈ 1..=m`.
pub fn lsblend_exponent(b: BandwidthRatio, cfg: &ChannelConfig, k: usize) -> Result<SchemeExponent> {
    cfg.require_single_block("lsblend_exponent")?;
    check_k(cfg, k)?;
    let (exponent, r1, p) = evaluate(b.get(), cfg, k)?;
    let scheme = if k == cfg.min_ant() { SchemeId::Ls } else { SchemeId::Lsblend };
    Ok(SchemeExponent::new(scheme, b.get(), exponent)
        .with("k", k)
        .with("b_k", p.b_k)
        .with("p", p.p)
        .with("r1", r1))
}

/// Best LSBLEND exponent over all feasible `k`.
pub fn lsblend_best(b: BandwidthRatio, cfg: &ChannelConfig) -> Result<SchemeExponent> {
    cfg.require_single_block("lsblend_best")?;
    let mut best: Option<SchemeExponent> = None;
    for k in 1..=cfg.min_ant() {
        if let Ok(e) = lsblend_exponent(b, cfg, k) {
            if best.as_ref().is_none_or(|cur| e.exponent > cur.exponent) {
                best = Some(e);
            }
        }
    }
    match best {
        Some(mut e) => {
            e.scheme = SchemeId::Lsblend;
            Ok(e)
        }
        None => domain(format!("no LSBLEND split is feasible at b = {}", b.get())),
    }
}

/// Multi-block LSBLEND with the tail on band `(k, a)`.
///
/// `(k, a) = (m, 0)` is pure time layering. `(0, 0)` leaves no bandwidth
/// to time layers worth having: the tail alone reaches `MNL` once
/// `b > MNL²`, and that value is returned.
pub fn lsblend_exponent_l(b: BandwidthRatio, cfg: &ChannelConfig, k: usize, a: usize) -> Result<SchemeExponent> {
    let l = cfg.blocks();
    let valid = (k < cfg.min_ant() && a < l) || (k == cfg.min_ant() && a == 0);
    if !valid {
        return domain(format!("band (k={k}, a={a}) out of range for m={} and L={l}", cfg.min_ant()));
    }
    let j = k * l + a;
    let mk = |e: f64| {
        let scheme = if j == cfg.min_ant() * l { SchemeId::Ls } else { SchemeId::Lsblend };
        SchemeExponent::new(scheme, b.get(), e).with("k", k).with("a", a)
    };
    if j == 0 {
        let b0 = tail_bandwidth(cfg, 0);
        if !(b.get() > b0) {
            return domain(format!("b must exceed b_k = {b0}"));
        }
        return Ok(mk(cfg.full_diversity()).with("b_k", b0));
    }
    let (exponent, r1, p) = evaluate(b.get(), cfg, j)?;
    Ok(mk(exponent)
        .with("b_k", p.b_k)
        .with("k1", p.p / l)
        .with("a1", p.p % l)
        .with("r1", r1))
}

/// Best multi-block LSBLEND exponent over all tail bands.
pub fn lsblend_best_l(b: BandwidthRatio, cfg: &ChannelConfig) -> Result<SchemeExponent> {
    let l = cfg.blocks();
    let mut best: Option<SchemeExponent> = None;
    for j in 0..=cfg.min_ant() * l {
        if let Ok(e) = lsblend_exponent_l(b, cfg, j / l, j % l) {
            if best.as_ref().is_none_or(|cur| e.exponent > cur.exponent) {
                best = Some(e);
            }
        }
    }
    let mut e = best.expect("pure time layering is feasible for every b > 0");
    e.scheme = SchemeId::Lsblend;
    Ok(e)
}

/// Rates of `n_time` equal-bandwidth time layers that equalise the
/// per-layer exponents, computed from the last layer (`r = k`) backwards.
///
/// Each step solves `d*(r_{i−1}) = β·r_{i−1} + d*(r_i)` with
/// `β = b_time / n_time`, moving to a lower DMT segment whenever the
/// solution would leave the current one.
pub fn ls_time_layer_rates(b_time: f64, cfg: &ChannelConfig, k: usize, n_time: usize) -> Result<Vec<f64>> {
    cfg.require_single_block("ls_time_layer_rates")?;
    check_k(cfg, k)?;
    if n_time == 0 || !(b_time > 0.0) {
        return domain("need at least one time layer and positive bandwidth");
    }
    let beta = b_time / n_time as f64;
    let mut rates = vec![0.0; n_time];
    rates[n_time - 1] = k as f64;
    let mut seg = k - 1;
    for i in (0..n_time - 1).rev() {
        let target = dmt_zheng_tse(rates[i + 1], cfg);
        loop {
            let delta = (cfg.corner(seg) - beta * seg as f64 - target) / (cfg.slope(seg) + beta);
            if delta >= 0.0 || seg == 0 {
                rates[i] = seg as f64 + delta.clamp(0.0, 1.0);
                break;
            }
            seg -= 1;
        }
    }
    Ok(rates)
}

/// Exponent of LSBLEND with `n_time` time layers and an ideal tail:
/// the minimum of the per-layer exponents and the all-decoded term.
pub fn ls_time_layer_exponent(b: BandwidthRatio, cfg: &ChannelConfig, k: usize, n_time: usize) -> Result<f64> {
    cfg.require_single_block("ls_time_layer_exponent")?;
    check_k(cfg, k)?;
    let b_k = tail_bandwidth(cfg, k);
    if !(b.get() > b_k) {
        return domain(format!("b must exceed b_k = {b_k}"));
    }
    let rates = ls_time_layer_rates(b.get() - b_k, cfg, k, n_time)?;
    let beta = (b.get() - b_k) / n_time as f64;
    let mut decoded = 0.0;
    let mut best = f64::INFINITY;
    for r in &rates {
        best = best.min(beta * decoded + dmt_zheng_tse(*r, cfg));
        decoded += r;
    }
    Ok(best.min(beta * decoded + cfg.corner(k)))
}
