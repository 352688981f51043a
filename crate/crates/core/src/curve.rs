//! Exponent curves over a grid of bandwidth ratios, and their CSV / JSON forms.

use rayon::prelude::*;
use serde::Serialize;

use crate::box_scheme::{box_bruteforce_small, box_max_exponent, FillOrder};
use crate::broadcast::{bs_finite_optimal, bs_limit_exponent, bs_limit_exponent_l};
use crate::channel::{informed_transmitter_bound, BandwidthRatio, ChannelConfig};
use crate::error::{domain, Result};
use crate::lsblend::{lsblend_best, lsblend_best_l, lsblend_exponent, lsblend_exponent_l};
use crate::scheme::{SchemeExponent, SchemeId};

/// Knobs shared by the scheme evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    /// Fixes the LSBLEND tail band instead of searching over it.
    pub k: Option<usize>,
    pub a: Option<usize>,
    pub n_super: usize,
    pub n_time: usize,
    pub order: FillOrder,
    pub epsilon: f64,
    /// Resolution of the Box exponent search.
    pub tol: f64,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            k: None,
            a: None,
            n_super: 16,
            n_time: 16,
            order: FillOrder::Sequential,
            epsilon: 1e-6,
            tol: 1e-4,
        }
    }
}

/// Evaluates one scheme at one bandwidth ratio.
pub fn scheme_exponent(id: SchemeId, b: BandwidthRatio, cfg: &ChannelConfig, opts: &SchemeOptions) -> Result<SchemeExponent> {
    let single = cfg.blocks() == 1;
    match id {
        SchemeId::ItBound => Ok(SchemeExponent::new(id, b.get(), informed_transmitter_bound(b, cfg))),
        SchemeId::BsLimit if single => bs_limit_exponent(b, cfg),
        SchemeId::BsLimit => Ok(bs_limit_exponent_l(b, cfg)),
        SchemeId::BsFinite => bs_finite_optimal(b, cfg, opts.n_super),
        SchemeId::Ls if single => lsblend_exponent(b, cfg, cfg.min_ant()),
        SchemeId::Ls => lsblend_exponent_l(b, cfg, cfg.min_ant(), 0),
        SchemeId::Lsblend => match (opts.k, single) {
            (Some(k), true) => {
                if opts.a.is_some_and(|a| a != 0) {
                    return domain("a must be 0 on a single block");
                }
                lsblend_exponent(b, cfg, k)
            }
            (Some(k), false) => lsblend_exponent_l(b, cfg, k, opts.a.unwrap_or(0)),
            (None, true) => lsblend_best(b, cfg),
            (None, false) => lsblend_best_l(b, cfg),
        },
        SchemeId::BoxGreedy => box_max_exponent(b, cfg, opts.n_super, opts.n_time, opts.order, opts.tol),
        SchemeId::BoxBruteforce => box_bruteforce_small(b, cfg, opts.n_super, opts.n_time),
    }
}

/// Schemes overlaid by a full sweep; the Box scheme is single-block only.
pub fn overlay_schemes(cfg: &ChannelConfig) -> Vec<SchemeId> {
    let mut ids = vec![SchemeId::ItBound, SchemeId::BsLimit, SchemeId::Ls, SchemeId::Lsblend];
    if cfg.blocks() == 1 {
        ids.push(SchemeId::BoxGreedy);
    }
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// `points` values from `b_min` to `b_max` inclusive.
pub fn b_grid(b_min: f64, b_max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if !(b_min > 0.0 && b_max > b_min && b_max.is_finite()) {
        return domain(format!("need 0 < b_min < b_max, got [{b_min}, {b_max}]"));
    }
    if points < 2 {
        return domain(format!("need at least 2 points, got {points}"));
    }
    let last = (points - 1) as f64;
    let grid = (0..points)
        .map(|i| {
            let t = i as f64 / last;
            if i + 1 == points {
                return b_max;
            }
            match spacing {
                Spacing::Log => (b_min.ln() + t * (b_max / b_min).ln()).exp(),
                Spacing::Linear => b_min + t * (b_max - b_min),
            }
        })
        .collect();
    Ok(grid)
}

/// Exponent of one scheme over a grid of `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCurve {
    pub scheme: SchemeId,
    pub cfg: ChannelConfig,
    pub samples: Vec<(f64, f64)>,
}

/// Evaluates `id` at each grid point, in parallel; samples keep grid order.
pub fn sweep(id: SchemeId, cfg: &ChannelConfig, grid: &[f64], opts: &SchemeOptions) -> Result<ExponentCurve> {
    let samples = grid
        .par_iter()
        .map(|&b| scheme_exponent(id, BandwidthRatio::new(b)?, cfg, opts).map(|e| (b, e.exponent)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentCurve {
        scheme: id,
        cfg: *cfg,
        samples,
    })
}

/// Formats with 9 significant digits, `%g` style.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "b,exponent,scheme,m_tx,n_rx,blocks";

/// Curves as CSV rows, one curve after another.
pub fn curves_to_csv(curves: &[ExponentCurve]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in curves {
        for &(b, e) in &c.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                format_sig(b),
                format_sig(e),
                c.scheme,
                c.cfg.tx(),
                c.cfg.rx(),
                c.cfg.blocks()
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct Record {
    b: f64,
    exponent: f64,
    scheme: SchemeId,
    m_tx: usize,
    n_rx: usize,
    blocks: usize,
}

/// Curves as a JSON array with the same fields as the CSV rows.
pub fn curves_to_json(curves: &[ExponentCurve]) -> String {
    let records: Vec<Record> = curves
        .iter()
        .flat_map(|c| {
            c.samples.iter().map(|&(b, exponent)| Record {
                b,
                exponent,
                scheme: c.scheme,
                m_tx: c.cfg.tx(),
                n_rx: c.cfg.rx(),
                blocks: c.cfg.blocks(),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).expect("records serialise");
    s.push('\n');
    s
}
