//! Finite-SNR simulation of outage events and end-to-end distortion.
//!
//! Trials are split into fixed-size shards. Shard `s` draws from a ChaCha8
//! stream selected by `(seed, s)` and shard results are combined in shard
//! order, so estimates do not depend on the number of worker threads.
//! Every SNR point of a plan reuses the same channel draws.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::box_scheme::BoxGrid;
use crate::broadcast::LayerAllocation;
use crate::channel::{BandwidthRatio, ChannelConfig};
use crate::error::{domain, Error, Result};
use crate::scheme::Allocation;

/// Trials per shard.
pub const SHARD_SIZE: u64 = 4096;

/// Minimum number of events for an outage estimate to count as resolved.
pub const MIN_EVENTS: u64 = 10;

/// Trial count, seed and SNR grid of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPlan {
    pub trials: u64,
    pub seed: u64,
    pub snr_grid_db: Vec<f64>,
}

impl SimPlan {
    pub fn new(trials: u64, seed: u64, snr_grid_db: Vec<f64>) -> Result<Self> {
        if trials == 0 {
            return domain("at least one trial is required");
        }
        if snr_grid_db.is_empty() || snr_grid_db.iter().any(|x| !x.is_finite()) {
            return domain("the SNR grid must be a non-empty list of finite values");
        }
        if snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return domain("the SNR grid must be strictly increasing");
        }
        Ok(Self {
            trials,
            seed,
            snr_grid_db,
        })
    }

    fn shards(&self) -> Vec<(u64, u64)> {
        let n = self.trials.div_ceil(SHARD_SIZE);
        (0..n)
            .map(|s| (s, SHARD_SIZE.min(self.trials - s * SHARD_SIZE)))
            .collect()
    }
}

/// Ascending eigenvalues of `H_l H_lᴴ` for each block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSample {
    pub eigenvalues: Vec<Vec<f64>>,
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn cn<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re * s, im * s)
}

/// Draws one channel realisation with i.i.d. `CN(0, 1)` entries per block.
pub fn sample_channel<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> ChannelSample {
    let (m, n) = (cfg.min_ant(), cfg.max_ant());
    let eigenvalues = (0..cfg.blocks())
        .map(|_| {
            if m == 1 {
                return vec![(0..n).map(|_| cn(rng).norm_sqr()).sum()];
            }
            // the m × m Gram matrix shares its eigenvalues with H Hᴴ
            let h = DMatrix::from_fn(n, m, |_, _| cn(rng));
            let gram = h.adjoint() * &h;
            let mut ev: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|x| x.max(0.0)).collect();
            ev.sort_by(f64::total_cmp);
            ev
        })
        .collect();
    ChannelSample { eigenvalues }
}

fn snr_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Per-block average of `log₂det(I + P/M · H Hᴴ)`.
fn log_det(sample: &ChannelSample, power: f64, tx: usize) -> f64 {
    let scale = power / tx as f64;
    let total: f64 = sample
        .eigenvalues
        .iter()
        .flat_map(|block| block.iter())
        .map(|&l| (scale * l).ln_1p())
        .sum();
    total / std::f64::consts::LN_2 / sample.eigenvalues.len() as f64
}

/// Mutual information of a layer with power exponents `γ_prev > γ_cur`,
/// bits per channel use. A layer with `γ_cur = 0` is the bottom of the
/// stack and sees no interference from below.
fn layer_mi(sample: &ChannelSample, rho: f64, gamma_prev: f64, gamma_cur: f64, tx: usize) -> f64 {
    let top = log_det(sample, rho.powf(gamma_prev), tx);
    if gamma_cur == 0.0 {
        top
    } else {
        top - log_det(sample, rho.powf(gamma_cur), tx)
    }
}

/// A Monte Carlo probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub snr_db: f64,
    pub probability: f64,
    pub stderr: f64,
    pub events: u64,
    pub trials: u64,
}

impl OutageEstimate {
    fn new(snr_db: f64, events: u64, trials: u64) -> Self {
        let p = events as f64 / trials as f64;
        Self {
            snr_db,
            probability: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            events,
            trials,
        }
    }

    /// At least `MIN_EVENTS` events were observed.
    pub fn is_resolved(&self) -> bool {
        self.events >= MIN_EVENTS
    }
}

/// Runs `per_trial` over every trial of the plan, accumulating one `f64`
/// per SNR point and its square.
fn accumulate<F>(cfg: &ChannelConfig, plan: &SimPlan, per_trial: F) -> Vec<(f64, f64)>
where
    F: Fn(&ChannelSample, usize, f64) -> f64 + Sync,
{
    let rhos: Vec<f64> = plan.snr_grid_db.iter().map(|&s| snr_linear(s)).collect();
    let partial: Vec<Vec<(f64, f64)>> = plan
        .shards()
        .into_par_iter()
        .map(|(shard, count)| {
            let mut rng = shard_rng(plan.seed, shard);
            let mut acc = vec![(0.0, 0.0); rhos.len()];
            for _ in 0..count {
                let sample = sample_channel(cfg, &mut rng);
                for (p, &rho) in rhos.iter().enumerate() {
                    let v = per_trial(&sample, p, rho);
                    acc[p].0 += v;
                    acc[p].1 += v * v;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![(0.0, 0.0); rhos.len()];
    for shard in partial {
        for (t, s) in total.iter_mut().zip(shard) {
            t.0 += s.0;
            t.1 += s.1;
        }
    }
    total
}

fn check_layer(r: f64, gamma_prev: f64, gamma_cur: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return domain(format!("rate must be non-negative, got {r}"));
    }
    if !(gamma_prev > 0.0 && gamma_prev <= 1.0 && gamma_cur >= 0.0 && gamma_cur < gamma_prev) {
        return domain(format!(
            "power exponents must satisfy 1 ≥ gamma_prev > gamma_cur ≥ 0, got {gamma_prev} and {gamma_cur}"
        ));
    }
    Ok(())
}

/// Outage probability of one genie-aided layer at every SNR of the plan.
///
/// Outage means the block-averaged mutual information falls below
/// `r·log₂ρ`.
pub fn layer_outage_curve(r: f64, gamma_prev: f64, gamma_cur: f64, cfg: &ChannelConfig, plan: &SimPlan) -> Result<Vec<OutageEstimate>> {
    check_layer(r, gamma_prev, gamma_cur)?;
    let tx = cfg.tx();
    let sums = accumulate(cfg, plan, |sample, _, rho| {
        let mi = layer_mi(sample, rho, gamma_prev, gamma_cur, tx);
        if mi < r * rho.log2() {
            1.0
        } else {
            0.0
        }
    });
    Ok(plan
        .snr_grid_db
        .iter()
        .zip(sums)
        .map(|(&snr, (events, _))| OutageEstimate::new(snr, events.round() as u64, plan.trials))
        .collect())
}

/// Outage probability of one genie-aided layer at a single SNR.
pub fn layer_outage_prob(
    r: f64,
    gamma_prev: f64,
    gamma_cur: f64,
    snr_db: f64,
    cfg: &ChannelConfig,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    let plan = SimPlan::new(trials, seed, vec![snr_db])?;
    Ok(layer_outage_curve(r, gamma_prev, gamma_cur, cfg, &plan)?[0])
}

/// Mean of a per-trial quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub snr_db: f64,
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// One decoding step of a layered scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Stage {
    gamma_prev: f64,
    gamma_cur: f64,
    rate: f64,
    /// Source exponent gained per unit of `rate` once decoded.
    weight: f64,
}

fn stages_of_layers(alloc: &LayerAllocation, b: f64) -> Vec<Stage> {
    (0..alloc.n_layers())
        .map(|i| Stage {
            gamma_prev: alloc.gamma_prev(i),
            gamma_cur: alloc.gammas[i],
            rate: alloc.rates[i],
            weight: b,
        })
        .collect()
}

fn stages_of_grid(grid: &BoxGrid, b: f64) -> Vec<Stage> {
    grid.visit_order()
        .into_iter()
        .map(|(i, j)| Stage {
            gamma_prev: grid.gamma_prev(i, j),
            gamma_cur: grid.gamma[i][j],
            rate: grid.rate[i][j],
            weight: b / grid.nt as f64,
        })
        .collect()
}

/// Expected distortion of a layered scheme under successive decoding.
///
/// Per channel draw, stages are decoded in order until the first one whose
/// mutual information falls short of its rate; the distortion of that
/// draw is `ρ^{−(decoded source exponent)}`. Returns one estimate per SNR
/// point of the plan.
pub fn scheme_distortion_curve(alloc: &Allocation, b: BandwidthRatio, cfg: &ChannelConfig, plan: &SimPlan) -> Result<Vec<MeanEstimate>> {
    let stages = match alloc {
        Allocation::Layers(a) => {
            if a.gammas.len() != a.rates.len() {
                return domain("allocation needs one rate per power level");
            }
            stages_of_layers(a, b.get())
        }
        Allocation::Grid(g) => {
            cfg.require_single_block("Box simulation")?;
            stages_of_grid(g, b.get())
        }
    };
    for s in &stages {
        if s.gamma_cur != s.gamma_prev || s.rate > 0.0 {
            check_layer(s.rate, s.gamma_prev, s.gamma_cur)?;
        }
    }
    let tx = cfg.tx();
    let sums = accumulate(cfg, plan, |sample, _, rho| {
        let log_rho = rho.log2();
        let mut decoded = 0.0;
        for s in &stages {
            if s.rate == 0.0 {
                continue;
            }
            if layer_mi(sample, rho, s.gamma_prev, s.gamma_cur, tx) < s.rate * log_rho {
                break;
            }
            decoded += s.weight * s.rate;
        }
        rho.powf(-decoded)
    });
    let n = plan.trials as f64;
    Ok(plan
        .snr_grid_db
        .iter()
        .zip(sums)
        .map(|(&snr, (s, s2))| {
            let mean = s / n;
            let var = if plan.trials > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            MeanEstimate {
                snr_db: snr,
                mean,
                stderr: (var / n).sqrt(),
                trials: plan.trials,
            }
        })
        .collect())
}

/// Expected distortion at a single SNR.
pub fn scheme_distortion(
    alloc: &Allocation,
    b: BandwidthRatio,
    snr_db: f64,
    cfg: &ChannelConfig,
    trials: u64,
    seed: u64,
) -> Result<MeanEstimate> {
    let plan = SimPlan::new(trials, seed, vec![snr_db])?;
    Ok(scheme_distortion_curve(alloc, b, cfg, &plan)?[0])
}

/// Where successive decoding stops, per SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodingProfile {
    pub snr_db: f64,
    /// `stop[i]`: probability that stages before `i` decode and stage `i` fails.
    pub stop: Vec<f64>,
    /// `genie[i]`: probability that stage `i` fails with all earlier stages known.
    pub genie: Vec<f64>,
    pub trials: u64,
}

/// Per-stage failure probabilities of the successive decoder, next to the
/// genie-aided outage probability of the same stage.
pub fn decoding_profile(alloc: &Allocation, b: BandwidthRatio, cfg: &ChannelConfig, plan: &SimPlan) -> Result<Vec<DecodingProfile>> {
    let stages = match alloc {
        Allocation::Layers(a) => stages_of_layers(a, b.get()),
        Allocation::Grid(g) => {
            cfg.require_single_block("Box simulation")?;
            stages_of_grid(g, b.get())
        }
    };
    let n_stages = stages.len();
    let tx = cfg.tx();
    let rhos: Vec<f64> = plan.snr_grid_db.iter().map(|&s| snr_linear(s)).collect();
    let partial: Vec<Vec<(Vec<u64>, Vec<u64>)>> = plan
        .shards()
        .into_par_iter()
        .map(|(shard, count)| {
            let mut rng = shard_rng(plan.seed, shard);
            let mut acc = vec![(vec![0u64; n_stages], vec![0u64; n_stages]); rhos.len()];
            for _ in 0..count {
                let sample = sample_channel(cfg, &mut rng);
                for (p, &rho) in rhos.iter().enumerate() {
                    let log_rho = rho.log2();
                    let mut alive = true;
                    for (i, s) in stages.iter().enumerate() {
                        let fails = s.rate > 0.0 && layer_mi(&sample, rho, s.gamma_prev, s.gamma_cur, tx) < s.rate * log_rho;
                        if fails {
                            acc[p].1[i] += 1;
                            if alive {
                                acc[p].0[i] += 1;
                                alive = false;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![(vec![0u64; n_stages], vec![0u64; n_stages]); rhos.len()];
    for shard in partial {
        for (t, s) in total.iter_mut().zip(shard) {
            for i in 0..n_stages {
                t.0[i] += s.0[i];
                t.1[i] += s.1[i];
            }
        }
    }
    let n = plan.trials as f64;
    Ok(plan
        .snr_grid_db
        .iter()
        .zip(total)
        .map(|(&snr_db, (stop, genie))| DecodingProfile {
            snr_db,
            stop: stop.iter().map(|&c| c as f64 / n).collect(),
            genie: genie.iter().map(|&c| c as f64 / n).collect(),
            trials: plan.trials,
        })
        .collect())
}

/// Least-squares slope of `log₁₀(value)` against `log₁₀ρ`, negated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub snr_db_points: Vec<f64>,
    pub log10_values: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
}

/// Fits a power law `value ≈ c·ρ^{−slope}` to `(snr_db, value)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeEstimate> {
    if points.len() < 3 {
        return domain(format!("slope fit needs at least 3 points, got {}", points.len()));
    }
    if let Some(&(snr, v)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Unresolved(format!(
            "value {v} at {snr} dB is not positive; raise the trial count or lower the SNR"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 / 10.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("slope fit needs at least two distinct SNR values");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - beta * (x - mx)).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeEstimate {
        snr_db_points: points.iter().map(|p| p.0).collect(),
        log10_values: ys,
        slope: -beta,
        stderr,
    })
}
