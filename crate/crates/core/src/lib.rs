//! Distortion-SNR exponents of layered source-channel schemes over
//! block-fading Rayleigh MIMO channels.
//!
//! A source is sent over an `M × N` channel using `b` channel uses per
//! source sample, the channel fading independently across `L` blocks. The
//! expected distortion decays as `ρ^{−a}` in the SNR `ρ`; this crate
//! computes `a` for superposition ([`broadcast`]), time layering
//! ([`lsblend`]) and their combination ([`box_scheme`]), together with
//! the informed-transmitter bound, and checks them by simulation
//! ([`montecarlo`]).
//!
//! ```
//! use distortion_exponent::{bs_limit_exponent, BandwidthRatio, ChannelConfig};
//!
//! let cfg = ChannelConfig::mimo(3, 4).unwrap();
//! let e = bs_limit_exponent(BandwidthRatio::new(0.5).unwrap(), &cfg).unwrap();
//! assert!((e.exponent - 1.5).abs() < 1e-12);
//! ```

pub mod box_scheme;
pub mod broadcast;
pub mod channel;
pub mod curve;
pub mod error;
pub mod lp;
pub mod lsblend;
pub mod montecarlo;
pub mod scheme;

pub use box_scheme::{box_bruteforce_small, box_grid_exponent, box_is_achievable, box_max_exponent, BoxGrid, FillOrder};
pub use broadcast::{
    bs_allocation, bs_allocation_thm1, bs_allocation_thm1_finite, bs_allocation_thm4, bs_allocation_thm4_finite, bs_finite_closed_form,
    bs_finite_optimal, bs_layer_exponents, bs_limit_exponent, bs_limit_exponent_l, bs_upper_envelope, LayerAllocation,
};
pub use channel::{
    decompose_rate, dmt_zheng_tse, informed_transmitter_bound, layer_diversity, layer_diversity_l, BandwidthRatio,
    ChannelConfig, RateDecomposition,
};
pub use curve::{scheme_exponent, ExponentCurve, SchemeOptions};
pub use error::{Error, Result};
pub use lsblend::{lsblend_best, lsblend_best_l, lsblend_exponent, lsblend_exponent_l, ls_time_layer_rates};
pub use montecarlo::{fit_slope, layer_outage_prob, sample_channel, scheme_distortion, SimPlan, SlopeEstimate};
pub use scheme::{Allocation, SchemeExponent, SchemeId};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/broadcast.md")]
    mod broadcast {}
    #[doc = include_str!("../../../book/src/lp.md")]
    mod lp {}
    #[doc = include_str!("../../../book/src/lsblend.md")]
    mod lsblend {}
    #[doc = include_str!("../../../book/src/box.md")]
    mod box_scheme {}
    #[doc = include_str!("../../../book/src/montecarlo.md")]
    mod montecarlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
