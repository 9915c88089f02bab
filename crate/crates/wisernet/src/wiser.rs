//! Wavelet skip-connection filter.
//!
//! One instance decomposes an encoder feature, splits the low-pass band
//! into a style branch and an instance-normalized content branch, gates
//! and boosts the directional detail bands, drops the diagonal band,
//! reconstructs, and fuses the result residually with the raw feature.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::ConvLayer;
use crate::tensor::graph::VjpOp;
use crate::tensor::{Graph, NodeId, ParamStore, Scalar, Tensor4};

const IN_EPS: f64 = 1e-5;
const NORM_EPS: f64 = 1e-8;

/// Fixed scalar knobs of the filter. The residual weight and threshold
/// multiplier come straight from the training config; the boost gain
/// and sub-threshold attenuation define what happens on either side of
/// the adaptive edge threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WiserHyper {
    /// Residual weight on the unfiltered feature.
    pub alpha: f64,
    /// Threshold multiplier in `tau = mu + beta * sigma`.
    pub beta: f64,
    /// Maximum gate deviation from identity.
    pub eps_gate: f64,
    /// Boost gain above threshold: kept pixels scale by `1 + kappa * e`.
    pub kappa: f64,
    /// Attenuation below threshold.
    pub a0: f64,
}

impl Default for WiserHyper {
    fn default() -> Self {
        WiserHyper { alpha: 0.5, beta: 0.5, eps_gate: 0.25, kappa: 1.0, a0: 0.25 }
    }
}

impl WiserHyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eps_gate) {
            return Err(Error::Config(format!("eps_gate {} outside [0, 1)", self.eps_gate)));
        }
        if !(0.0..=1.0).contains(&self.a0) {
            return Err(Error::Config(format!("a0 {} outside [0, 1]", self.a0)));
        }
        if self.kappa < 0.0 {
            return Err(Error::Config(format!("kappa {} negative", self.kappa)));
        }
        if self.alpha < 0.0 {
            return Err(Error::Config(format!("alpha {} negative", self.alpha)));
        }
        Ok(())
    }
}

/// Learnable weights of one filter instance: two stacked 3x3 ConvReLU
/// blocks per branch plus a pointwise gate conv, all shaped for the
/// channel count of the level they filter.
#[derive(Clone, Debug)]
pub struct WiserParams {
    pub phi_s: [ConvLayer; 2],
    pub phi_c: [ConvLayer; 2],
    pub gate_conv: ConvLayer,
    pub hyper: WiserHyper,
    channels: usize,
}

impl WiserParams {
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        channels: usize,
        hyper: WiserHyper,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        hyper.validate()?;
        let phi_s = [
            ConvLayer::init(store, &format!("{prefix}.phi_s.0"), channels, channels, 3, 1, 1, rng),
            ConvLayer::init(store, &format!("{prefix}.phi_s.1"), channels, channels, 3, 1, 1, rng),
        ];
        let phi_c = [
            ConvLayer::init(store, &format!("{prefix}.phi_c.0"), channels, channels, 3, 1, 1, rng),
            ConvLayer::init(store, &format!("{prefix}.phi_c.1"), channels, channels, 3, 1, 1, rng),
        ];
        // Zero init keeps the gate at identity until training moves it.
        let gate_conv =
            ConvLayer::init_zero(store, &format!("{prefix}.gate"), channels, 1, 1, 1, 0);
        Ok(WiserParams { phi_s, phi_c, gate_conv, hyper, channels })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

/// Everything a forward pass of one instance produces.
pub struct WiserOutput {
    /// Filtered skip feature, same shape as the input.
    pub s_tilde: NodeId,
    /// Content branch map.
    pub f_c: NodeId,
    /// Style branch map.
    pub f_s: NodeId,
    /// Scalar decorrelation penalty in `[0, 1]`.
    pub ortho_term: NodeId,
}

fn two_block_branch<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    blocks: &[ConvLayer; 2],
    x: NodeId,
) -> Result<NodeId> {
    let h = blocks[0].forward_relu(g, store, x)?;
    blocks[1].forward_relu(g, store, h)
}

/// Split the low-pass band: style sees it raw, content sees it
/// instance-normalized, and the filtered band is `IN(ll) + f_c`.
pub fn ll_decouple<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    ll: NodeId,
    p: &WiserParams,
) -> Result<(NodeId, NodeId, NodeId)> {
    if g.shape(ll).c != p.channels {
        return Err(Error::Config(format!(
            "ll_decouple: {} channels but filter built for {}",
            g.shape(ll).c,
            p.channels
        )));
    }
    let f_s = two_block_branch(g, store, &p.phi_s, ll)?;
    let ll_in = g.instance_norm(ll, IN_EPS);
    let f_c = two_block_branch(g, store, &p.phi_c, ll_in)?;
    let ll_filtered = g.add(ll_in, f_c)?;
    Ok((f_s, f_c, ll_filtered))
}

/// Batch mean of the squared inner product between the standardized
/// pooled content and style vectors. Zero for decorrelated branches,
/// one when they collapse onto each other.
pub fn ortho_loss<T: Scalar>(g: &mut Graph<T>, f_c: NodeId, f_s: NodeId) -> Result<NodeId> {
    if g.shape(f_c) != g.shape(f_s) {
        return Err(Error::Shape(format!("ortho_loss: {} vs {}", g.shape(f_c), g.shape(f_s))));
    }
    let standardize = |g: &mut Graph<T>, x: NodeId| -> Result<NodeId> {
        let pooled = g.global_avg_pool(x);
        let mean = g.channel_mean(pooled);
        let centered = g.sub(pooled, mean)?;
        let sq = g.mul(centered, centered)?;
        let ssum = g.channel_sum(sq);
        let norm = g.sqrt(ssum);
        let denom = g.affine(norm, 1.0, NORM_EPS);
        g.div(centered, denom)
    };
    let nc = standardize(g, f_c)?;
    let ns = standardize(g, f_s)?;
    let prod = g.mul(nc, ns)?;
    let ip = g.channel_sum(prod);
    let sq_ip = g.mul(ip, ip)?;
    Ok(g.mean_all(sq_ip))
}

/// Channel-mean of `|LH| + |HL|`, rescaled per sample to `[0, 1]`.
pub fn edge_energy<T: Scalar>(g: &mut Graph<T>, lh: NodeId, hl: NodeId) -> Result<NodeId> {
    if g.shape(lh) != g.shape(hl) {
        return Err(Error::Shape(format!("edge_energy: {} vs {}", g.shape(lh), g.shape(hl))));
    }
    let alh = g.abs(lh);
    let ahl = g.abs(hl);
    let sum = g.add(alh, ahl)?;
    let e = g.channel_mean(sum);
    let mn = g.spatial_min(e);
    let mx = g.spatial_max(e);
    let range = g.sub(mx, mn)?;
    let denom = g.affine(range, 1.0, NORM_EPS);
    let num = g.sub(e, mn)?;
    g.div(num, denom)
}

struct EdgeBoostOp {
    beta: f64,
    kappa: f64,
}

fn boost_thresholds<T: Scalar>(e: &Tensor4<T>, beta: f64) -> Vec<T> {
    let s = e.shape();
    let beta = T::from_f64(beta);
    (0..s.b)
        .map(|b| {
            let (mean, var) = crate::tensor::ops::plane_mean_var(e.plane(b, 0));
            mean + beta * var.sqrt()
        })
        .collect()
}

impl<T: Scalar> VjpOp<T> for EdgeBoostOp {
    fn vjp(&self, g: &Tensor4<T>, _out: &Tensor4<T>, inputs: &[&Tensor4<T>]) -> Vec<Tensor4<T>> {
        // The threshold indicator is locally constant, so the a.e.
        // derivative is kappa on kept pixels and 0 elsewhere.
        let e = inputs[0];
        let taus = boost_thresholds(e, self.beta);
        let kappa = T::from_f64(self.kappa);
        let mut gx = Tensor4::zeros(e.shape());
        for b in 0..e.shape().b {
            let tau = taus[b];
            let ep = e.plane(b, 0);
            let gp = g.plane(b, 0);
            let op = gx.plane_mut(b, 0);
            for i in 0..ep.len() {
                if ep[i] >= tau {
                    op[i] = gp[i] * kappa;
                }
            }
        }
        vec![gx]
    }
}

/// Adaptive edge amplitude: per sample, pixels at or above
/// `tau = mu + beta * sigma` become `1 + kappa * e`, the rest drop to
/// the attenuation floor `a0`.
pub fn edge_boost<T: Scalar>(g: &mut Graph<T>, e_norm: NodeId, p: &WiserParams) -> Result<NodeId> {
    let s = g.shape(e_norm);
    if s.c != 1 {
        return Err(Error::Shape(format!("edge_boost expects a single channel, got {s}")));
    }
    let e = g.value(e_norm);
    let taus = boost_thresholds(e, p.hyper.beta);
    let kappa = T::from_f64(p.hyper.kappa);
    let a0 = T::from_f64(p.hyper.a0);
    let mut out = Tensor4::zeros(s);
    for b in 0..s.b {
        let tau = taus[b];
        let ep = e.plane(b, 0);
        let o = out.plane_mut(b, 0);
        for i in 0..ep.len() {
            o[i] = if ep[i] >= tau { T::one() + kappa * ep[i] } else { a0 };
        }
    }
    let op = EdgeBoostOp { beta: p.hyper.beta, kappa: p.hyper.kappa };
    Ok(g.push(out, vec![e_norm], Some(Box::new(op))))
}

/// Spatial gate from the content branch, centered at identity:
/// `1 + eps_gate * (2 * sigmoid(conv1x1(f_c)) - 1)`.
pub fn edge_select<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    f_c: NodeId,
    p: &WiserParams,
) -> Result<NodeId> {
    let z = p.gate_conv.forward(g, store, f_c)?;
    let gate = g.sigmoid(z);
    Ok(g.affine(gate, 2.0 * p.hyper.eps_gate, 1.0 - p.hyper.eps_gate))
}

/// Scale both detail bands by the selector and booster maps (broadcast
/// over channels).
pub fn refine_high_bands<T: Scalar>(
    g: &mut Graph<T>,
    lh: NodeId,
    hl: NodeId,
    e_s: NodeId,
    e_eff: NodeId,
) -> Result<(NodeId, NodeId)> {
    let lh_sel = g.mul(lh, e_s)?;
    let lh_out = g.mul(lh_sel, e_eff)?;
    let hl_sel = g.mul(hl, e_s)?;
    let hl_out = g.mul(hl_sel, e_eff)?;
    Ok((lh_out, hl_out))
}

/// Full filter: decompose, decouple LL, gate and boost LH/HL, zero HH,
/// reconstruct, fuse residually.
pub fn wiser_forward<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    s: NodeId,
    p: &WiserParams,
) -> Result<WiserOutput> {
    let in_shape = g.shape(s);
    if in_shape.h < 2 || in_shape.w < 2 {
        return Err(Error::Shape(format!(
            "wiser_forward needs spatial dims >= 2, got {in_shape}"
        )));
    }
    let (pad_h, pad_w) = (in_shape.h % 2, in_shape.w % 2);
    let s_even = if pad_h + pad_w > 0 { g.pad_edge(s, pad_h, pad_w) } else { s };

    let stacked = g.dwt(s_even)?;
    let ll = g.band(stacked, 0)?;
    let lh = g.band(stacked, 1)?;
    let hl = g.band(stacked, 2)?;

    let (f_s, f_c, ll_filtered) = ll_decouple(g, store, ll, p)?;
    let e_norm = edge_energy(g, lh, hl)?;
    let e_eff = edge_boost(g, e_norm, p)?;
    let e_s = edge_select(g, store, f_c, p)?;
    let (lh_f, hl_f) = refine_high_bands(g, lh, hl, e_s, e_eff)?;
    let hh_f = g.constant(Tensor4::zeros(g.shape(ll)));

    let s_prime = g.idwt_bands(ll_filtered, lh_f, hl_f, hh_f)?;
    let s_prime =
        if pad_h + pad_w > 0 { g.crop(s_prime, in_shape.h, in_shape.w)? } else { s_prime };

    let residual = g.affine(s, p.hyper.alpha, 0.0);
    let s_tilde = g.add(residual, s_prime)?;
    let ortho_term = ortho_loss(g, f_c, f_s)?;
    Ok(WiserOutput { s_tilde, f_c, f_s, ortho_term })
}
