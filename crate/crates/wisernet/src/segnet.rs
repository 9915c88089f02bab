//! U-shaped encoder-decoder with filtered skip connections, a
//! bottleneck, and per-level segmentation heads.
//!
//! Level `l` runs at `H/2^l x W/2^l` with `base_width * 2^(l-1)`
//! channels. The skip filter halves resolution once more internally, so
//! inputs must divide by `2^(depth+1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layers::ConvLayer;
use crate::tensor::{Graph, NodeId, ParamStore, Scalar, Shape, Tensor4, UpsampleMode};
use crate::wiser::{wiser_forward, WiserHyper, WiserParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Encoder depth L.
    pub depth: usize,
    /// Channels at level 1; level l has `base_width * 2^(l-1)`.
    pub base_width: usize,
    pub in_channels: usize,
    pub num_classes: usize,
    pub wiser_enabled: bool,
    pub ds_enabled: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: 4,
            base_width: 8,
            in_channels: 3,
            num_classes: 2,
            wiser_enabled: true,
            ds_enabled: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!("depth {} < 2", self.depth)));
        }
        if self.base_width < 1 || self.in_channels < 1 || self.num_classes < 1 {
            return Err(Error::Config("widths and class count must be positive".into()));
        }
        Ok(())
    }

    pub fn width(&self, level: usize) -> usize {
        self.base_width << (level - 1)
    }

    /// Canonical textual form, hashed into summary rows and manifests.
    pub fn canonical_string(&self, hyper: &WiserHyper) -> String {
        format!(
            "depth={};base_width={};in_channels={};num_classes={};wiser={};ds={};alpha={};beta={};eps_gate={};kappa={};a0={}",
            self.depth,
            self.base_width,
            self.in_channels,
            self.num_classes,
            self.wiser_enabled,
            self.ds_enabled,
            hyper.alpha,
            hyper.beta,
            hyper.eps_gate,
            hyper.kappa,
            hyper.a0,
        )
    }
}

struct EncoderBlock {
    down: ConvLayer,
    conv: ConvLayer,
}

struct DecoderBlock {
    conv1: ConvLayer,
    conv2: ConvLayer,
}

pub struct Model<T: Scalar> {
    pub cfg: ModelConfig,
    pub hyper: WiserHyper,
    pub store: ParamStore<T>,
    enc: Vec<EncoderBlock>,
    bottleneck: [ConvLayer; 2],
    dec: Vec<DecoderBlock>,
    main_head: ConvLayer,
    aux_heads: Vec<ConvLayer>,
    wiser: Vec<WiserParams>,
}

/// Forward-pass products: probabilities, per-level auxiliary maps,
/// decorrelation terms, and optionally the internal feature maps.
pub struct ForwardOutput {
    /// `B x M x H x W`, sigmoid probabilities.
    pub main_probs: NodeId,
    /// Aux probabilities for levels 2..=L at native resolution; empty
    /// when deep supervision is disabled.
    pub aux_probs: Vec<NodeId>,
    /// One scalar per skip filter; empty when the filter is disabled.
    pub ortho_terms: Vec<NodeId>,
    pub retained: Option<RetainedFeatures>,
}

/// Internal maps kept for analysis and embedding extraction.
pub struct RetainedFeatures {
    pub skips: Vec<NodeId>,
    pub filtered_skips: Vec<NodeId>,
    pub f_c: Vec<NodeId>,
    pub f_s: Vec<NodeId>,
    pub bottleneck: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSummary {
    pub config_hash: String,
    pub params: usize,
    pub macs: usize,
    pub peak_activation_bytes: usize,
}

impl<T: Scalar> Model<T> {
    pub fn new(cfg: ModelConfig, hyper: WiserHyper, seed: u64) -> Result<Self> {
        cfg.validate()?;
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut enc = Vec::with_capacity(cfg.depth);
        for l in 1..=cfg.depth {
            let c_in = if l == 1 { cfg.in_channels } else { cfg.width(l - 1) };
            let c = cfg.width(l);
            enc.push(EncoderBlock {
                down: ConvLayer::init(&mut store, &format!("enc{l}.down"), c_in, c, 3, 2, 1, &mut rng),
                conv: ConvLayer::init(&mut store, &format!("enc{l}.conv"), c, c, 3, 1, 1, &mut rng),
            });
        }
        let cl = cfg.width(cfg.depth);
        let bottleneck = [
            ConvLayer::init(&mut store, "bottleneck.0", cl, cl, 3, 1, 1, &mut rng),
            ConvLayer::init(&mut store, "bottleneck.1", cl, cl, 3, 1, 1, &mut rng),
        ];
        let mut dec = Vec::with_capacity(cfg.depth);
        for l in (1..=cfg.depth).rev() {
            let c = cfg.width(l);
            let c_above = if l == cfg.depth { cl } else { cfg.width(l + 1) };
            dec.push(DecoderBlock {
                conv1: ConvLayer::init(
                    &mut store,
                    &format!("dec{l}.conv1"),
                    c_above + c,
                    c,
                    3,
                    1,
                    1,
                    &mut rng,
                ),
                conv2: ConvLayer::init(&mut store, &format!("dec{l}.conv2"), c, c, 3, 1, 1, &mut rng),
            });
        }
        dec.reverse(); // index l-1 => decoder for level l
        let main_head =
            ConvLayer::init(&mut store, "head.main", cfg.width(1), cfg.num_classes, 1, 1, 0, &mut rng);
        let mut aux_heads = Vec::new();
        if cfg.ds_enabled {
            for l in 2..=cfg.depth {
                aux_heads.push(ConvLayer::init(
                    &mut store,
                    &format!("head.aux{l}"),
                    cfg.width(l),
                    cfg.num_classes,
                    1,
                    1,
                    0,
                    &mut rng,
                ));
            }
        }
        let mut wiser = Vec::new();
        if cfg.wiser_enabled {
            for l in 1..=cfg.depth {
                wiser.push(WiserParams::init(
                    &mut store,
                    &format!("wiser{l}"),
                    cfg.width(l),
                    hyper,
                    &mut rng,
                )?);
            }
        }
        Ok(Model { cfg, hyper, store, enc, bottleneck, dec, main_head, aux_heads, wiser })
    }

    fn check_input(&self, shape: Shape) -> Result<()> {
        if shape.c != self.cfg.in_channels {
            return Err(Error::Config(format!(
                "input has {} channels, model expects {}",
                shape.c, self.cfg.in_channels
            )));
        }
        let divisor = 1usize << (self.cfg.depth + 1);
        if shape.h % divisor != 0 || shape.w % divisor != 0 {
            return Err(Error::Config(format!(
                "input {}x{} not divisible by 2^(L+1) = {divisor}",
                shape.h, shape.w
            )));
        }
        Ok(())
    }

    /// Hierarchical features `s_1..s_L`.
    pub fn encoder_forward(&self, g: &mut Graph<T>, x: NodeId) -> Result<Vec<NodeId>> {
        self.check_input(g.shape(x))?;
        let mut skips = Vec::with_capacity(self.cfg.depth);
        let mut cur = x;
        for block in &self.enc {
            let down = block.down.forward_relu(g, &self.store, cur)?;
            cur = block.conv.forward_relu(g, &self.store, down)?;
            skips.push(cur);
        }
        Ok(skips)
    }

    /// Apply the skip filter per level; identity when disabled (the
    /// ablation baseline).
    pub fn filter_skips(
        &self,
        g: &mut Graph<T>,
        skips: &[NodeId],
    ) -> Result<(Vec<NodeId>, Vec<NodeId>, Vec<NodeId>, Vec<NodeId>)> {
        if !self.cfg.wiser_enabled {
            return Ok((skips.to_vec(), Vec::new(), Vec::new(), Vec::new()));
        }
        let mut filtered = Vec::with_capacity(skips.len());
        let mut ortho = Vec::with_capacity(skips.len());
        let mut f_c = Vec::with_capacity(skips.len());
        let mut f_s = Vec::with_capacity(skips.len());
        for (s, p) in skips.iter().zip(&self.wiser) {
            let out = wiser_forward(g, &self.store, *s, p)?;
            filtered.push(out.s_tilde);
            ortho.push(out.ortho_term);
            f_c.push(out.f_c);
            f_s.push(out.f_s);
        }
        Ok((filtered, ortho, f_c, f_s))
    }

    fn bottleneck_forward(&self, g: &mut Graph<T>, s_last: NodeId) -> Result<NodeId> {
        let h = self.bottleneck[0].forward_relu(g, &self.store, s_last)?;
        self.bottleneck[1].forward_relu(g, &self.store, h)
    }

    /// Decoder states `d_1..d_L` (returned in level order).
    pub fn decode_forward(
        &self,
        g: &mut Graph<T>,
        bottleneck: NodeId,
        filtered_skips: &[NodeId],
    ) -> Result<Vec<NodeId>> {
        let depth = self.cfg.depth;
        let mut states = vec![NodeId(0); depth];
        let mut above = bottleneck;
        for l in (1..=depth).rev() {
            let inp = if l == depth {
                above
            } else {
                g.upsample(above, 2, UpsampleMode::Bilinear)?
            };
            let cat = g.concat_channels(&[inp, filtered_skips[l - 1]])?;
            let block = &self.dec[l - 1];
            let h = block.conv1.forward_relu(g, &self.store, cat)?;
            let d = block.conv2.forward_relu(g, &self.store, h)?;
            states[l - 1] = d;
            above = d;
        }
        Ok(states)
    }

    /// Full pass: encoder, skip filtering, bottleneck, decoder, heads.
    pub fn forward(&self, g: &mut Graph<T>, x: NodeId, retain: bool) -> Result<ForwardOutput> {
        let skips = self.encoder_forward(g, x)?;
        let (filtered, ortho_terms, f_c, f_s) = self.filter_skips(g, &skips)?;
        let b = self.bottleneck_forward(g, *filtered.last().unwrap())?;
        let states = self.decode_forward(g, b, &filtered)?;

        // Main head: 1x1 conv on d_1, 2x bilinear up to full resolution,
        // sigmoid.
        let logits = self.main_head.forward(g, &self.store, states[0])?;
        let up = g.upsample(logits, 2, UpsampleMode::Bilinear)?;
        let main_probs = g.sigmoid(up);

        let mut aux_probs = Vec::new();
        if self.cfg.ds_enabled {
            for (i, head) in self.aux_heads.iter().enumerate() {
                let z = head.forward(g, &self.store, states[i + 1])?;
                aux_probs.push(g.sigmoid(z));
            }
        }
        let retained = retain.then(|| RetainedFeatures {
            skips,
            filtered_skips: filtered,
            f_c,
            f_s,
            bottleneck: b,
        });
        Ok(ForwardOutput { main_probs, aux_probs, ortho_terms, retained })
    }

    /// Every conv with the spatial size it sees for a given input.
    fn conv_inventory(&self, input_hw: (usize, usize)) -> Vec<(ConvLayer, usize, usize)> {
        let (h, w) = input_hw;
        let mut list = Vec::new();
        for (i, block) in self.enc.iter().enumerate() {
            let l = i + 1;
            list.push((block.down, h >> (l - 1), w >> (l - 1)));
            list.push((block.conv, h >> l, w >> l));
        }
        let lh = (h >> self.cfg.depth, w >> self.cfg.depth);
        list.push((self.bottleneck[0], lh.0, lh.1));
        list.push((self.bottleneck[1], lh.0, lh.1));
        for (i, block) in self.dec.iter().enumerate() {
            let l = i + 1;
            list.push((block.conv1, h >> l, w >> l));
            list.push((block.conv2, h >> l, w >> l));
        }
        list.push((self.main_head, h >> 1, w >> 1));
        for (i, head) in self.aux_heads.iter().enumerate() {
            let l = i + 2;
            list.push((*head, h >> l, w >> l));
        }
        for (i, p) in self.wiser.iter().enumerate() {
            let l = i + 1;
            let (bh, bw) = (h >> (l + 1), w >> (l + 1));
            for conv in [p.phi_s[0], p.phi_s[1], p.phi_c[0], p.phi_c[1], p.gate_conv] {
                list.push((conv, bh, bw));
            }
        }
        list
    }

    /// Exact parameter count, analytic MAC count and measured forward
    /// activation footprint for a single image of the given size.
    pub fn summary(&self, input_hw: (usize, usize)) -> Result<ModelSummary> {
        let macs = self
            .conv_inventory(input_hw)
            .iter()
            .map(|(layer, h, w)| layer.macs(&self.store, *h, *w))
            .sum();
        let mut g = Graph::new();
        let x = g.leaf(
            Tensor4::zeros(Shape::new(1, self.cfg.in_channels, input_hw.0, input_hw.1)),
            false,
        );
        self.forward(&mut g, x, false)?;
        let mut hasher = Sha256::new();
        hasher.update(self.cfg.canonical_string(&self.hyper).as_bytes());
        let hash = hasher.finalize();
        let config_hash = hash[..6].iter().map(|b| format!("{b:02x}")).collect();
        Ok(ModelSummary {
            config_hash,
            params: self.store.total_elements(),
            macs,
            peak_activation_bytes: g.activation_bytes(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_input(shape: Shape, seed: u64) -> Tensor4<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(0.0..1.0))
    }

    fn model(wiser: bool, ds: bool, seed: u64) -> Model<f32> {
        let cfg = ModelConfig { wiser_enabled: wiser, ds_enabled: ds, ..ModelConfig::default() };
        Model::new(cfg, WiserHyper::default(), seed).unwrap()
    }

    #[test]
    fn encoder_shape_recurrence_512() {
        let m = model(false, false, 0);
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::zeros(Shape::new(1, 3, 512, 512)), false);
        let skips = m.encoder_forward(&mut g, x).unwrap();
        let want = [(8, 256), (16, 128), (32, 64), (64, 32)];
        for (s, (c, hw)) in skips.iter().zip(want) {
            assert_eq!(g.shape(*s), Shape::new(1, c, hw, hw));
        }
    }

    #[test]
    fn encoder_deepest_map_64() {
        let m = model(false, false, 0);
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::zeros(Shape::new(2, 3, 64, 64)), false);
        let skips = m.encoder_forward(&mut g, x).unwrap();
        assert_eq!(g.shape(*skips.last().unwrap()), Shape::new(2, 64, 4, 4));
    }

    #[test]
    fn indivisible_input_is_config_error() {
        let m = model(false, false, 0);
        let mut g = Graph::new();
        let x = g.leaf(Tensor4::zeros(Shape::new(1, 3, 48, 48)), false);
        assert!(matches!(m.encoder_forward(&mut g, x), Err(Error::Config(_))));
    }

    #[test]
    fn batch_permutation_permutes_outputs() {
        let m = model(true, true, 1);
        let a = random_input(Shape::new(1, 3, 64, 64), 2);
        let b = random_input(Shape::new(1, 3, 64, 64), 3);
        let ab = Tensor4::concat_batch(&[&a, &b]).unwrap();
        let ba = Tensor4::concat_batch(&[&b, &a]).unwrap();
        let run = |input: Tensor4<f32>| {
            let mut g = Graph::new();
            let x = g.leaf(input, false);
            let out = m.forward(&mut g, x, false).unwrap();
            g.value(out.main_probs).clone()
        };
        let pab = run(ab);
        let pba = run(ba);
        for c in 0..2 {
            assert_eq!(pab.plane(0, c), pba.plane(1, c));
            assert_eq!(pab.plane(1, c), pba.plane(0, c));
        }
    }

    #[test]
    fn disabled_filter_passes_skips_bitwise() {
        let m = model(false, false, 4);
        let mut g = Graph::new();
        let x = g.leaf(random_input(Shape::new(1, 3, 64, 64), 5), false);
        let skips = m.encoder_forward(&mut g, x).unwrap();
        let (filtered, ortho, _, _) = m.filter_skips(&mut g, &skips).unwrap();
        assert_eq!(skips, filtered);
        assert!(ortho.is_empty());
    }

    #[test]
    fn filter_preserves_shapes_and_counts() {
        let m = model(true, true, 6);
        let mut g = Graph::new();
        let x = g.leaf(random_input(Shape::new(1, 3, 64, 64), 7), false);
        let skips = m.encoder_forward(&mut g, x).unwrap();
        let (filtered, ortho, _, _) = m.filter_skips(&mut g, &skips).unwrap();
        assert_eq!(ortho.len(), m.cfg.depth);
        for (s, f) in skips.iter().zip(&filtered) {
            assert_eq!(g.shape(*s), g.shape(*f));
        }
    }

    #[test]
    fn decoder_shape_chain_64() {
        let m = model(true, true, 8);
        let mut g = Graph::new();
        let x = g.leaf(random_input(Shape::new(1, 3, 64, 64), 9), false);
        let out = m.forward(&mut g, x, true).unwrap();
        assert_eq!(g.shape(out.main_probs), Shape::new(1, 2, 64, 64));
        // Aux maps at native resolutions 16, 8, 4.
        let want = [16usize, 8, 4];
        assert_eq!(out.aux_probs.len(), 3);
        for (a, hw) in out.aux_probs.iter().zip(want) {
            let s = g.shape(*a);
            assert_eq!((s.c, s.h, s.w), (2, hw, hw));
        }
        let probs = g.value(out.main_probs);
        assert!(probs.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zeroed_skips_still_decode() {
        let m = model(false, false, 10);
        let mut g = Graph::new();
        let x = g.leaf(random_input(Shape::new(1, 3, 64, 64), 11), false);
        let skips = m.encoder_forward(&mut g, x).unwrap();
        let zeroed: Vec<NodeId> =
            skips.iter().map(|s| g.constant(Tensor4::zeros(g.shape(*s)))).collect();
        let b = m.bottleneck_forward(&mut g, *skips.last().unwrap()).unwrap();
        let states = m.decode_forward(&mut g, b, &zeroed).unwrap();
        assert_eq!(g.shape(states[0]), Shape::new(1, 8, 32, 32));
    }

    #[test]
    fn ds_disabled_yields_no_aux_maps() {
        let m = model(true, false, 12);
        let mut g = Graph::new();
        let x = g.leaf(random_input(Shape::new(1, 3, 64, 64), 13), false);
        let out = m.forward(&mut g, x, false).unwrap();
        assert!(out.aux_probs.is_empty());
        assert_eq!(out.ortho_terms.len(), 4);
    }

    #[test]
    fn forward_is_deterministic_under_fixed_seed() {
        let run = || {
            let m = model(true, true, 14);
            let mut g = Graph::new();
            let x = g.leaf(random_input(Shape::new(2, 3, 64, 64), 15), false);
            let out = m.forward(&mut g, x, false).unwrap();
            g.value(out.main_probs).as_slice().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn summary_counts_match_store_and_grow_with_filter() {
        let base = model(false, false, 16);
        let with = model(true, false, 16);
        let s_base = base.summary((64, 64)).unwrap();
        let s_with = with.summary((64, 64)).unwrap();
        assert_eq!(s_base.params, base.store.total_elements());
        assert_eq!(s_with.params, with.store.total_elements());
        assert!(s_with.params > s_base.params);
        assert!(s_with.macs > s_base.macs);
        assert!(s_with.peak_activation_bytes > s_base.peak_activation_bytes);
        assert_ne!(s_base.config_hash, s_with.config_hash);
    }

    #[test]
    fn every_parameter_gets_gradient_on_random_batch() {
        let m = model(true, true, 17);
        let x = random_input(Shape::new(2, 3, 64, 64), 18);
        let mut g = Graph::new();
        let xi = g.leaf(x, false);
        let out = m.forward(&mut g, xi, false).unwrap();
        // Mean prob + warmed-up ortho terms: touches every path.
        let mut loss = g.mean_all(out.main_probs);
        for aux in &out.aux_probs {
            let am = g.mean_all(*aux);
            loss = g.add(loss, am).unwrap();
        }
        for o in &out.ortho_terms {
            let so = g.affine(*o, 0.1, 0.0);
            loss = g.add(loss, so).unwrap();
        }
        g.backward(loss).unwrap();
        let mut store = m.store.clone();
        g.accumulate_param_grads(&mut store);
        for p in store.iter() {
            let grad = p.grad.as_ref().unwrap_or_else(|| panic!("{} missing grad", p.name));
            assert!(
                grad.as_slice().iter().any(|&v| v != 0.0),
                "parameter {} received a zero gradient",
                p.name
            );
        }
    }
}
