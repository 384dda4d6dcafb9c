//! The untrained decoder G(z; w) whose range acts as the image prior.
//!
//! Architecture: `num_blocks` repeats of [nearest-2x upsample -> 3x3 conv ->
//! per-channel affine -> relu], then a 3x3 conv to the output channels and a
//! sigmoid. The latent z is drawn once at init and never trained.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::tape::{GradientMap, NodeId, Tape};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub out_height: usize,
    pub out_width: usize,
    /// 1 for direct images, 2 for holography (amplitude + phase).
    pub out_channels: usize,
    pub base_channels: usize,
    pub num_blocks: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(
        out_height: usize,
        out_width: usize,
        out_channels: usize,
        base_channels: usize,
        num_blocks: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = GeneratorConfig { out_height, out_width, out_channels, base_channels, num_blocks, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.base_channels == 0 {
            return Err(Error::Config("generator channel counts must be positive".into()));
        }
        let (h0, w0) = (self.start_height(), self.start_width());
        if h0 == 0 || w0 == 0 {
            return Err(Error::Config(format!(
                "output {}x{} too small for {} upsample blocks",
                self.out_height, self.out_width, self.num_blocks
            )));
        }
        if h0 << self.num_blocks != self.out_height || w0 << self.num_blocks != self.out_width {
            return Err(Error::Config(format!(
                "output {}x{} not divisible by 2^{}",
                self.out_height, self.out_width, self.num_blocks
            )));
        }
        Ok(())
    }

    pub fn start_height(&self) -> usize {
        self.out_height >> self.num_blocks
    }

    pub fn start_width(&self) -> usize {
        self.out_width >> self.num_blocks
    }
}

/// Latent input, trainable weights, and optimizer state for one run.
#[derive(Debug, Clone)]
pub struct GeneratorState {
    pub config: GeneratorConfig,
    /// Fixed latent input; sampled once, never mutated.
    z: Arc<Tensor>,
    /// Block weights in forward order: [kernel, gamma, beta] per block,
    /// then the head kernel.
    weights: Vec<Tensor>,
    adam: AdamState,
}

/// Node handles for one recorded forward pass.
pub struct GeneratorNodes {
    pub output: NodeId,
    /// Aligned with `GeneratorState::weights`.
    pub weight_nodes: Vec<NodeId>,
}

pub fn init_generator(config: GeneratorConfig) -> Result<GeneratorState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let (h0, w0, c) = (config.start_height(), config.start_width(), config.base_channels);
    let z_data: Vec<f64> = (0..c * h0 * w0).map(|_| std_normal.sample(&mut rng)).collect();
    let z = Arc::new(Tensor::new(vec![c, h0, w0], z_data)?);

    let mut weights = Vec::new();
    for _ in 0..config.num_blocks {
        weights.push(he_kernel(&mut rng, c, c));
        weights.push(Tensor::full(vec![c], 1.0)); // gamma
        weights.push(Tensor::zeros(vec![c])); // beta
    }
    weights.push(he_kernel(&mut rng, config.out_channels, c));

    let adam = AdamState::new(&weights);
    Ok(GeneratorState { config, z, weights, adam })
}

/// 3x3 kernel with He initialization: N(0, 2 / fan_in), fan_in = 9 * c_in.
fn he_kernel(rng: &mut ChaCha8Rng, c_out: usize, c_in: usize) -> Tensor {
    let std = (2.0 / (9.0 * c_in as f64)).sqrt();
    let dist = Normal::new(0.0, std).expect("valid normal");
    let data = (0..c_out * c_in * 9).map(|_| dist.sample(rng)).collect();
    Tensor::new(vec![c_out, c_in, 3, 3], data).expect("consistent shape")
}

impl GeneratorState {
    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn latent(&self) -> &Arc<Tensor> {
        &self.z
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(Tensor::numel).sum()
    }

    /// Applies gradients (aligned with `weights()`) through Adam.
    pub fn adam_step(&mut self, grads: &[Tensor], lr: f64) -> Result<()> {
        self.adam.update(&mut self.weights, grads, lr)
    }

    /// Pulls this state's weight gradients out of a backward result.
    pub fn collect_gradients(&self, map: &mut GradientMap, nodes: &GeneratorNodes) -> Vec<Tensor> {
        nodes.weight_nodes.iter().map(|&id| map.take(id)).collect()
    }
}

/// Records G(z; w) on the tape. Output values are in (0, 1) via the sigmoid
/// head, shaped [out_channels, out_height, out_width].
pub fn forward_generate(tape: &mut Tape, state: &GeneratorState) -> Result<GeneratorNodes> {
    let mut weight_nodes = Vec::with_capacity(state.weights.len());
    let mut x = tape.constant_shared(&state.z);
    let mut wi = 0;
    for _ in 0..state.config.num_blocks {
        let kernel = tape.leaf(state.weights[wi].clone());
        let gamma = tape.leaf(state.weights[wi + 1].clone());
        let beta = tape.leaf(state.weights[wi + 2].clone());
        weight_nodes.extend([kernel, gamma, beta]);
        wi += 3;

        x = tape.upsample2x(x)?;
        x = tape.conv2d(x, kernel)?;
        x = tape.channel_affine(x, gamma, beta)?;
        x = tape.relu(x);
    }
    let head = tape.leaf(state.weights[wi].clone());
    weight_nodes.push(head);
    x = tape.conv2d(x, head)?;
    let output = tape.sigmoid(x);
    Ok(GeneratorNodes { output, weight_nodes })
}
