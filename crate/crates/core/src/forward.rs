//! Forward models A(x; theta): Gaussian compressive sensing and
//! angular-spectrum holographic propagation, plus candidate-set construction.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::complex::{self, ComplexField};
use crate::error::{Error, Result};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Half-width of the uniform distance jitter used for holography candidates,
/// in micrometers.
pub const DISTANCE_JITTER_UM: f64 = 500.0;

/// A Gaussian measurement matrix with entries drawn i.i.d. N(0, 1/m).
#[derive(Debug, Clone)]
pub struct GaussianMatrixParam {
    pub phi: Arc<Tensor>,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

/// Optics constants for one propagation distance.
#[derive(Debug, Clone, PartialEq)]
pub struct HolographyParam {
    pub wavelength_um: f64,
    pub distance_um: f64,
    pub pixel_pitch_um: f64,
    /// Side length of the square grid; must be a power of two.
    pub grid: usize,
}

impl HolographyParam {
    pub fn validate(&self) -> Result<()> {
        if self.wavelength_um <= 0.0 || self.pixel_pitch_um <= 0.0 {
            return Err(Error::Config("wavelength and pixel pitch must be positive".into()));
        }
        if !self.grid.is_power_of_two() {
            return Err(Error::FftSize(self.grid));
        }
        Ok(())
    }

    pub fn at_distance(&self, distance_um: f64) -> HolographyParam {
        HolographyParam { distance_um, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub enum ForwardParam {
    Gaussian(GaussianMatrixParam),
    Holography(HolographyParam),
}

/// The candidate parameter set Theta. `oracle_index` marks the precise
/// parameter and exists for evaluation only; solver code never reads it.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    params: Vec<ForwardParam>,
    oracle_index: usize,
}

impl CandidateSet {
    pub fn new(params: Vec<ForwardParam>, oracle_index: usize) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("candidate set must not be empty".into()));
        }
        if oracle_index >= params.len() {
            return Err(Error::Config(format!(
                "oracle index {} out of range for {} candidates",
                oracle_index,
                params.len()
            )));
        }
        Ok(CandidateSet { params, oracle_index })
    }

    pub fn singleton(precise: ForwardParam) -> Self {
        CandidateSet { params: vec![precise], oracle_index: 0 }
    }

    pub fn params(&self) -> &[ForwardParam] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn oracle_index(&self) -> usize {
        self.oracle_index
    }
}

pub fn sample_gaussian_matrix(m: usize, n: usize, seed: u64) -> GaussianMatrixParam {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("valid normal");
    let data = (0..m * n).map(|_| dist.sample(&mut rng)).collect();
    GaussianMatrixParam {
        phi: Arc::new(Tensor::new(vec![m, n], data).expect("consistent shape")),
        m,
        n,
        seed,
    }
}

/// y = Phi * x, recorded on the tape (adjoint is Phi^T).
pub fn apply_cs(tape: &mut Tape, param: &GaussianMatrixParam, x: NodeId) -> Result<NodeId> {
    let phi = tape.constant_shared(&param.phi);
    tape.matvec(phi, x)
}

/// Angular-spectrum transfer function P(lambda, d) on the wrapped DFT grid.
/// Evanescent frequencies (lambda*f beyond the unit circle) are zeroed.
pub fn build_transfer_function(param: &HolographyParam) -> Result<ComplexField> {
    param.validate()?;
    let n = param.grid;
    let lambda = param.wavelength_um;
    let d = param.distance_um;
    let df = 1.0 / (n as f64 * param.pixel_pitch_um);

    let freq = |k: usize| -> f64 {
        let k = k as isize;
        let half = (n / 2) as isize;
        let wrapped = if k <= half { k } else { k - n as isize };
        wrapped as f64 * df
    };

    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for ky in 0..n {
        let fy = freq(ky) * lambda;
        for kx in 0..n {
            let fx = freq(kx) * lambda;
            let s = 1.0 - fx * fx - fy * fy;
            if s >= 0.0 {
                let phase = 2.0 * std::f64::consts::PI * (d / lambda) * s.sqrt();
                re[ky * n + kx] = phase.cos();
                im[ky * n + kx] = phase.sin();
            }
        }
    }
    ComplexField::new(Tensor::new(vec![n, n], re)?, Tensor::new(vec![n, n], im)?)
}

/// Free-space propagation: ifft2(P . fft2(object)). Off-tape variant used for
/// measurement synthesis and the physics tests.
pub fn propagate(object: &ComplexField, transfer: &ComplexField) -> Result<ComplexField> {
    let spectrum = complex::fft2(object)?;
    complex::ifft2(&transfer.mul(&spectrum)?)
}

/// Intensity |U(d)|^2 at the sensor plane; the holography measurement.
pub fn hologram(object: &ComplexField, param: &HolographyParam) -> Result<Tensor> {
    let transfer = build_transfer_function(param)?;
    Ok(propagate(object, &transfer)?.squared_magnitude())
}

/// Unit-amplitude object wave e^{i*phase} from a phase map in radians.
pub fn object_wave_from_phase(phase: &Tensor) -> Result<ComplexField> {
    ComplexField::new(phase.map(f64::cos), phase.map(f64::sin))
}

/// Converts a two-channel generator output [2, H, W] (amplitude in (0,1),
/// phase as a (0,1) fraction of 2*pi) into a packed complex object wave
/// a*e^{i*phi}, recorded on the tape.
pub fn object_wave_from_output(tape: &mut Tape, output: NodeId) -> Result<NodeId> {
    let amp = tape.slice_channel(output, 0)?;
    let phase_frac = tape.slice_channel(output, 1)?;
    let phase = tape.scale(phase_frac, 2.0 * std::f64::consts::PI);
    let cos = tape.cos(phase);
    let sin = tape.sin(phase);
    let re = tape.mul(amp, cos)?;
    let im = tape.mul(amp, sin)?;
    tape.stack2(re, im)
}

/// Records |ifft2(P . spectrum)|^2 where `spectrum` is the object's FFT node.
/// The spectrum is shared across candidates; only P differs.
pub fn hologram_from_spectrum(
    tape: &mut Tape,
    transfer_packed: &Arc<Tensor>,
    spectrum: NodeId,
) -> Result<NodeId> {
    let p = tape.constant_shared(transfer_packed);
    let filtered = tape.complex_mul(p, spectrum)?;
    let field = tape.ifft2(filtered)?;
    tape.squared_magnitude(field)
}

/// Builds Theta around the precise parameter: fresh same-distribution
/// matrices for CS, uniform distance draws for holography. The order is
/// shuffled so the precise parameter's position carries no information.
pub fn build_candidate_set(precise: ForwardParam, n_c: usize, seed: u64) -> Result<CandidateSet> {
    if n_c < 2 {
        return Err(Error::Config("candidate sets need at least 2 parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(n_c);
    match &precise {
        ForwardParam::Gaussian(p) => {
            for _ in 0..n_c - 1 {
                let sub_seed: u64 = rng.random();
                params.push(ForwardParam::Gaussian(sample_gaussian_matrix(p.m, p.n, sub_seed)));
            }
        }
        ForwardParam::Holography(p) => {
            p.validate()?;
            let dist = Uniform::new(
                p.distance_um - DISTANCE_JITTER_UM,
                p.distance_um + DISTANCE_JITTER_UM,
            )
            .map_err(|e| Error::Config(format!("bad distance range: {}", e)))?;
            for _ in 0..n_c - 1 {
                params.push(ForwardParam::Holography(p.at_distance(dist.sample(&mut rng))));
            }
        }
    }
    params.push(precise);
    let mut order: Vec<usize> = (0..n_c).collect();
    order.shuffle(&mut rng);
    let oracle_index = order.iter().position(|&i| i == n_c - 1).expect("precise param present");
    let mut shuffled = Vec::with_capacity(n_c);
    for &i in &order {
        shuffled.push(params[i].clone());
    }
    CandidateSet::new(shuffled, oracle_index)
}
