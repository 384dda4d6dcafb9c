//! Per-candidate data-fidelity losses, moment weights, the stop-gradient
//! aggregated loss, the baseline strategies, and the single training step.
//!
//! The weights are computed from plain detached loss values and re-enter the
//! tape only as scalar multipliers, so backward sees them as constants: the
//! gradient of the aggregate is exactly the weight-frozen combination of the
//! per-candidate gradients.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forward::{build_transfer_function, object_wave_from_output, CandidateSet, ForwardParam};
use crate::forward::hologram_from_spectrum;
use crate::nn::{forward_generate, GeneratorState};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Loss values below this floor are clamped before the reciprocal; the
/// proposed weight e^{1/F} is singular at F = 0.
pub const LOSS_FLOOR: f64 = 1e-12;

/// How one training step turns candidate losses into a backpropagated loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Softmax-of-inverse-loss weights, recomputed every moment, stop-gradient.
    Ma,
    /// Every candidate weighted 1/n_c.
    Uniform,
    /// Backpropagate only the currently smallest candidate loss.
    Alternating,
    /// Backpropagate the precise parameter's loss (evaluation upper bound).
    Oracle,
    /// Backpropagate one fixed candidate chosen at run start (blind baseline).
    RandomFixed(usize),
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Ma => "ma".into(),
            Strategy::Uniform => "uniform".into(),
            Strategy::Alternating => "alternating".into(),
            Strategy::Oracle => "oracle".into(),
            Strategy::RandomFixed(i) => format!("random[{}]", i),
        }
    }
}

/// Per-candidate losses as tape nodes plus their detached plain values.
pub struct CandidateLosses {
    pub nodes: Vec<NodeId>,
    pub values: Vec<f64>,
}

/// Weights on the probability simplex, treated as constants by backward.
#[derive(Debug, Clone)]
pub struct MomentWeights {
    omega: Vec<f64>,
}

impl MomentWeights {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Contract("weights must not be empty".into()));
        }
        if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract(format!("weights must be finite and nonnegative: {:?}", omega)));
        }
        let sum: f64 = omega.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("weights sum to {}, not 1", sum)));
        }
        Ok(MomentWeights { omega })
    }

    fn one_hot(n: usize, index: usize) -> Self {
        let mut omega = vec![0.0; n];
        omega[index] = 1.0;
        MomentWeights { omega }
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }
}

/// Snapshot of one moment: everything the convergence logs serialize.
#[derive(Debug, Clone)]
pub struct MomentRecord {
    pub iteration: usize,
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
    pub loss: f64,
    /// Filled by the harness once ground truth is in scope.
    pub psnr: Option<f64>,
    pub wall_ms: f64,
    /// Candidate index backpropagated, when the strategy picks a single one.
    pub selected: Option<usize>,
}

/// Forward-model operators prebuilt once per run so that per-iteration work
/// is just recording constants that share the same buffers.
pub enum CandidateOperators {
    Cs { phis: Vec<Arc<Tensor>> },
    Holography { transfers: Vec<Arc<Tensor>> },
}

impl CandidateOperators {
    pub fn build(set: &CandidateSet) -> Result<Self> {
        match &set.params()[0] {
            ForwardParam::Gaussian(_) => {
                let mut phis = Vec::with_capacity(set.len());
                for p in set.params() {
                    match p {
                        ForwardParam::Gaussian(g) => phis.push(Arc::clone(&g.phi)),
                        _ => return Err(Error::Contract("mixed candidate kinds".into())),
                    }
                }
                Ok(CandidateOperators::Cs { phis })
            }
            ForwardParam::Holography(_) => {
                let mut transfers = Vec::with_capacity(set.len());
                for p in set.params() {
                    match p {
                        ForwardParam::Holography(h) => {
                            transfers.push(Arc::new(build_transfer_function(h)?.to_packed()))
                        }
                        _ => return Err(Error::Contract("mixed candidate kinds".into())),
                    }
                }
                Ok(CandidateOperators::Holography { transfers })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            CandidateOperators::Cs { phis } => phis.len(),
            CandidateOperators::Holography { transfers } => transfers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// F_i = (1/2) ||y - A(x; theta_i)||^2 for every candidate, on the tape.
pub fn candidate_losses(
    tape: &mut Tape,
    x: NodeId,
    y: NodeId,
    ops: &CandidateOperators,
) -> Result<CandidateLosses> {
    let mut nodes = Vec::with_capacity(ops.len());
    match ops {
        CandidateOperators::Cs { phis } => {
            for phi in phis {
                let phi_node = tape.constant_shared(phi);
                let yhat = tape.matvec(phi_node, x)?;
                let r = tape.sub(y, yhat)?;
                nodes.push(tape.sum_squares(r));
            }
        }
        CandidateOperators::Holography { transfers } => {
            let object = object_wave_from_output(tape, x)?;
            let spectrum = tape.fft2(object)?;
            for p in transfers {
                let h = hologram_from_spectrum(tape, p, spectrum)?;
                let r = tape.sub(y, h)?;
                nodes.push(tape.sum_squares(r));
            }
        }
    }
    let values = nodes.iter().map(|&id| tape.value(id).item()).collect();
    Ok(CandidateLosses { nodes, values })
}

/// omega_i = e^{1/F_i} / sum_j e^{1/F_j}, evaluated in log space.
///
/// Floored at `LOSS_FLOOR` and stabilized by subtracting the max logit;
/// both are value-preserving, so a vanishing candidate loss drives its
/// weight to exactly 1.0 without overflow.
pub fn ma_weights(detached_losses: &[f64]) -> Result<MomentWeights> {
    if detached_losses.is_empty() {
        return Err(Error::Contract("no candidate losses".into()));
    }
    if detached_losses.iter().any(|f| f.is_nan() || *f < 0.0) {
        return Err(Error::Contract(format!(
            "candidate losses must be nonnegative: {:?}",
            detached_losses
        )));
    }
    let logits: Vec<f64> = detached_losses.iter().map(|&f| 1.0 / f.max(LOSS_FLOOR)).collect();
    let max_logit = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max_logit).exp()).collect();
    let sum: f64 = exps.iter().sum();
    MomentWeights::new(exps.iter().map(|e| e / sum).collect())
}

/// L = sum_i omega_i * F_i with the weights entering as plain constants.
pub fn aggregate_loss(
    tape: &mut Tape,
    weights: &MomentWeights,
    losses: &CandidateLosses,
) -> Result<NodeId> {
    if weights.values().len() != losses.nodes.len() {
        return Err(Error::Contract(format!(
            "{} weights for {} losses",
            weights.values().len(),
            losses.nodes.len()
        )));
    }
    let mut acc: Option<NodeId> = None;
    for (&node, &w) in losses.nodes.iter().zip(weights.values()) {
        let term = tape.scale(node, w);
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    Ok(acc.expect("at least one candidate"))
}

/// Smallest detached loss; ties break toward the lowest index.
pub fn argmin_loss(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Loss node plus the effective weights a strategy assigned this moment.
pub struct StrategyMoment {
    pub loss: NodeId,
    pub weights: Vec<f64>,
    pub selected: Option<usize>,
}

pub fn strategy_loss(
    tape: &mut Tape,
    strategy: Strategy,
    losses: &CandidateLosses,
    oracle_index: usize,
) -> Result<StrategyMoment> {
    let n = losses.nodes.len();
    match strategy {
        Strategy::Ma => {
            let w = ma_weights(&losses.values)?;
            let loss = aggregate_loss(tape, &w, losses)?;
            Ok(StrategyMoment { loss, weights: w.values().to_vec(), selected: None })
        }
        Strategy::Uniform => {
            let w = MomentWeights::new(vec![1.0 / n as f64; n])?;
            let loss = aggregate_loss(tape, &w, losses)?;
            Ok(StrategyMoment { loss, weights: w.values().to_vec(), selected: None })
        }
        Strategy::Alternating => {
            let k = argmin_loss(&losses.values);
            Ok(StrategyMoment {
                loss: losses.nodes[k],
                weights: MomentWeights::one_hot(n, k).omega,
                selected: Some(k),
            })
        }
        Strategy::Oracle => Ok(StrategyMoment {
            loss: losses.nodes[oracle_index],
            weights: MomentWeights::one_hot(n, oracle_index).omega,
            selected: Some(oracle_index),
        }),
        Strategy::RandomFixed(k) => {
            if k >= n {
                return Err(Error::Contract(format!("fixed candidate {} of {}", k, n)));
            }
            Ok(StrategyMoment {
                loss: losses.nodes[k],
                weights: MomentWeights::one_hot(n, k).omega,
                selected: Some(k),
            })
        }
    }
}

/// The generated image and the moment snapshot one step produced.
pub struct TrainStepOutput {
    pub record: MomentRecord,
    pub image: Arc<Tensor>,
}

/// One full iteration of the training loop on a fresh tape:
/// x <- G(z; w); compute all F_i; compute weights (stop-gradient); build the
/// strategy loss; backward; Adam step.
pub fn ma_train_step(
    state: &mut GeneratorState,
    y: &Arc<Tensor>,
    set: &CandidateSet,
    ops: &CandidateOperators,
    strategy: Strategy,
    lr: f64,
    iteration: usize,
) -> Result<TrainStepOutput> {
    let mut tape = Tape::new();
    let gen = forward_generate(&mut tape, state)?;
    let y_node = tape.constant_shared(y);
    let losses = candidate_losses(&mut tape, gen.output, y_node, ops)?;
    let moment = strategy_loss(&mut tape, strategy, &losses, set.oracle_index())?;
    let loss_value = tape.value(moment.loss).item();
    if !loss_value.is_finite() {
        return Err(Error::Divergence {
            iteration,
            detail: format!("loss {} with candidate losses {:?}", loss_value, losses.values),
        });
    }

    let mut grad_map = tape.backward(moment.loss)?;
    let grads = state.collect_gradients(&mut grad_map, &gen);
    let image = tape.value_arc(gen.output);
    state.adam_step(&grads, lr).map_err(|e| match e {
        Error::Divergence { detail, .. } => Error::Divergence { iteration, detail },
        other => other,
    })?;

    Ok(TrainStepOutput {
        record: MomentRecord {
            iteration,
            losses: losses.values,
            weights: moment.weights,
            loss: loss_value,
            psnr: None,
            wall_ms: 0.0,
            selected: moment.selected,
        },
        image,
    })
}
