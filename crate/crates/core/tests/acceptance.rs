//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers. Criteria 5-7 share one desk-scale set of
//! reconstruction runs (built once, sequentially) through `desk_scale()`.

use std::sync::OnceLock;
use std::time::Instant;

use momagg::aggregation::{aggregate_loss, ma_weights, CandidateLosses};
use momagg::forward::{build_transfer_function, hologram, propagate, HolographyParam};
use momagg::harness::{run_comparison, Comparison, ExperimentConfig, Seeds, Task};
use momagg::metrics;
use momagg::tape::{NodeId, Tape};
use momagg::tensor::Tensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// finite-difference oracle

const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-4;
const FD_SEEDS: u64 = 20;

/// Builds the graph from leaf tensors and returns the scalar loss plus
/// (input index, leaf node) pairs for every differentiated input.
type Build = dyn Fn(&mut Tape, &[Tensor]) -> (NodeId, Vec<(usize, NodeId)>);

fn loss_value(build: &Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let (loss, _) = build(&mut tape, inputs);
    tape.value(loss).item()
}

/// Max relative error between backward gradients and central differences.
fn fd_max_rel_error(build: &Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let (loss, leaves) = build(&mut tape, inputs);
    let map = tape.backward(loss).expect("scalar loss");
    let mut worst: f64 = 0.0;
    for &(which, leaf) in leaves.iter() {
        let analytic = map.get(leaf).expect("leaf gradient");
        for j in 0..inputs[which].numel() {
            let mut plus = inputs.to_vec();
            plus[which].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[which].data_mut()[j] -= FD_STEP;
            let fd = (loss_value(build, &plus) - loss_value(build, &minus)) / (2.0 * FD_STEP);
            let ad = analytic.data()[j];
            let rel = (ad - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()).unwrap()
}

/// Random values bounded away from zero (for relu kinks and denominators).
fn rand_tensor_off_zero(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape,
        (0..n)
            .map(|_| {
                let mag = 0.05 + scale * rng.random::<f64>();
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect(),
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// criterion 1: gradient suite

#[test]
fn criterion_1_gradient_suite() {
    let started = Instant::now();
    let mut cases: Vec<(&str, Vec<Tensor>, Box<Build>)> = Vec::new();

    for seed in 0..FD_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let a = rand_tensor(&mut rng, vec![5], -1.0, 1.0);
        let b = rand_tensor(&mut rng, vec![5], -1.0, 1.0);
        cases.push((
            "add",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let (x, y) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let s = t.add(x, y).unwrap();
                (t.sum_squares(s), vec![(0, x), (1, y)])
            }),
        ));
        cases.push((
            "sub",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let (x, y) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let s = t.sub(x, y).unwrap();
                let sq = t.mul(s, s).unwrap();
                (t.sum(sq), vec![(0, x), (1, y)])
            }),
        ));
        cases.push((
            "mul",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let (x, y) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let s = t.mul(x, y).unwrap();
                (t.sum_squares(s), vec![(0, x), (1, y)])
            }),
        ));
        let denom = rand_tensor_off_zero(&mut rng, vec![5], 1.0);
        cases.push((
            "div",
            vec![a.clone(), denom],
            Box::new(|t, v| {
                let (x, y) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let s = t.div(x, y).unwrap();
                (t.sum_squares(s), vec![(0, x), (1, y)])
            }),
        ));
        cases.push((
            "scale",
            vec![a.clone()],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let s = t.scale(x, -1.7);
                (t.sum_squares(s), vec![(0, x)])
            }),
        ));
        cases.push((
            "recip",
            vec![rand_tensor(&mut rng, vec![6], 0.5, 2.0)],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let s = t.recip(x);
                (t.sum_squares(s), vec![(0, x)])
            }),
        ));
        cases.push((
            "exp",
            vec![rand_tensor(&mut rng, vec![6], -1.0, 1.0)],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let s = t.exp(x);
                (t.sum_squares(s), vec![(0, x)])
            }),
        ));
        cases.push((
            "cos_sin",
            vec![rand_tensor(&mut rng, vec![6], -3.0, 3.0)],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let c = t.cos(x);
                let s = t.sin(x);
                let p = t.mul(c, s).unwrap();
                (t.sum(p), vec![(0, x)])
            }),
        ));
        cases.push((
            "relu",
            vec![rand_tensor_off_zero(&mut rng, vec![8], 1.0)],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let r = t.relu(x);
                (t.sum_squares(r), vec![(0, x)])
            }),
        ));
        cases.push((
            "sigmoid",
            vec![rand_tensor(&mut rng, vec![8], -2.0, 2.0)],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let s = t.sigmoid(x);
                (t.sum_squares(s), vec![(0, x)])
            }),
        ));
        cases.push((
            "sum",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let (x, y) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let p = t.mul(x, y).unwrap();
                (t.sum(p), vec![(0, x), (1, y)])
            }),
        ));
        cases.push((
            "sum_squares",
            vec![a.clone()],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                (t.sum_squares(x), vec![(0, x)])
            }),
        ));
        let mat = rand_tensor(&mut rng, vec![4, 7], -1.0, 1.0);
        let vecin = rand_tensor(&mut rng, vec![7], -1.0, 1.0);
        cases.push((
            "matvec",
            vec![mat, vecin],
            Box::new(|t, v| {
                let (m, x) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let y = t.matvec(m, x).unwrap();
                (t.sum_squares(y), vec![(0, m), (1, x)])
            }),
        ));
        let img = rand_tensor(&mut rng, vec![2, 6, 6], -1.0, 1.0);
        let ker = rand_tensor(&mut rng, vec![3, 2, 3, 3], -0.5, 0.5);
        cases.push((
            "conv2d",
            vec![img.clone(), ker],
            Box::new(|t, v| {
                let (x, k) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let c = t.conv2d(x, k).unwrap();
                (t.sum_squares(c), vec![(0, x), (1, k)])
            }),
        ));
        cases.push((
            "upsample2x",
            vec![img.clone()],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let u = t.upsample2x(x).unwrap();
                (t.sum_squares(u), vec![(0, x)])
            }),
        ));
        let gamma = rand_tensor(&mut rng, vec![2], 0.5, 1.5);
        let beta = rand_tensor(&mut rng, vec![2], -0.3, 0.3);
        cases.push((
            "channel_affine",
            vec![img.clone(), gamma, beta],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let g = t.leaf(v[1].clone());
                let b = t.leaf(v[2].clone());
                let y = t.channel_affine(x, g, b).unwrap();
                (t.sum_squares(y), vec![(0, x), (1, g), (2, b)])
            }),
        ));
        cases.push((
            "slice_stack",
            vec![img.clone()],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let c0 = t.slice_channel(x, 0).unwrap();
                let c1 = t.slice_channel(x, 1).unwrap();
                let packed = t.stack2(c1, c0).unwrap();
                (t.sum_squares(packed), vec![(0, x)])
            }),
        ));
        let fa = rand_tensor(&mut rng, vec![2, 4, 4], -1.0, 1.0);
        let fb = rand_tensor(&mut rng, vec![2, 4, 4], -1.0, 1.0);
        cases.push((
            "complex_mul",
            vec![fa.clone(), fb],
            Box::new(|t, v| {
                let (x, y) = (t.leaf(v[0].clone()), t.leaf(v[1].clone()));
                let p = t.complex_mul(x, y).unwrap();
                (t.sum_squares(p), vec![(0, x), (1, y)])
            }),
        ));
        cases.push((
            "squared_magnitude",
            vec![fa.clone()],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let m = t.squared_magnitude(x).unwrap();
                (t.sum_squares(m), vec![(0, x)])
            }),
        ));
        let field = rand_tensor(&mut rng, vec![2, 8, 8], -1.0, 1.0);
        cases.push((
            "fft2",
            vec![field.clone()],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let s = t.fft2(x).unwrap();
                (t.sum_squares(s), vec![(0, x)])
            }),
        ));
        cases.push((
            "ifft2",
            vec![field],
            Box::new(|t, v| {
                let x = t.leaf(v[0].clone());
                let s = t.ifft2(x).unwrap();
                (t.sum_squares(s), vec![(0, x)])
            }),
        ));

        // composite: latent -> decoder block -> head -> CS residual
        let z = rand_tensor(&mut rng, vec![3, 4, 4], -1.0, 1.0);
        let k0 = rand_tensor(&mut rng, vec![3, 3, 3, 3], -0.4, 0.4);
        let g0 = rand_tensor(&mut rng, vec![3], 0.8, 1.2);
        let b0 = rand_tensor(&mut rng, vec![3], -0.1, 0.1);
        let kh = rand_tensor(&mut rng, vec![1, 3, 3, 3], -0.4, 0.4);
        let phi = rand_tensor(&mut rng, vec![10, 64], -0.3, 0.3);
        let y_obs = rand_tensor(&mut rng, vec![10], -0.5, 0.5);
        cases.push((
            "generator_through_cs",
            vec![z.clone(), k0.clone(), g0.clone(), b0.clone(), kh.clone(), phi, y_obs],
            Box::new(|t, v| {
                let z = t.constant(v[0].clone());
                let k0 = t.leaf(v[1].clone());
                let g0 = t.leaf(v[2].clone());
                let b0 = t.leaf(v[3].clone());
                let kh = t.leaf(v[4].clone());
                let phi = t.constant(v[5].clone());
                let y = t.constant(v[6].clone());
                let up = t.upsample2x(z).unwrap();
                let c = t.conv2d(up, k0).unwrap();
                let af = t.channel_affine(c, g0, b0).unwrap();
                let r = t.relu(af);
                let head = t.conv2d(r, kh).unwrap();
                let x = t.sigmoid(head);
                let yhat = t.matvec(phi, x).unwrap();
                let res = t.sub(y, yhat).unwrap();
                (t.sum_squares(res), vec![(1, k0), (2, g0), (3, b0), (4, kh)])
            }),
        ));

        // composite: two-channel decoder -> object wave -> hologram residual
        let kh2 = rand_tensor(&mut rng, vec![2, 3, 3, 3], -0.4, 0.4);
        let transfer = build_transfer_function(&HolographyParam {
            wavelength_um: 0.52,
            distance_um: 900.0,
            pixel_pitch_um: 2.0,
            grid: 8,
        })
        .unwrap()
        .to_packed();
        let y_holo = rand_tensor(&mut rng, vec![8, 8], 0.0, 1.5);
        cases.push((
            "generator_through_hologram",
            vec![z, k0, g0, b0, kh2, transfer, y_holo],
            Box::new(|t, v| {
                let z = t.constant(v[0].clone());
                let k0 = t.leaf(v[1].clone());
                let g0 = t.leaf(v[2].clone());
                let b0 = t.leaf(v[3].clone());
                let kh = t.leaf(v[4].clone());
                let p = t.constant(v[5].clone());
                let y = t.constant(v[6].clone());
                let up = t.upsample2x(z).unwrap();
                let c = t.conv2d(up, k0).unwrap();
                let af = t.channel_affine(c, g0, b0).unwrap();
                let r = t.relu(af);
                let head = t.conv2d(r, kh).unwrap();
                let out = t.sigmoid(head);
                let amp = t.slice_channel(out, 0).unwrap();
                let ph_frac = t.slice_channel(out, 1).unwrap();
                let ph = t.scale(ph_frac, 2.0 * std::f64::consts::PI);
                let cosp = t.cos(ph);
                let sinp = t.sin(ph);
                let re = t.mul(amp, cosp).unwrap();
                let im = t.mul(amp, sinp).unwrap();
                let obj = t.stack2(re, im).unwrap();
                let spec = t.fft2(obj).unwrap();
                let filt = t.complex_mul(p, spec).unwrap();
                let sensor = t.ifft2(filt).unwrap();
                let intensity = t.squared_magnitude(sensor).unwrap();
                let res = t.sub(y, intensity).unwrap();
                (t.sum_squares(res), vec![(1, k0), (2, g0), (3, b0), (4, kh)])
            }),
        ));
    }

    let mut worst_overall: f64 = 0.0;
    for (name, inputs, build) in &cases {
        let err = fd_max_rel_error(build.as_ref(), inputs);
        assert!(err < FD_TOLERANCE, "{}: max relative FD error {:.3e}", name, err);
        worst_overall = worst_overall.max(err);
    }

    // detach: gradients through a detached path must vanish identically
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::new(vec![4], vec![0.2, -0.4, 0.9, 1.5]).unwrap());
    let d = tape.detach(x);
    let loss = tape.sum_squares(d);
    let map = tape.backward(loss).unwrap();
    assert!(map.get(x).unwrap().data().iter().all(|&v| v == 0.0));

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "gradient suite took {:?}", elapsed);
    println!(
        "[PASS] criterion 1: gradient suite, {} checks x {} seeds, max rel err {:.3e}, {:?}",
        cases.len() / FD_SEEDS as usize,
        FD_SEEDS,
        worst_overall,
        elapsed
    );
}

// ---------------------------------------------------------------------------
// criterion 2: stop-gradient suite

/// Builds a small reconstruction problem; returns the tape, per-candidate
/// loss nodes, and the trainable leaf.
fn small_candidate_problem(seed: u64, tape: &mut Tape) -> (Vec<NodeId>, NodeId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.leaf(rand_tensor(&mut rng, vec![6], -1.0, 1.0));
    let mix = tape.constant(rand_tensor(&mut rng, vec![8, 6], -0.6, 0.6));
    let hidden = tape.matvec(mix, w).unwrap();
    let x = tape.sigmoid(hidden);
    let mut nodes = Vec::new();
    for _ in 0..4 {
        let phi = tape.constant(rand_tensor(&mut rng, vec![5, 8], -0.5, 0.5));
        let y = tape.constant(rand_tensor(&mut rng, vec![5], -0.8, 0.8));
        let yhat = tape.matvec(phi, x).unwrap();
        let r = tape.sub(y, yhat).unwrap();
        nodes.push(tape.sum_squares(r));
    }
    (nodes, w)
}

#[test]
fn criterion_2_stop_gradient_suite() {
    let mut worst = 0.0f64;
    let mut control_gap = f64::INFINITY;
    for seed in 0..FD_SEEDS {
        // route A: single backward through the aggregated stop-gradient loss
        let mut tape = Tape::new();
        let (nodes, w) = small_candidate_problem(seed, &mut tape);
        let values: Vec<f64> = nodes.iter().map(|&n| tape.value(n).item()).collect();
        let weights = ma_weights(&values).unwrap();
        let losses = CandidateLosses { nodes: nodes.clone(), values: values.clone() };
        let l_ma = aggregate_loss(&mut tape, &weights, &losses).unwrap();
        let grad_ma = tape.backward(l_ma).unwrap().take(w);

        // route B: per-candidate backwards combined with frozen weights
        let mut frozen = Tensor::zeros(vec![6]);
        for (k, &node) in nodes.iter().enumerate() {
            let gk = tape.backward(node).unwrap().take(w);
            for (acc, g) in frozen.data_mut().iter_mut().zip(gk.data()) {
                *acc += weights.values()[k] * g;
            }
        }
        let scale = frozen.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
        for (a, b) in grad_ma.data().iter().zip(frozen.data()) {
            worst = worst.max((a - b).abs() / scale);
        }

        // control: weights computed on-tape without stop-gradient
        let mut tape = Tape::new();
        let (nodes, w) = small_candidate_problem(seed, &mut tape);
        let mut exps = Vec::new();
        for &n in &nodes {
            let r = tape.recip(n);
            exps.push(tape.exp(r));
        }
        let mut total = exps[0];
        for &e in &exps[1..] {
            total = tape.add(total, e).unwrap();
        }
        let mut control: Option<NodeId> = None;
        for (&e, &n) in exps.iter().zip(&nodes) {
            let wk = tape.div(e, total).unwrap();
            let term = tape.mul(wk, n).unwrap();
            control = Some(match control {
                Some(c) => tape.add(c, term).unwrap(),
                None => term,
            });
        }
        let grad_control = tape.backward(control.unwrap()).unwrap().take(w);
        let diff = grad_control
            .data()
            .iter()
            .zip(grad_ma.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        control_gap = control_gap.min(diff / scale);
    }
    assert!(worst < 1e-10, "stop-gradient identity violated: rel err {:.3e}", worst);
    assert!(
        control_gap > 1e-6,
        "non-detached control should differ measurably, min rel gap {:.3e}",
        control_gap
    );
    println!(
        "[PASS] criterion 2: stop-gradient identity rel err {:.3e}; non-detached control deviates by >= {:.3e}",
        worst, control_gap
    );
}

// ---------------------------------------------------------------------------
// criterion 3: weight-function suite

#[test]
fn criterion_3_weight_function_suite() {
    // simplex across random nonnegative inputs
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..200 {
        let n = 2 + (rng.random::<u64>() % 8) as usize;
        let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let w = ma_weights(&f).unwrap();
        let sum: f64 = w.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w.values().iter().all(|&v| v >= 0.0));
        // monotone: smaller loss, larger weight
        for i in 0..n {
            for j in 0..n {
                if f[i] < f[j] {
                    assert!(
                        w.values()[i] >= w.values()[j],
                        "F{}={} < F{}={} but w{}={} < w{}={}",
                        i, f[i], j, f[j], i, w.values()[i], j, w.values()[j]
                    );
                }
            }
        }
    }

    // strict monotonicity on a clean pair
    let w = ma_weights(&[0.5, 0.9]).unwrap();
    assert!(w.values()[0] > w.values()[1]);

    // concentration: one candidate near zero loss takes almost all weight
    let f = [1e-6, 1.0, 1.0, 1.0, 1.0];
    let w = ma_weights(&f).unwrap();
    assert!(w.values()[0] > 1.0 - 1e-9, "w0 = {}", w.values()[0]);

    // overflow robustness at the floor
    let w = ma_weights(&[1e-20, 1.0]).unwrap();
    assert!(w.values().iter().all(|v| v.is_finite()));
    assert!((w.values()[0] - 1.0).abs() < 1e-15);

    // derived two-candidate value
    let w = ma_weights(&[0.1, 1.0]).unwrap();
    assert!((w.values()[0] - 0.99987660).abs() < 1e-8, "w0 = {:.10}", w.values()[0]);

    println!("[PASS] criterion 3: simplex, monotonicity, concentration, overflow, w=(0.99987660, ...)");
}

// ---------------------------------------------------------------------------
// criterion 4: physics suite

fn random_packed_field(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    rand_tensor(rng, vec![2, n, n], -1.0, 1.0)
}

#[test]
fn criterion_4_physics_suite() {
    let started = Instant::now();
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // adjoint identity: <F u, v> == <u, F^H v>, F^H taken from the tape
    let u_val = random_packed_field(&mut rng, n);
    let v_val = random_packed_field(&mut rng, n);
    let mut tape = Tape::new();
    let u = tape.leaf(u_val.clone());
    let v = tape.constant(v_val.clone());
    let fu = tape.fft2(u).unwrap();
    let prod = tape.mul(fu, v).unwrap();
    let ip = tape.sum(prod);
    let lhs = tape.value(ip).item();
    let adj = tape.backward(ip).unwrap().take(u);
    let rhs: f64 = u_val.data().iter().zip(adj.data()).map(|(a, b)| a * b).sum();
    let adj_err = (lhs - rhs).abs();
    assert!(adj_err < 1e-8, "adjoint identity off by {:.3e}", adj_err);

    // Parseval at the chosen normalization
    let mut tape = Tape::new();
    let u = tape.constant(u_val.clone());
    let fu = tape.fft2(u).unwrap();
    let parseval_rel = {
        let lhs = tape.value(fu).squared_norm();
        let rhs = (n * n) as f64 * u_val.squared_norm();
        (lhs - rhs).abs() / rhs
    };
    assert!(parseval_rel < 1e-9, "Parseval rel err {:.3e}", parseval_rel);

    // propagation round trip d then -d
    let optics = |d: f64| HolographyParam {
        wavelength_um: 0.52,
        distance_um: d,
        pixel_pitch_um: 2.0,
        grid: n,
    };
    let field = momagg::complex::ComplexField::from_packed(&random_packed_field(&mut rng, n)).unwrap();
    let fwd = build_transfer_function(&optics(4321.0)).unwrap();
    let back = build_transfer_function(&optics(-4321.0)).unwrap();
    let round = propagate(&propagate(&field, &fwd).unwrap(), &back).unwrap();
    let mut round_err = 0.0f64;
    for j in 0..n * n {
        round_err = round_err.max((round.re().data()[j] - field.re().data()[j]).abs());
        round_err = round_err.max((round.im().data()[j] - field.im().data()[j]).abs());
    }
    assert!(round_err < 1e-9, "round trip err {:.3e}", round_err);

    // transfer-function composition over distance
    let pa = build_transfer_function(&optics(1111.0)).unwrap();
    let pb = build_transfer_function(&optics(2222.0)).unwrap();
    let pc = build_transfer_function(&optics(3333.0)).unwrap();
    let prod = pa.mul(&pb).unwrap();
    let mut comp_err = 0.0f64;
    for j in 0..n * n {
        comp_err = comp_err.max((prod.re().data()[j] - pc.re().data()[j]).abs());
        comp_err = comp_err.max((prod.im().data()[j] - pc.im().data()[j]).abs());
    }
    assert!(comp_err < 1e-10, "composition err {:.3e}", comp_err);

    // hologram invariance under a global phase
    let h0 = hologram(&field, &optics(5000.0)).unwrap();
    let h1 = hologram(&field.rotate_phase(1.234), &optics(5000.0)).unwrap();
    let mut phase_err = 0.0f64;
    for j in 0..n * n {
        phase_err = phase_err.max((h0.data()[j] - h1.data()[j]).abs());
    }
    assert!(phase_err < 1e-10, "global-phase err {:.3e}", phase_err);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "physics suite took {:?}", elapsed);
    println!(
        "[PASS] criterion 4: adjoint {:.1e}, Parseval {:.1e}, round-trip {:.1e}, composition {:.1e}, phase {:.1e}, {:?}",
        adj_err, parseval_rel, round_err, comp_err, phase_err, elapsed
    );
}

// ---------------------------------------------------------------------------
// criteria 5-7: desk-scale reconstruction comparisons (built once)

struct DeskScale {
    cs: Comparison,
    holo: Comparison,
}

fn fixture_idx_path() -> String {
    if let Ok(p) = std::env::var("MNIST_IDX_PATH") {
        return p;
    }
    format!("{}/tests/data/digits-fixture-idx3-ubyte", env!("CARGO_MANIFEST_DIR"))
}

fn cs_desk_config() -> ExperimentConfig {
    ExperimentConfig {
        task: Task::Cs,
        dataset: "mnist".into(),
        idx_path: Some(fixture_idx_path()),
        image_path: None,
        sample: 3,
        m: Some(200),
        lambda_um: None,
        z_um: None,
        pitch_um: None,
        grid: None,
        size: None,
        n_candidates: 10,
        strategies: vec!["oracle".into(), "ma".into(), "random".into()],
        iterations: Some(2000),
        lr: 1e-3,
        seeds: Seeds { data: 1, candidates: 2, generator: 3 },
        out: String::new(),
        base_channels: Some(48),
        num_blocks: Some(2),
    }
}

fn holo_desk_config() -> ExperimentConfig {
    ExperimentConfig {
        task: Task::Holography,
        dataset: "phantom-blobs".into(),
        idx_path: None,
        image_path: None,
        sample: 0,
        m: None,
        lambda_um: Some(0.520),
        z_um: Some(5000.0),
        pitch_um: Some(2.0),
        grid: Some(64),
        size: None,
        n_candidates: 10,
        strategies: vec!["oracle".into(), "ma".into(), "alternating".into(), "uniform".into()],
        iterations: Some(2500),
        lr: 1e-3,
        seeds: Seeds { data: 1, candidates: 2, generator: 3 },
        out: String::new(),
        base_channels: Some(32),
        num_blocks: Some(3),
    }
}

static DESK: OnceLock<Result<DeskScale, String>> = OnceLock::new();

fn desk_scale() -> &'static DeskScale {
    DESK.get_or_init(|| {
        let cs = run_comparison(&cs_desk_config()).map_err(|e| e.to_string())?;
        let holo = run_comparison(&holo_desk_config()).map_err(|e| e.to_string())?;
        Ok(DeskScale { cs, holo })
    })
    .as_ref()
    .expect("desk-scale reconstruction runs failed")
}

fn row<'a>(cmp: &'a Comparison, name: &str) -> &'a momagg::harness::SummaryRow {
    cmp.rows.iter().find(|r| r.strategy == name).expect("strategy row present")
}

#[test]
fn criterion_5_cs_comparison() {
    let desk = desk_scale();
    let oracle = row(&desk.cs, "oracle");
    let ma = row(&desk.cs, "ma");
    let random = row(&desk.cs, "random");

    assert!(oracle.psnr >= 17.0, "(a) oracle PSNR {:.3} < 17 dB", oracle.psnr);
    let gap = oracle.psnr - ma.psnr;
    assert!(gap <= 2.5, "(b) MA trails oracle by {:.3} dB > 2.5", gap);
    assert!(random.psnr <= 12.0, "(c) random-fixed mean PSNR {:.3} > 12 dB", random.psnr);
    let lead = ma.psnr - random.psnr;
    assert!(lead >= 4.0, "(d) MA beats random-fixed mean by {:.3} dB < 4", lead);
    for r in &desk.cs.rows {
        assert_eq!(r.failed, 0, "strategy {} had diverged runs", r.strategy);
        let per_strategy_s = r.total_s;
        assert!(
            per_strategy_s < 900.0,
            "strategy {} took {:.0} s (> 15 min)",
            r.strategy,
            per_strategy_s
        );
    }
    println!(
        "[PASS] criterion 5: oracle {:.2} dB, MA {:.2} dB (gap {:.2}), random mean {:.2} dB (MA lead {:.2})",
        oracle.psnr, ma.psnr, gap, random.psnr, lead
    );
}

#[test]
fn criterion_6_holography_comparison() {
    let desk = desk_scale();
    let oracle = row(&desk.holo, "oracle");
    let ma = row(&desk.holo, "ma");
    let alternating = row(&desk.holo, "alternating");
    let uniform = row(&desk.holo, "uniform");

    let ma_gap = oracle.psnr - ma.psnr;
    assert!(ma_gap <= 2.5, "MA trails oracle by {:.3} dB > 2.5", ma_gap);
    let alt_gap = oracle.psnr - alternating.psnr;
    assert!(alt_gap >= 3.0, "alternating gap {:.3} dB < 3", alt_gap);
    let uni_gap = oracle.psnr - uniform.psnr;
    assert!(uni_gap >= 3.0, "uniform gap {:.3} dB < 3", uni_gap);
    for r in &desk.holo.rows {
        assert!(r.total_s < 1800.0, "strategy {} took {:.0} s (> 30 min)", r.strategy, r.total_s);
    }
    println!(
        "[PASS] criterion 6: oracle {:.2} dB, MA gap {:.2} dB, alternating gap {:.2} dB, uniform gap {:.2} dB",
        oracle.psnr, ma_gap, alt_gap, uni_gap
    );
}

#[test]
fn criterion_7_runtime_accounting() {
    let desk = desk_scale();
    let n_c = desk.cs.config.n_candidates as f64;
    let oracle = row(&desk.cs, "oracle");
    let ma = row(&desk.cs, "ma");

    let ratio = ma.mean_iter_ms / oracle.mean_iter_ms;
    assert!(ratio > 1.0, "MA per-iteration time ratio {:.3} should exceed 1", ratio);
    assert!(ratio < n_c, "MA per-iteration time ratio {:.3} should stay below n_c = {}", ratio, n_c);
    assert!(
        ma.total_s < n_c * oracle.total_s,
        "MA total {:.1} s vs n_c x oracle {:.1} s",
        ma.total_s,
        n_c * oracle.total_s
    );
    println!(
        "[PASS] criterion 7: MA/oracle per-iteration ratio {:.3} (1 < ratio < {}), totals {:.1} s vs {:.1} s",
        ratio, n_c, ma.total_s, oracle.total_s
    );
}

// ---------------------------------------------------------------------------
// criterion 8: metric oracles

/// Independent PSNR: direct formula over the raw pixel loop.
fn psnr_reference(a: &Tensor, b: &Tensor) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x.clamp(0.0, 1.0) - y.clamp(0.0, 1.0);
        acc += d * d;
    }
    let mse = acc / a.numel() as f64;
    10.0 * (1.0 / mse).log10()
}

/// Independent SSIM: explicit 11x11 Gaussian-weighted sums per window.
fn ssim_reference(a: &Tensor, b: &Tensor) -> f64 {
    let (h, w) = (a.shape()[0], a.shape()[1]);
    let win = 11usize;
    let sigma = 1.5f64;
    let mut k = vec![0.0; win];
    for (i, kv) in k.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *kv = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let s: f64 = k.iter().sum();
    for kv in k.iter_mut() {
        *kv /= s;
    }
    let (c1, c2) = (0.01f64 * 0.01, 0.03f64 * 0.03);
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - win) {
        for x0 in 0..=(w - win) {
            let (mut mx, mut my, mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let wt = k[i] * k[j];
                    let xv = a.data()[(y0 + i) * w + (x0 + j)];
                    let yv = b.data()[(y0 + i) * w + (x0 + j)];
                    mx += wt * xv;
                    my += wt * yv;
                    exx += wt * xv * xv;
                    eyy += wt * yv * yv;
                    exy += wt * xv * yv;
                }
            }
            let (vx, vy, cov) = (exx - mx * mx, eyy - my * my, exy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn criterion_8_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst_psnr = 0.0f64;
    let mut worst_ssim = 0.0f64;
    for _ in 0..10 {
        let a = rand_tensor(&mut rng, vec![32, 32], 0.0, 1.0);
        let mut b = a.clone();
        for v in b.data_mut().iter_mut() {
            *v = (*v + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
        }
        worst_psnr = worst_psnr
            .max((metrics::psnr(&a, &b).unwrap() - psnr_reference(&a, &b)).abs());
        worst_ssim = worst_ssim
            .max((metrics::ssim(&a, &b).unwrap() - ssim_reference(&a, &b)).abs());
    }
    assert!(worst_psnr < 1e-6, "psnr deviates from reference by {:.3e}", worst_psnr);
    assert!(worst_ssim < 1e-6, "ssim deviates from reference by {:.3e}", worst_ssim);

    // pinned direct values
    let a = Tensor::full(vec![16, 16], 0.5);
    let b = Tensor::full(vec![16, 16], 0.6);
    assert!((metrics::psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    assert_eq!(metrics::psnr(&a, &a).unwrap(), f64::INFINITY);
    assert!((metrics::ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);

    println!(
        "[PASS] criterion 8: psnr oracle gap {:.2e}, ssim oracle gap {:.2e}",
        worst_psnr, worst_ssim
    );
}
