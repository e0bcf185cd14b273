//! Randomised finite-difference checks of every kernel's backward pass, plus
//! an end-to-end check of a tiny network.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_vector, finite_difference_check, GradCheckConfig, GradCheckReport, TensorCheck};
use crate::error::Result;
use crate::kernels::{
    activation_backward, activation_forward, batchnorm_backward, batchnorm_forward, conv1d_backward,
    conv1d_forward, dense_backward, dense_forward, dropout_backward, global_average_pool,
    global_average_pool_backward, maxpool1d, maxpool1d_backward, spatial_dropout_with_mask, Activation,
    BatchNormState, Mode,
};
use crate::model::{
    apply_gating, build, gating_backward, ArchitectureSpec, ConvBlockSpec, GatingModule, HeadLayerSpec,
    RecurrentKind, RecurrentLayerSpec,
};
use crate::recurrent::{bidirectional, bidirectional_backward, bptt_backward, run_sequence, CellKind, RecurrentParams};
use crate::seed;
use crate::tensor::Tensor;

pub const KERNELS: [&str; 13] = [
    "conv1d",
    "batchnorm_train",
    "batchnorm_infer",
    "maxpool",
    "dense",
    "relu",
    "sigmoid",
    "tanh",
    "global_avg_pool",
    "gating",
    "spatial_dropout",
    "lstm",
    "gru",
];

/// Outcome of all random cases for one kernel.
#[derive(Debug, Clone, Serialize)]
pub struct KernelResult {
    pub kernel: String,
    pub cases: usize,
    pub passed_cases: usize,
    pub max_rel_error: f64,
    /// Shape description and tensor name of the worst case.
    pub worst: String,
}

impl KernelResult {
    pub fn passed(&self) -> bool {
        self.passed_cases == self.cases
    }
}

struct Case {
    desc: String,
    checks: Vec<TensorCheck>,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values bounded away from zero, so a ReLU kink is never within one step.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.5);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn t(shape: &[usize], v: &[f64]) -> Result<Tensor<f64>> {
    Tensor::from_vec(shape, v.to_vec())
}

fn dot(a: &Tensor<f64>, w: &[f64]) -> f64 {
    a.data().iter().zip(w).map(|(x, y)| x * y).sum()
}

/// Runs `check_vector` over each named input while holding the others fixed.
fn check_inputs(
    inputs: Vec<(&str, Vec<f64>)>,
    grads: Vec<Vec<f64>>,
    cfg: &GradCheckConfig,
    mut eval: impl FnMut(&[Vec<f64>]) -> Result<f64>,
) -> Result<Vec<TensorCheck>> {
    let mut cur: Vec<Vec<f64>> = inputs.iter().map(|(_, v)| v.clone()).collect();
    let mut out = Vec::new();
    for (k, (name, base)) in inputs.iter().enumerate() {
        let check = check_vector(name, base, &grads[k], cfg, |probe| {
            cur[k].copy_from_slice(probe);
            eval(&cur)
        })?;
        cur[k].copy_from_slice(base);
        out.push(check);
    }
    Ok(out)
}

fn conv_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let (b, tl, ci, co) = (rng.random_range(1..=3), rng.random_range(3..=12), rng.random_range(1..=4), rng.random_range(1..=4));
    let k = rng.random_range(1..=tl.min(6));
    let (xs, ws, bs) = ([b, tl, ci], [k, ci, co], [co]);
    let x = uniform(rng, b * tl * ci, -1.0, 1.0);
    let w = uniform(rng, k * ci * co, -1.0, 1.0);
    let bias = uniform(rng, co, -1.0, 1.0);
    let up = uniform(rng, b * tl * co, -1.0, 1.0);
    let (_, cache) = conv1d_forward(&t(&xs, &x)?, &t(&ws, &w)?, &t(&bs, &bias)?)?;
    let g = conv1d_backward(cache, &t(&[b, tl, co], &up)?)?;
    let checks = check_inputs(
        vec![("x", x), ("weights", w), ("bias", bias)],
        vec![g.dx.into_data(), g.dw.into_data(), g.db.into_data()],
        cfg,
        |v| Ok(dot(&conv1d_forward(&t(&xs, &v[0])?, &t(&ws, &v[1])?, &t(&bs, &v[2])?)?.0, &up)),
    )?;
    Ok(Case { desc: format!("x{xs:?} k={k} c_out={co}"), checks })
}

fn bn_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig, mode: Mode) -> Result<Case> {
    let c = rng.random_range(1..=4);
    let shape: Vec<usize> = if rng.random::<bool>() {
        vec![rng.random_range(2..=4), rng.random_range(1..=5), c]
    } else {
        vec![rng.random_range(2..=6), c]
    };
    let n: usize = shape.iter().product();
    let x = uniform(rng, n, -2.0, 2.0);
    let gamma = uniform(rng, c, 0.5, 1.5);
    let beta = uniform(rng, c, -0.5, 0.5);
    let up = uniform(rng, n, -1.0, 1.0);
    let mut base = BatchNormState::<f64>::new(c);
    base.running_mean = t(&[c], &uniform(rng, c, -0.5, 0.5))?;
    base.running_var = t(&[c], &uniform(rng, c, 0.5, 2.0))?;
    let run = |x: &[f64], g: &[f64], be: &[f64]| -> Result<_> {
        let mut st = base.clone();
        st.gamma = t(&[c], g)?;
        st.beta = t(&[c], be)?;
        batchnorm_forward(&t(&shape, x)?, &mut st, mode)
    };
    let (_, cache) = run(&x, &gamma, &beta)?;
    let g = batchnorm_backward(cache, &t(&shape, &up)?)?;
    let checks = check_inputs(
        vec![("x", x.clone()), ("gamma", gamma.clone()), ("beta", beta.clone())],
        vec![g.dx.into_data(), g.dgamma.into_data(), g.dbeta.into_data()],
        cfg,
        |v| Ok(dot(&run(&v[0], &v[1], &v[2])?.0, &up)),
    )?;
    Ok(Case { desc: format!("x{shape:?}"), checks })
}

fn pool_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let pool = rng.random_range(2..=3);
    let (b, c) = (rng.random_range(1..=3), rng.random_range(1..=3));
    let tl = pool * rng.random_range(1..=4) + rng.random_range(0..pool);
    let n = b * tl * c;
    // Distinct values spaced well beyond the probe step, so no window ever ties.
    let mut ranks: Vec<usize> = (0..n).collect();
    ranks.shuffle(rng);
    let x: Vec<f64> = ranks.iter().map(|&r| r as f64 * 0.01 - 1.0).collect();
    let shape = [b, tl, c];
    let (y, cache) = maxpool1d(&t(&shape, &x)?, pool)?;
    let up = uniform(rng, y.len(), -1.0, 1.0);
    let dx = maxpool1d_backward(cache, &t(y.shape(), &up)?)?;
    let checks = check_inputs(vec![("x", x)], vec![dx.into_data()], cfg, |v| {
        Ok(dot(&maxpool1d(&t(&shape, &v[0])?, pool)?.0, &up))
    })?;
    Ok(Case { desc: format!("x{shape:?} pool={pool}"), checks })
}

fn dense_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let (b, di, dout) = (rng.random_range(1..=4), rng.random_range(1..=6), rng.random_range(1..=6));
    let x = uniform(rng, b * di, -1.0, 1.0);
    let w = uniform(rng, di * dout, -1.0, 1.0);
    let bias = uniform(rng, dout, -1.0, 1.0);
    let up = uniform(rng, b * dout, -1.0, 1.0);
    let (_, cache) = dense_forward(&t(&[b, di], &x)?, &t(&[di, dout], &w)?, &t(&[dout], &bias)?)?;
    let g = dense_backward(cache, &t(&[b, dout], &up)?)?;
    let checks = check_inputs(
        vec![("x", x), ("weights", w), ("bias", bias)],
        vec![g.dx.into_data(), g.dw.into_data(), g.db.into_data()],
        cfg,
        |v| Ok(dot(&dense_forward(&t(&[b, di], &v[0])?, &t(&[di, dout], &v[1])?, &t(&[dout], &v[2])?)?.0, &up)),
    )?;
    Ok(Case { desc: format!("x[{b}, {di}] -> {dout}"), checks })
}

fn activation_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig, act: Activation) -> Result<Case> {
    let shape = [rng.random_range(1..=3), rng.random_range(1..=5), rng.random_range(1..=4)];
    let n: usize = shape.iter().product();
    let x = match act {
        Activation::Relu => away_from_zero(rng, n),
        _ => uniform(rng, n, -4.0, 4.0),
    };
    let up = uniform(rng, n, -1.0, 1.0);
    let (_, cache) = activation_forward(&t(&shape, &x)?, act);
    let dx = activation_backward(cache, &t(&shape, &up)?)?;
    let checks = check_inputs(vec![("x", x)], vec![dx.into_data()], cfg, |v| {
        Ok(dot(&activation_forward(&t(&shape, &v[0])?, act).0, &up))
    })?;
    Ok(Case { desc: format!("x{shape:?}"), checks })
}

fn gap_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let shape = [rng.random_range(1..=3), rng.random_range(1..=8), rng.random_range(1..=5)];
    let x = uniform(rng, shape.iter().product(), -1.0, 1.0);
    let up = uniform(rng, shape[0] * shape[2], -1.0, 1.0);
    let (_, cache) = global_average_pool(&t(&shape, &x)?)?;
    let dx = global_average_pool_backward(cache, &t(&[shape[0], shape[2]], &up)?)?;
    let checks = check_inputs(vec![("x", x)], vec![dx.into_data()], cfg, |v| {
        Ok(dot(&global_average_pool(&t(&shape, &v[0])?)?.0, &up))
    })?;
    Ok(Case { desc: format!("x{shape:?}"), checks })
}

/// Gate over `dim` features with random weights; ReLU pre-activations are
/// kept away from the kink by construction of the first-layer bias.
pub fn gating_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig, b: usize, dim: usize, reduction: usize) -> Result<Vec<TensorCheck>> {
    let mut m = GatingModule::<f64>::zeros(dim, reduction);
    let h = m.hidden();
    let x = uniform(rng, b * dim, -1.0, 1.0);
    let w1 = uniform(rng, dim * h, -0.5, 0.5);
    let w2 = uniform(rng, h * dim, -1.0, 1.0);
    let b2 = uniform(rng, dim, -0.5, 0.5);
    m.fc1_weights = t(&[dim, h], &w1)?;
    let (pre, _) = dense_forward(&t(&[b, dim], &x)?, &m.fc1_weights, &Tensor::zeros(&[h]))?;
    // Pick biases so every pre-activation sits at least 0.05 from zero.
    let b1: Vec<f64> = (0..h)
        .map(|j| {
            let mut cand = rng.random_range(-0.5..0.5);
            for _ in 0..200 {
                if (0..b).all(|i| (pre.data()[i * h + j] + cand).abs() > 0.05) {
                    break;
                }
                cand = rng.random_range(-0.5..0.5);
            }
            cand
        })
        .collect();
    let up = uniform(rng, b * dim, -1.0, 1.0);
    let module = |v: &[Vec<f64>]| -> Result<GatingModule<f64>> {
        Ok(GatingModule {
            fc1_weights: t(&[dim, h], &v[1])?,
            fc1_bias: t(&[h], &v[2])?,
            fc2_weights: t(&[h, dim], &v[3])?,
            fc2_bias: t(&[dim], &v[4])?,
            reduction,
        })
    };
    let init = vec![x.clone(), w1.clone(), b1.clone(), w2.clone(), b2.clone()];
    let (_, cache) = apply_gating(&t(&[b, dim], &x)?, &module(&init)?)?;
    let (dx, g) = gating_backward(cache, &t(&[b, dim], &up)?)?;
    check_inputs(
        vec![("x", x), ("fc1.weights", w1), ("fc1.bias", b1), ("fc2.weights", w2), ("fc2.bias", b2)],
        vec![
            dx.into_data(),
            g.fc1_weights.into_data(),
            g.fc1_bias.into_data(),
            g.fc2_weights.into_data(),
            g.fc2_bias.into_data(),
        ],
        cfg,
        |v| Ok(dot(&apply_gating(&t(&[b, dim], &v[0])?, &module(v)?)?.0, &up)),
    )
}

fn gating_random_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let (b, dim, r) = (rng.random_range(1..=4), rng.random_range(1..=12), [2, 4][rng.random_range(0..2)]);
    Ok(Case { desc: format!("x[{b}, {dim}] r={r}"), checks: gating_case(rng, cfg, b, dim, r)? })
}

fn dropout_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let shape = [rng.random_range(1..=3), rng.random_range(1..=5), rng.random_range(1..=5)];
    let rate = rng.random_range(0.1..0.7);
    let mask: Vec<f64> = (0..shape[0] * shape[2])
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / (1.0 - rate) })
        .collect();
    let n: usize = shape.iter().product();
    let x = uniform(rng, n, -1.0, 1.0);
    let up = uniform(rng, n, -1.0, 1.0);
    let (_, cache) = spatial_dropout_with_mask(&t(&shape, &x)?, mask.clone())?;
    let dx = dropout_backward(cache, &t(&shape, &up)?)?;
    let checks = check_inputs(vec![("x", x)], vec![dx.into_data()], cfg, |v| {
        Ok(dot(&spatial_dropout_with_mask(&t(&shape, &v[0])?, mask.clone())?.0, &up))
    })?;
    Ok(Case { desc: format!("x{shape:?}"), checks })
}

fn random_params(rng: &mut ChaCha8Rng, kind: CellKind, d: usize, h: usize) -> RecurrentParams<f64> {
    let mut p = RecurrentParams::zeros(kind, d, h);
    for tensor in [&mut p.input_weights, &mut p.recurrent_weights, &mut p.bias] {
        for v in tensor.data_mut() {
            *v = rng.random_range(-0.7..0.7);
        }
    }
    p
}

fn with_values(base: &RecurrentParams<f64>, v: &[Vec<f64>]) -> Result<RecurrentParams<f64>> {
    let mut p = base.clone();
    p.input_weights.data_mut().copy_from_slice(&v[0]);
    p.recurrent_weights.data_mut().copy_from_slice(&v[1]);
    p.bias.data_mut().copy_from_slice(&v[2]);
    Ok(p)
}

fn recurrent_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig, kind: CellKind) -> Result<Case> {
    let (b, tl, d, h) = (rng.random_range(1..=3), rng.random_range(1..=6), rng.random_range(1..=4), rng.random_range(1..=4));
    let p = random_params(rng, kind, d, h);
    let shape = [b, tl, d];
    let x = uniform(rng, b * tl * d, -1.0, 1.0);
    let up = uniform(rng, b * tl * h, -1.0, 1.0);
    let (_, cache) = run_sequence(&t(&shape, &x)?, &p)?;
    let (dx, g) = bptt_backward(cache, &t(&[b, tl, h], &up)?)?;
    let checks = check_inputs(
        vec![
            ("input_weights", p.input_weights.data().to_vec()),
            ("recurrent_weights", p.recurrent_weights.data().to_vec()),
            ("bias", p.bias.data().to_vec()),
            ("x", x),
        ],
        vec![
            g.d_input_weights.into_data(),
            g.d_recurrent_weights.into_data(),
            g.d_bias.into_data(),
            dx.into_data(),
        ],
        cfg,
        |v| Ok(dot(&run_sequence(&t(&shape, &v[3])?, &with_values(&p, v)?)?.0, &up)),
    )?;
    Ok(Case { desc: format!("x{shape:?} hidden={h}"), checks })
}

fn bilstm_case(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    let (b, tl, d, h) = (rng.random_range(1..=2), rng.random_range(1..=5), rng.random_range(1..=3), rng.random_range(1..=3));
    let pf = random_params(rng, CellKind::Lstm, d, h);
    let pb = random_params(rng, CellKind::Lstm, d, h);
    let shape = [b, tl, d];
    let x = uniform(rng, b * tl * d, -1.0, 1.0);
    let up = uniform(rng, b * tl * 2 * h, -1.0, 1.0);
    let (_, cache) = bidirectional(&t(&shape, &x)?, &pf, &pb)?;
    let (dx, g) = bidirectional_backward(cache, &t(&[b, tl, 2 * h], &up)?)?;
    let checks = check_inputs(
        vec![
            ("forward.input_weights", pf.input_weights.data().to_vec()),
            ("forward.recurrent_weights", pf.recurrent_weights.data().to_vec()),
            ("forward.bias", pf.bias.data().to_vec()),
            ("backward.input_weights", pb.input_weights.data().to_vec()),
            ("backward.recurrent_weights", pb.recurrent_weights.data().to_vec()),
            ("backward.bias", pb.bias.data().to_vec()),
            ("x", x),
        ],
        vec![
            g.forward.d_input_weights.into_data(),
            g.forward.d_recurrent_weights.into_data(),
            g.forward.d_bias.into_data(),
            g.backward.d_input_weights.into_data(),
            g.backward.d_recurrent_weights.into_data(),
            g.backward.d_bias.into_data(),
            dx.into_data(),
        ],
        cfg,
        |v| {
            let f = with_values(&pf, &v[0..3])?;
            let bw = with_values(&pb, &v[3..6])?;
            Ok(dot(&bidirectional(&t(&shape, &v[6])?, &f, &bw)?.0, &up))
        },
    )?;
    Ok(Case { desc: format!("x{shape:?} hidden={h}"), checks })
}

fn run_case(kernel: &str, rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<Case> {
    match kernel {
        "conv1d" => conv_case(rng, cfg),
        "batchnorm_train" => bn_case(rng, cfg, Mode::Train),
        "batchnorm_infer" => bn_case(rng, cfg, Mode::Infer),
        "maxpool" => pool_case(rng, cfg),
        "dense" => dense_case(rng, cfg),
        "relu" => activation_case(rng, cfg, Activation::Relu),
        "sigmoid" => activation_case(rng, cfg, Activation::Sigmoid),
        "tanh" => activation_case(rng, cfg, Activation::Tanh),
        "global_avg_pool" => gap_case(rng, cfg),
        "gating" => gating_random_case(rng, cfg),
        "spatial_dropout" => dropout_case(rng, cfg),
        "lstm" => recurrent_case(rng, cfg, CellKind::Lstm),
        "gru" => recurrent_case(rng, cfg, CellKind::Gru),
        "bilstm" => bilstm_case(rng, cfg),
        other => Err(crate::error::Error::Usage(format!("unknown kernel {other:?}"))),
    }
}

/// Runs `cases` random shapes/seeds for one kernel.
pub fn check_kernel(kernel: &str, cases: usize, seed: u64, cfg: &GradCheckConfig) -> Result<KernelResult> {
    let mut result = KernelResult {
        kernel: kernel.to_string(),
        cases,
        passed_cases: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    for i in 0..cases {
        let mut rng = seed::rng(seed, kernel, &[i as u64]);
        let case = run_case(kernel, &mut rng, cfg)?;
        if case.checks.iter().all(|c| c.passed) {
            result.passed_cases += 1;
        }
        for c in &case.checks {
            if !(c.max_rel_error <= result.max_rel_error) {
                result.max_rel_error = c.max_rel_error;
                result.worst = format!("{} {}", case.desc, c.name);
            }
        }
    }
    Ok(result)
}

/// All kernels plus the bidirectional wrapper.
pub fn kernel_suite(cases: usize, seed: u64, cfg: &GradCheckConfig) -> Result<Vec<KernelResult>> {
    KERNELS
        .iter()
        .copied()
        .chain(std::iter::once("bilstm"))
        .map(|k| check_kernel(k, cases, seed, cfg))
        .collect()
}

/// Small network exercising every layer type: three conv blocks with four
/// filters, a GRU → BiLSTM → LSTM stack of width 3, the gate, one head layer
/// of width 8 and two outputs over a 32-step input.
pub fn tiny_spec() -> ArchitectureSpec {
    ArchitectureSpec {
        name: "tiny".into(),
        input_length: 32,
        input_leads: 12,
        conv_blocks: vec![
            ConvBlockSpec { filters: 4, kernel: 5, pool: 2, spatial_dropout: 0.1 },
            ConvBlockSpec { filters: 4, kernel: 4, pool: 2, spatial_dropout: 0.1 },
            ConvBlockSpec { filters: 4, kernel: 3, pool: 2, spatial_dropout: 0.0 },
        ],
        recurrent_stack: vec![
            RecurrentLayerSpec { kind: RecurrentKind::Gru, hidden: 3 },
            RecurrentLayerSpec { kind: RecurrentKind::Bilstm, hidden: 3 },
            RecurrentLayerSpec { kind: RecurrentKind::Lstm, hidden: 3 },
        ],
        head: vec![HeadLayerSpec { width: 8, dropout: 0.5 }],
        num_classes: 2,
        ..Default::default()
    }
}

/// End-to-end check of [`tiny_spec`] with frozen dropout masks.
/// `fault` optionally corrupts a dense layer's weight gradient.
pub fn tiny_model_check(seed: u64, cfg: &GradCheckConfig, fault: Option<(&str, f64)>) -> Result<GradCheckReport> {
    let mut model = build::<f64>(&tiny_spec(), seed)?;
    if let Some((layer, scale)) = fault {
        model.plant_gradient_fault(layer, scale)?;
    }
    model.freeze_dropout_masks(true);
    let mut rng = seed::rng(seed, "tiny-input", &[]);
    let x = Tensor::from_fn(&[4, 32, 12], |_| rng.random_range(-1.0..1.0));
    finite_difference_check(&mut model, &x, cfg, seed)
}
