//! Finite-difference checks of every backward pass. Each check returns the
//! relative errors it measured; callers decide on the tolerance.

use super::{numeric_grad, project, random_tensor, rel_error, FD_STEP};
use headmotion::dsp::SpectrumMatrix;
use headmotion::nn::{
    relu, relu_grad, sigmoid, sigmoid_grad, softmax_cross_entropy, BatchNorm, Conv2d, Dense, Dropout, LayerSpec,
    Mode, Network, Padding,
};
use headmotion::siamese::{BackboneSpec, CnnClassifier, DistanceMode, SiameseModel};
use headmotion::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LAYER_TOL: f64 = 1e-5;
pub const DENSE_TOL: f64 = 1e-6;
pub const COMPOSED_TOL: f64 = 1e-4;
pub const SEEDS: u64 = 20;

/// One measured error with the tolerance it must meet.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: impl Into<String>, error: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.error < self.tol
    }
}

pub fn conv(seed: u64, stride: usize, relu_on: bool) -> Vec<Check> {
    let x = random_tensor(&[2, 4, 4, 2], seed, -1.0, 1.0);
    let w = random_tensor(&[3, 3, 2, 2], seed + 100, -0.5, 0.5);
    let b = random_tensor(&[2], seed + 200, -0.1, 0.1);
    let mut conv = Conv2d::new(w, b, stride, relu_on).unwrap();
    let (y, cache) = conv.forward(&x).unwrap();
    let r = random_tensor(y.shape(), seed + 300, -1.0, 1.0);
    let dx = conv.backward(&cache, r.clone(), true).unwrap().unwrap();
    let loss = |c: &Conv2d, x: &Tensor| project(c.infer(x).unwrap().data(), r.data());
    let tag = format!("conv s{stride} relu={relu_on} seed {seed}");

    let mut xd = x.data().to_vec();
    let nx = numeric_grad(&mut xd, |v| loss(&conv, &Tensor::new(x.shape().to_vec(), v.to_vec()).unwrap()));
    let mut probe = conv.clone();
    let mut wd = conv.weight.value.data().to_vec();
    let nw = numeric_grad(&mut wd, |v| {
        probe.weight.value.data_mut().copy_from_slice(v);
        loss(&probe, &x)
    });
    let mut probe = conv.clone();
    let mut bd = conv.bias.value.data().to_vec();
    let nb = numeric_grad(&mut bd, |v| {
        probe.bias.value.data_mut().copy_from_slice(v);
        loss(&probe, &x)
    });
    vec![
        Check::new(format!("{tag}: input"), rel_error(dx.data(), &nx), LAYER_TOL),
        Check::new(format!("{tag}: weight"), rel_error(conv.weight.grad.data(), &nw), LAYER_TOL),
        Check::new(format!("{tag}: bias"), rel_error(conv.bias.grad.data(), &nb), LAYER_TOL),
    ]
}

pub fn batchnorm(seed: u64, mode: Mode) -> Vec<Check> {
    let x = random_tensor(&[4, 3, 2, 3], seed, -2.0, 3.0);
    let mut bn = BatchNorm::new(3);
    bn.gamma.value = random_tensor(&[3], seed + 1, 0.5, 1.5);
    bn.beta.value = random_tensor(&[3], seed + 2, -0.5, 0.5);
    bn.running_mean = vec![0.2, -0.1, 0.4];
    bn.running_var = vec![1.5, 0.7, 2.0];
    let frozen = bn.clone();
    let (y, cache) = bn.forward(&x, mode).unwrap();
    let r = random_tensor(y.shape(), seed + 3, -1.0, 1.0);
    let dx = bn.backward(&cache, &r).unwrap();
    let loss = |b: &BatchNorm, x: &Tensor| {
        let mut b = b.clone();
        project(b.forward(x, mode).unwrap().0.data(), r.data())
    };
    let tag = format!("batchnorm {mode:?} seed {seed}");

    let mut xd = x.data().to_vec();
    let nx = numeric_grad(&mut xd, |v| loss(&frozen, &Tensor::new(x.shape().to_vec(), v.to_vec()).unwrap()));
    let mut probe = frozen.clone();
    let mut gd = frozen.gamma.value.data().to_vec();
    let ng = numeric_grad(&mut gd, |v| {
        probe.gamma.value.data_mut().copy_from_slice(v);
        loss(&probe, &x)
    });
    let mut probe = frozen.clone();
    let mut bd = frozen.beta.value.data().to_vec();
    let nb = numeric_grad(&mut bd, |v| {
        probe.beta.value.data_mut().copy_from_slice(v);
        loss(&probe, &x)
    });
    vec![
        Check::new(format!("{tag}: input"), rel_error(dx.data(), &nx), LAYER_TOL),
        Check::new(format!("{tag}: gamma"), rel_error(bn.gamma.grad.data(), &ng), LAYER_TOL),
        Check::new(format!("{tag}: beta"), rel_error(bn.beta.grad.data(), &nb), LAYER_TOL),
    ]
}

pub fn dense(seed: u64, relu_on: bool) -> Vec<Check> {
    let x = random_tensor(&[3, 7], seed, -1.0, 1.0);
    let w = random_tensor(&[7, 5], seed + 1, -0.6, 0.6);
    let b = random_tensor(&[5], seed + 2, -0.2, 0.2);
    let mut d = Dense::new(w, b, relu_on).unwrap();
    let (y, cache) = d.forward(&x).unwrap();
    let r = random_tensor(y.shape(), seed + 3, -1.0, 1.0);
    let dx = d.backward(&cache, r.clone(), true).unwrap().unwrap();
    let loss = |d: &Dense, x: &Tensor| project(d.infer(x).unwrap().data(), r.data());
    let tag = format!("dense relu={relu_on} seed {seed}");

    let mut xd = x.data().to_vec();
    let nx = numeric_grad(&mut xd, |v| loss(&d, &Tensor::new(vec![3, 7], v.to_vec()).unwrap()));
    let mut probe = d.clone();
    let mut wd = d.weight.value.data().to_vec();
    let nw = numeric_grad(&mut wd, |v| {
        probe.weight.value.data_mut().copy_from_slice(v);
        loss(&probe, &x)
    });
    let mut probe = d.clone();
    let mut bd = d.bias.value.data().to_vec();
    let nb = numeric_grad(&mut bd, |v| {
        probe.bias.value.data_mut().copy_from_slice(v);
        loss(&probe, &x)
    });
    vec![
        Check::new(format!("{tag}: input"), rel_error(dx.data(), &nx), DENSE_TOL),
        Check::new(format!("{tag}: weight"), rel_error(d.weight.grad.data(), &nw), DENSE_TOL),
        Check::new(format!("{tag}: bias"), rel_error(d.bias.grad.data(), &nb), DENSE_TOL),
    ]
}

pub fn dropout(seed: u64) -> Vec<Check> {
    let drop = Dropout::new(0.5).unwrap();
    let x = random_tensor(&[2, 3, 3, 2], seed, -1.0, 1.0);
    let (y, mask) = drop.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed));
    let r = random_tensor(y.shape(), seed + 1, -1.0, 1.0);
    let dx = Dropout::backward(mask.as_deref(), r.clone());
    let mut xd = x.data().to_vec();
    let nx = numeric_grad(&mut xd, |v| {
        let t = Tensor::new(x.shape().to_vec(), v.to_vec()).unwrap();
        let (y, _) = drop.forward(&t, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed));
        project(y.data(), r.data())
    });
    vec![Check::new(format!("dropout seed {seed}"), rel_error(dx.data(), &nx), LAYER_TOL)]
}

/// Element-wise activations on a grid, skipping the ReLU kink.
pub fn activations() -> Vec<Check> {
    let mut sig = 0.0f64;
    let mut rel = 0.0f64;
    for i in 0..200 {
        let x = -8.0 + i as f64 * 0.0801;
        let fd = (sigmoid(x + FD_STEP) - sigmoid(x - FD_STEP)) / (2.0 * FD_STEP);
        sig = sig.max((fd - sigmoid_grad(x)).abs() / sigmoid_grad(x));
        if x.abs() > 1e-3 {
            let fd = (relu(x + FD_STEP) - relu(x - FD_STEP)) / (2.0 * FD_STEP);
            rel = rel.max((fd - relu_grad(x)).abs());
        }
    }
    vec![
        Check::new("sigmoid", sig, LAYER_TOL),
        Check::new("relu", rel, LAYER_TOL),
    ]
}

fn micro_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            kernel: 2,
            stride: 1,
            filters: 3,
            padding: Padding::Same,
            relu: true,
        },
        LayerSpec::BatchNorm,
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 4, relu: false },
    ]
}

/// conv 2×2 → batch-norm (train) → dense, under softmax cross-entropy.
pub fn micro_network(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::build(&micro_specs(), &[4, 3, 1], &mut rng).unwrap();
    let x = random_tensor(&[4, 4, 3, 1], seed + 50, 0.0, 1.0);
    let labels = [0usize, 3, 1, 2];
    let loss_of = |net: &Network| -> f64 {
        let mut n = net.clone();
        let (y, _) = n.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        (0..4)
            .map(|i| softmax_cross_entropy(y.item(i), labels[i]).unwrap().0)
            .sum::<f64>()
            / 4.0
    };
    let frozen = net.clone();
    let (y, trace) = net.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut g = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        let (_, gi) = softmax_cross_entropy(y.item(i), label).unwrap();
        g.extend(gi.into_iter().map(|v| v / 4.0));
    }
    net.zero_grad();
    net.backward(&trace, Tensor::new(vec![4, 4], g).unwrap(), false).unwrap();
    let names = net.param_names();
    net.params()
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let mut probe = frozen.clone();
            let mut values = frozen.params()[pi].value.data().to_vec();
            let numeric = numeric_grad(&mut values, |v| {
                probe.params_mut()[pi].value.data_mut().copy_from_slice(v);
                loss_of(&probe)
            });
            Check::new(
                format!("micro-network seed {seed}: {}", names[pi]),
                rel_error(p.grad.data(), &numeric),
                COMPOSED_TOL,
            )
        })
        .collect()
}

fn tiny_backbone() -> BackboneSpec {
    BackboneSpec {
        input_shape: vec![5, 4, 1],
        layers: vec![
            LayerSpec::Conv {
                kernel: 3,
                stride: 2,
                filters: 3,
                padding: Padding::Same,
                relu: true,
            },
            LayerSpec::BatchNorm,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 6, relu: true },
            LayerSpec::Dense { units: 4, relu: false },
        ],
    }
}

fn tiny_matrices(seed: u64, n: usize) -> Vec<SpectrumMatrix> {
    (0..n)
        .map(|i| {
            let t = random_tensor(&[20], seed * 31 + i as u64, 0.0, 1.0);
            SpectrumMatrix::new(4, 5, t.into_data(), (i % 4) as u8).unwrap()
        })
        .collect()
}

/// Both twins, the distance and the head under the pair loss.
pub fn siamese(seed: u64, mode: DistanceMode) -> Vec<Check> {
    let mut model = SiameseModel::new(tiny_backbone(), mode, seed).unwrap();
    let ms = tiny_matrices(seed, 8);
    let x1: Vec<&SpectrumMatrix> = ms[..4].iter().collect();
    let x2: Vec<&SpectrumMatrix> = ms[4..].iter().collect();
    let t = [1.0, 0.0, 0.0, 1.0];
    let frozen = model.clone();
    model.loss_and_grad(&x1, &x2, &t, 7).unwrap();
    let names = model.param_names();
    model
        .params()
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let mut probe = frozen.clone();
            let mut values = frozen.params()[pi].value.data().to_vec();
            let numeric = numeric_grad(&mut values, |v| {
                probe.params_mut()[pi].value.data_mut().copy_from_slice(v);
                probe.clone().loss_and_grad(&x1, &x2, &t, 7).unwrap()
            });
            Check::new(
                format!("siamese {mode:?} seed {seed}: {}", names[pi]),
                rel_error(p.grad.data(), &numeric),
                COMPOSED_TOL,
            )
        })
        .collect()
}

pub fn cnn(seed: u64) -> Vec<Check> {
    let mut model = CnnClassifier::new(tiny_backbone(), 4, seed).unwrap();
    let ms = tiny_matrices(seed + 99, 6);
    let items: Vec<&SpectrumMatrix> = ms.iter().collect();
    let frozen = model.clone();
    model.loss_and_grad(&items, 3).unwrap();
    let names = model.param_names();
    model
        .params()
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let mut probe = frozen.clone();
            let mut values = frozen.params()[pi].value.data().to_vec();
            let numeric = numeric_grad(&mut values, |v| {
                probe.params_mut()[pi].value.data_mut().copy_from_slice(v);
                probe.clone().loss_and_grad(&items, 3).unwrap()
            });
            Check::new(
                format!("cnn seed {seed}: {}", names[pi]),
                rel_error(p.grad.data(), &numeric),
                COMPOSED_TOL,
            )
        })
        .collect()
}

/// Every check above over `SEEDS` seeds.
pub fn full_suite() -> Vec<Check> {
    let mut all = activations();
    for seed in 0..SEEDS {
        for (stride, relu_on) in [(1, false), (2, false), (1, true), (2, true)] {
            all.extend(conv(seed, stride, relu_on));
        }
        all.extend(batchnorm(seed, Mode::Train));
        all.extend(batchnorm(seed, Mode::Infer));
        all.extend(dense(seed, false));
        all.extend(dense(seed, true));
        all.extend(dropout(seed));
        all.extend(micro_network(seed));
        all.extend(siamese(seed, DistanceMode::AbsDiff));
        all.extend(siamese(seed, DistanceMode::Norm));
        all.extend(cnn(seed));
    }
    all
}
