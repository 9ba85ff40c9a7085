use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::NnError;
use crate::codec::{Reader, Writer};

const MAGIC: &[u8; 8] = b"VRTWMLP1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Layer widths from input to output; hidden layers use ReLU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub output: Activation,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize, activation: Activation) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self { widths, output: activation }
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            Activation::Relu
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    /// Layer weights stored `inputs x outputs` so a batch multiplies on the left.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Per-layer activations of a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `outputs[0]` is the input; `outputs[l + 1]` is layer `l` after activation.
    pub outputs: Vec<Array2<f64>>,
    /// Pre-activation values per layer.
    pub pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.flat().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }
}

impl Mlp {
    /// Fan-in uniform initialization; the last layer is further scaled by `final_scale`.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, final_scale: f64, rng: &mut R) -> Self {
        assert!(spec.widths.len() >= 2, "an MLP needs at least an input and an output layer");
        let layers = spec.layers();
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if l + 1 == layers {
                bound *= final_scale;
            }
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound)));
            biases.push(Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..=bound)));
        }
        Self { spec, weights, biases }
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let layers = spec.layers();
        let weights = (0..layers).map(|l| Array2::zeros((spec.widths[l], spec.widths[l + 1]))).collect();
        let biases = (0..layers).map(|l| Array1::zeros(spec.widths[l + 1])).collect();
        Self { spec, weights, biases }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, cols: usize) -> Result<(), NnError> {
        if cols != self.input_dim() {
            return Err(NnError::DimensionMismatch { expected: self.input_dim(), got: cols });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(batch)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for l in 0..self.spec.layers() {
            let act = self.spec.activation(l);
            let mut z = a.dot(&self.weights[l]) + &self.biases[l];
            z.mapv_inplace(|v| act.apply(v));
            a = z;
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: Array2<f64>) -> Result<ForwardCache, NnError> {
        self.check_input(x.ncols())?;
        let layers = self.spec.layers();
        let mut outputs = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        outputs.push(x);
        for l in 0..layers {
            let act = self.spec.activation(l);
            let z = outputs[l].dot(&self.weights[l]) + &self.biases[l];
            outputs.push(z.mapv(|v| act.apply(v)));
            pre.push(z);
        }
        Ok(ForwardCache { outputs, pre })
    }

    /// Back-propagates `upstream = dL/d(output)` through a cached pass.
    /// Returns parameter gradients and `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<(Gradients, Array2<f64>), NnError> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(NnError::DimensionMismatch { expected: out.ncols(), got: upstream.ncols() });
        }
        let layers = self.spec.layers();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        let mut grad = upstream.clone();
        for l in (0..layers).rev() {
            let act = self.spec.activation(l);
            Zip::from(&mut grad).and(&cache.outputs[l + 1]).for_each(|g, &y| *g *= act.derivative(y));
            gw[l] = cache.outputs[l].t().dot(&grad);
            gb[l] = grad.sum_axis(Axis(0));
            grad = grad.dot(&self.weights[l].t());
        }
        Ok((Gradients { weights: gw, biases: gb }, grad))
    }

    /// Flattened parameters in layer order (weights row-major, then biases).
    pub fn params_flat(&self) -> Vec<f64> {
        Gradients { weights: self.weights.clone(), biases: self.biases.clone() }.flat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.parameter_count() {
            return Err(NnError::DimensionMismatch { expected: self.parameter_count(), got: flat.len() });
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        self.write_into(&mut w);
        w.finish()
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.u8(self.spec.output.tag());
        w.u64(self.spec.widths.len() as u64);
        for &n in &self.spec.widths {
            w.u64(n as u64);
        }
        w.f64s(&self.params_flat());
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let corrupt = NnError::CorruptCheckpoint;
        let mut r = Reader::open(bytes, MAGIC, VERSION).map_err(corrupt)?;
        let net = Self::read_from(&mut r).map_err(corrupt)?;
        r.finish().map_err(corrupt)?;
        Ok(net)
    }

    pub(crate) fn read_from(r: &mut Reader) -> Result<Self, String> {
        let output = Activation::from_tag(r.u8()?).ok_or("unknown activation tag")?;
        let n = r.usize()?;
        if !(2..=64).contains(&n) {
            return Err(format!("implausible layer count {n}"));
        }
        let widths = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
        if widths.iter().any(|&w| w == 0 || w > 1 << 20) {
            return Err("implausible layer width".into());
        }
        let params = r.f64s()?;
        let mut net = Self::zeros(MlpSpec { widths, output });
        net.set_params_flat(&params).map_err(|e| e.to_string())?;
        Ok(net)
    }
}

/// Weighted squared error `(1/B) sum w_i (y_i - q_i)^2` and its gradient w.r.t. `q`.
pub fn critic_loss(q: &Array2<f64>, targets: &[f64], weights: &[f64]) -> Result<(f64, Array2<f64>), NnError> {
    let b = q.nrows();
    if q.ncols() != 1 {
        return Err(NnError::DimensionMismatch { expected: 1, got: q.ncols() });
    }
    for len in [targets.len(), weights.len()] {
        if len != b {
            return Err(NnError::DimensionMismatch { expected: b, got: len });
        }
    }
    let mut loss = 0.0;
    let mut grad = Array2::zeros((b, 1));
    for i in 0..b {
        let r = targets[i] - q[[i, 0]];
        loss += weights[i] * r * r;
        grad[[i, 0]] = -2.0 * weights[i] * r / b as f64;
    }
    Ok((loss / b as f64, grad))
}

/// `target <- tau * source + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<(), NnError> {
    if target.spec != source.spec {
        return Err(NnError::DimensionMismatch { expected: source.parameter_count(), got: target.parameter_count() });
    }
    assert!(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
    let blend = |t: &mut f64, &s: &f64| *t = tau * s + (1.0 - tau) * *t;
    for (t, s) in target.weights.iter_mut().zip(&source.weights) {
        Zip::from(t).and(s).for_each(blend);
    }
    for (t, s) in target.biases.iter_mut().zip(&source.biases) {
        Zip::from(t).and(s).for_each(blend);
    }
    Ok(())
}
