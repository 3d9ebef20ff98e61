use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense layer, weights stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Layer {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Multilayer perceptron with rectified hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub layers: Vec<Layer>,
}

/// One training target: input, output index, desired value.
#[derive(Debug, Clone, PartialEq)]
pub struct Target<'a> {
    pub input: &'a [f64],
    pub output: usize,
    pub value: f64,
}

impl QNetwork {
    pub fn zeros(dims: &[usize]) -> Result<QNetwork> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {dims:?}")));
        }
        Ok(QNetwork {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// He-uniform weights, zero biases.
    pub fn random<R: Rng>(dims: &[usize], rng: &mut R) -> Result<QNetwork> {
        let mut net = QNetwork::zeros(dims)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.activations(x).pop().unwrap())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Input followed by every layer's output (rectified except the last).
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&acts[i]);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared error between the selected outputs and their targets.
    pub fn loss(&self, batch: &[Target<'_>]) -> Result<f64> {
        let mut sum = 0.0;
        for t in batch {
            let q = self.forward(t.input)?;
            let d = q.get(t.output).ok_or(Error::IllegalAction(t.output))? - t.value;
            sum += d * d;
        }
        Ok(sum / batch.len() as f64)
    }

    /// Loss and its gradient with respect to every parameter, laid out like
    /// the network itself.
    pub fn gradients(&self, batch: &[Target<'_>]) -> Result<(f64, QNetwork)> {
        if batch.is_empty() {
            return Err(Error::Config("empty training batch".to_owned()));
        }
        let n = batch.len() as f64;
        let mut grad = QNetwork {
            layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        };
        let mut loss = 0.0;
        for t in batch {
            self.check_input(t.input)?;
            if t.output >= self.output_dim() {
                return Err(Error::IllegalAction(t.output));
            }
            let acts = self.activations(t.input);
            let q = &acts[acts.len() - 1];
            let diff = q[t.output] - t.value;
            loss += diff * diff;

            let mut delta = vec![0.0; self.output_dim()];
            delta[t.output] = 2.0 * diff / n;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grad.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
                // rectifier derivative, taken as 0 at the kink
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss / n, grad))
    }

    /// `self -= rate * grad`.
    pub fn sgd_step(&mut self, grad: &QNetwork, rate: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= rate * d);
            l.biases.iter_mut().zip(&g.biases).for_each(|(b, d)| *b -= rate * d);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&[4, 8, 8, 3]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 4, actual: 1 })
        ));
    }

    #[test]
    fn hand_computed_chain() {
        let mut net = QNetwork::zeros(&[1, 1, 1, 1, 1]).unwrap();
        // x=2: relu(2*1.5-1)=2, relu(2*-1+0.5)=0, relu(0*3+4)=4, 4*0.5+0.25
        net.set_params(&[1.5, -1.0, -1.0, 0.5, 3.0, 4.0, 0.5, 0.25]).unwrap();
        assert_eq!(net.forward(&[2.0]).unwrap(), vec![2.25]);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = QNetwork::random(&[5, 7, 3], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = QNetwork::random(&[5, 7, 3], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
        assert_eq!(a.param_count(), 5 * 7 + 7 + 7 * 3 + 3);
        assert_eq!(a.dims(), vec![5, 7, 3]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = QNetwork::random(&[3, 4, 5, 2], &mut rng).unwrap();
        // random biases as well
        let p: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_params(&p).unwrap();
        let xs = [vec![0.3, -0.2, 0.9], vec![1.0, 0.5, -0.4]];
        let batch = [
            Target { input: &xs[0], output: 1, value: 0.7 },
            Target { input: &xs[1], output: 0, value: -0.2 },
        ];
        let (loss, grad) = net.gradients(&batch).unwrap();
        assert!((loss - net.loss(&batch).unwrap()).abs() < 1e-12);
        let p = net.params();
        let h = 1e-5;
        for (i, g) in grad.params().iter().enumerate() {
            let mut probe = net.clone();
            let mut q = p.clone();
            q[i] += h;
            probe.set_params(&q).unwrap();
            let up = probe.loss(&batch).unwrap();
            q[i] -= 2.0 * h;
            probe.set_params(&q).unwrap();
            let down = probe.loss(&batch).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-4 * g.abs().max(fd.abs()).max(1e-6), "param {i}: {g} vs {fd}");
        }
    }

    #[test]
    fn sgd_reduces_loss() {
        let mut net = QNetwork::random(&[2, 6, 1], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let x = [0.5, -0.5];
        let batch = [Target { input: &x, output: 0, value: 3.0 }];
        let before = net.loss(&batch).unwrap();
        for _ in 0..50 {
            let (_, g) = net.gradients(&batch).unwrap();
            net.sgd_step(&g, 0.05);
        }
        assert!(net.loss(&batch).unwrap() < before * 0.1);
    }
}
