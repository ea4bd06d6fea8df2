//! Small dense tanh networks with exact backpropagation.

use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| limit * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        Dense {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weight
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
        );
    }
}

/// Multi-layer perceptron: tanh after every layer except the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Glorot-uniform hidden layers; the output layer starts at zero so a
    /// fresh actor is uniform and a fresh critic predicts 0.
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                if l == last {
                    Dense::zeros(w[0], w[1])
                } else {
                    Dense::glorot(w[0], w[1], rng)
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Mlp {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp::zeros(&self.dims())
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).pop().unwrap_or_default()
    }

    /// Activations of every layer, input first, raw output last.
    pub fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&acts[l], &mut out);
            if l != last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    /// Adds d(loss)/d(params) into `grad`, given d(loss)/d(output) and the
    /// trace of the forward pass that produced it.
    pub fn backward(&self, trace: &[Vec<f64>], d_out: &[f64], grad: &mut Mlp) {
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            let input = &trace[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weight[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
            }
            if l == 0 {
                break;
            }
            let mut d_in = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weight[o * layer.inputs..(o + 1) * layer.inputs];
                d_in.iter_mut().zip(row).for_each(|(acc, w)| *acc += w * d);
            }
            // input of layer l is tanh output of layer l−1
            delta = d_in.iter().zip(input).map(|(d, a)| d * (1.0 - a * a)).collect();
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Mlp) {
        self.params_mut().zip(other.params()).for_each(|(p, g)| *p += alpha * g);
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn two_unit_network_by_hand() {
        // 2 → 2 (tanh) → 1
        let net = Mlp {
            layers: vec![
                Dense {
                    inputs: 2,
                    outputs: 2,
                    weight: vec![0.5, -1.0, 0.25, 2.0],
                    bias: vec![0.1, -0.2],
                },
                Dense {
                    inputs: 2,
                    outputs: 1,
                    weight: vec![1.5, -0.5],
                    bias: vec![0.3],
                },
            ],
        };
        let x = [1.0, 0.5];
        let h0 = (0.5 * 1.0 - 1.0 * 0.5 + 0.1f64).tanh();
        let h1 = (0.25 * 1.0 + 2.0 * 0.5 - 0.2f64).tanh();
        let y = 1.5 * h0 - 0.5 * h1 + 0.3;
        assert_eq!(net.forward(&x), vec![y]);
        assert!((y - 0.05859881313304666).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = stream(1, 99, 0);
        let mut net = Mlp::new(&[3, 5, 4, 2], &mut rng);
        // give the output layer non-zero weights so every path carries gradient
        net.layers[2]
            .weight
            .iter_mut()
            .for_each(|w| *w = 2.0 * rng.random::<f64>() - 1.0);
        let x = [0.3, -0.7, 1.1];
        let upstream = [0.6, -1.3];
        let loss = |n: &Mlp| n.forward(&x).iter().zip(&upstream).map(|(y, u)| y * u).sum::<f64>();
        let mut grad = net.zeros_like();
        net.backward(&net.forward_trace(&x), &upstream, &mut grad);
        let analytic: Vec<f64> = grad.params().copied().collect();
        let h = 1e-6;
        for (k, a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(k).unwrap() -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((a - numeric).abs() < 1e-8, "param {k}: {a} vs {numeric}");
        }
    }

    #[test]
    fn fresh_output_layer_is_zero() {
        let net = Mlp::new(&[4, 8, 3], &mut stream(0, 0, 0));
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]), vec![0.0; 3]);
        assert_eq!(net.dims(), vec![4, 8, 3]);
        assert_eq!(net.num_params(), 4 * 8 + 8 + 8 * 3 + 3);
    }
}
