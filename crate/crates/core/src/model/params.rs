use rand::Rng;

use super::{ModelConfig, ModelError};
use crate::tensor::{Tape, Tensor, Var};

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; 7] = [
    "embedding",
    "lstm_wx",
    "lstm_wh",
    "lstm_b",
    "w1",
    "w2",
    "w_out",
];

const EMBED_RANGE: f64 = 0.05;
const FORGET_BIAS: f64 = 1.0;

/// Trainable weights. LSTM gates are packed column-wise in the order
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `V×d`
    pub embedding: Tensor,
    /// `d×4h`
    pub lstm_wx: Tensor,
    /// `h×4h`
    pub lstm_wh: Tensor,
    /// `1×4h`
    pub lstm_b: Tensor,
    /// `h×h`
    pub w1: Tensor,
    /// `h×h`
    pub w2: Tensor,
    /// `h×2`
    pub w_out: Tensor,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, s: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-s..=s)).collect();
    Tensor::new(rows, cols, data).expect("sized")
}

fn glorot<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    uniform(rng, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
}

impl ModelParams {
    pub fn shapes(cfg: &ModelConfig) -> [[usize; 2]; 7] {
        let (v, d, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
        [
            [v, d],
            [d, 4 * h],
            [h, 4 * h],
            [1, 4 * h],
            [h, h],
            [h, h],
            [h, 2],
        ]
    }

    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        cfg.validate()?;
        let (d, h) = (cfg.embed_dim, cfg.hidden_dim);
        let embedding = uniform(rng, cfg.vocab_size, d, EMBED_RANGE);
        let lstm_wx = glorot(rng, d, 4 * h);
        let lstm_wh = glorot(rng, h, 4 * h);
        let mut lstm_b = Tensor::zeros(1, 4 * h);
        lstm_b.data_mut()[h..2 * h].fill(FORGET_BIAS);
        let w1 = glorot(rng, h, h);
        let w2 = glorot(rng, h, h);
        let w_out = glorot(rng, h, 2);
        Ok(Self {
            embedding,
            lstm_wx,
            lstm_wh,
            lstm_b,
            w1,
            w2,
            w_out,
        })
    }

    pub fn tensors(&self) -> [&Tensor; 7] {
        [
            &self.embedding,
            &self.lstm_wx,
            &self.lstm_wh,
            &self.lstm_b,
            &self.w1,
            &self.w2,
            &self.w_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 7] {
        [
            &mut self.embedding,
            &mut self.lstm_wx,
            &mut self.lstm_wh,
            &mut self.lstm_b,
            &mut self.w1,
            &mut self.w2,
            &mut self.w_out,
        ]
    }

    pub fn to_vec(&self) -> Vec<Tensor> {
        self.tensors().into_iter().cloned().collect()
    }

    /// Rebuilds parameters from tensors in [`PARAM_NAMES`] order, checking
    /// each shape against `cfg`.
    pub fn from_vec(cfg: &ModelConfig, tensors: Vec<Tensor>) -> Result<Self, ModelError> {
        let shapes = Self::shapes(cfg);
        if tensors.len() != shapes.len() {
            return Err(ModelError::Config(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for ((t, s), name) in tensors.iter().zip(&shapes).zip(PARAM_NAMES) {
            if t.shape() != *s {
                return Err(ModelError::Config(format!(
                    "{name}: expected shape {s:?}, found {:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        Ok(Self {
            embedding: next(),
            lstm_wx: next(),
            lstm_wh: next(),
            lstm_b: next(),
            w1: next(),
            w2: next(),
            w_out: next(),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    /// Records the parameters on `tape`, as trainable leaves when
    /// `trainable` and as constants otherwise.
    pub fn record<'t>(&self, tape: &'t Tape, trainable: bool) -> ParamVars<'t> {
        let leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        ParamVars {
            embedding: leaf(&self.embedding),
            lstm_wx: leaf(&self.lstm_wx),
            lstm_wh: leaf(&self.lstm_wh),
            lstm_b: leaf(&self.lstm_b),
            w1: leaf(&self.w1),
            w2: leaf(&self.w2),
            w_out: leaf(&self.w_out),
        }
    }
}

/// Parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars<'t> {
    pub embedding: Var<'t>,
    pub lstm_wx: Var<'t>,
    pub lstm_wh: Var<'t>,
    pub lstm_b: Var<'t>,
    pub w1: Var<'t>,
    pub w2: Var<'t>,
    pub w_out: Var<'t>,
}

impl<'t> ParamVars<'t> {
    pub fn all(&self) -> [Var<'t>; 7] {
        [
            self.embedding,
            self.lstm_wx,
            self.lstm_wh,
            self.lstm_b,
            self.w1,
            self.w2,
            self.w_out,
        ]
    }

    pub fn from_slice(vars: &[Var<'t>]) -> Self {
        Self {
            embedding: vars[0],
            lstm_wx: vars[1],
            lstm_wh: vars[2],
            lstm_b: vars[3],
            w1: vars[4],
            w2: vars[5],
            w_out: vars[6],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 30,
            embed_dim: 4,
            hidden_dim: 6,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn init_shapes_and_ranges() {
        let p = ModelParams::init(&cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (t, s) in p.tensors().iter().zip(ModelParams::shapes(&cfg())) {
            assert_eq!(t.shape(), s);
        }
        assert!(p.embedding.data().iter().all(|x| x.abs() <= 0.05));
        let s = (6.0f64 / (6.0 + 24.0)).sqrt();
        assert!(p.lstm_wh.data().iter().all(|x| x.abs() <= s));
        assert!(p.lstm_b.data()[6..12].iter().all(|&x| x == 1.0));
        assert!(p.lstm_b.data()[..6].iter().all(|&x| x == 0.0));
        assert!(p.lstm_b.data()[12..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vec_round_trip_and_shape_guard() {
        let p = ModelParams::init(&cfg(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(ModelParams::from_vec(&cfg(), p.to_vec()).unwrap(), p);
        let bigger = ModelConfig {
            hidden_dim: 7,
            ..cfg()
        };
        assert!(ModelParams::from_vec(&bigger, p.to_vec()).is_err());
    }

    #[test]
    fn zero_dims_rejected() {
        let bad = ModelConfig {
            hidden_dim: 0,
            ..cfg()
        };
        assert!(ModelParams::init(&bad, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
