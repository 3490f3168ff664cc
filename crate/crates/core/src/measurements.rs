//! Single-index-model instances `y = f(A x*)` with Gaussian sensing
//! matrices, unit-norm ground truth, and the link statistics
//! `μ = E[f(g) g]`, `M₂ = E[f(g)²]`, `M₄ = E[f(g)⁴]` for `g ~ N(0, 1)`.
//!
//! Randomness: every instance is generated from a `ChaCha8Rng` seeded with
//! the instance seed (a counter-based stream), and normal variates come
//! from `rand_distr::StandardNormal` (ziggurat). Output is deterministic per
//! seed within one build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::AnalyticPrior;
use crate::vecops::{norm, scaled};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Linear,
    Sign,
    Cubic,
}

impl LinkKind {
    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Linear => "linear",
            LinkKind::Sign => "sign",
            LinkKind::Cubic => "cubic",
        }
    }

    /// Noiseless link; `sign(0) = +1`.
    pub fn eval(self, z: f64) -> f64 {
        match self {
            LinkKind::Linear => z,
            LinkKind::Sign => {
                if z >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LinkKind::Cubic => z * z * z,
        }
    }
}

impl std::str::FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(LinkKind::Linear),
            "sign" | "1bit" | "1-bit" => Ok(LinkKind::Sign),
            "cubic" => Ok(LinkKind::Cubic),
            other => Err(Error::Parse(format!("unknown link `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePosition {
    /// `y = f(z + e)`
    PreLink,
    /// `y = f(z) + e`
    PostLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub kind: LinkKind,
    pub noise_sigma: f64,
    pub noise_position: NoisePosition,
}

impl LinkSpec {
    /// Link with its customary noise placement: before the link for `sign`,
    /// after it for `linear` and `cubic`.
    pub fn new(kind: LinkKind, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::arg(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let noise_position = match kind {
            LinkKind::Sign => NoisePosition::PreLink,
            LinkKind::Linear | LinkKind::Cubic => NoisePosition::PostLink,
        };
        Ok(Self {
            kind,
            noise_sigma,
            noise_position,
        })
    }

    pub fn with_position(mut self, position: NoisePosition) -> Self {
        self.noise_position = position;
        self
    }

    /// Applies the link to `z` with an already-scaled noise draw `e`.
    pub fn apply(&self, z: f64, e: f64) -> f64 {
        match self.noise_position {
            NoisePosition::PreLink => self.kind.eval(z + e),
            NoisePosition::PostLink => self.kind.eval(z) + e,
        }
    }

    fn observe<R: Rng + ?Sized>(&self, z: f64, rng: &mut R) -> f64 {
        let e = if self.noise_sigma > 0.0 {
            self.noise_sigma * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        self.apply(z, e)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::arg(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// I.i.d. standard normal entries, drawn row by row.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᵀ y`
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }
}

/// Where the ground-truth direction comes from.
#[derive(Debug, Clone, Copy)]
pub enum XStarSource<'a> {
    /// Explicit vector, normalized to the unit sphere.
    Explicit(&'a [f64]),
    /// A draw from the prior, projected to the unit sphere.
    Prior(&'a AnalyticPrior),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimInstance {
    pub a: Matrix,
    pub x_star: Vec<f64>,
    pub y: Vec<f64>,
    pub link: LinkSpec,
    pub seed: u64,
}

impl SimInstance {
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// `(1/m) Aᵀ y`
    pub fn back_project(&self) -> Vec<f64> {
        back_project(&self.a, &self.y)
    }
}

/// Draws `x*` (if from the prior), then `A`, then the link noise, all from
/// one stream seeded by `seed`.
pub fn make_instance(
    n: usize,
    m: usize,
    link: LinkSpec,
    source: XStarSource<'_>,
    seed: u64,
) -> Result<SimInstance> {
    if n == 0 || m == 0 {
        return Err(Error::arg("instance needs n >= 1 and m >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = match source {
        XStarSource::Explicit(v) => v.to_vec(),
        XStarSource::Prior(p) => p.sample(&mut rng),
    };
    if raw.len() != n {
        return Err(Error::arg(format!(
            "x* has dimension {}, expected {n}",
            raw.len()
        )));
    }
    let len = norm(&raw);
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::arg("x* must be a non-zero finite vector"));
    }
    let x_star = scaled(&raw, 1.0 / len);
    let a = Matrix::gaussian(m, n, &mut rng);
    let z = a.matvec(&x_star);
    let y = z.iter().map(|&zi| link.observe(zi, &mut rng)).collect();
    Ok(SimInstance {
        a,
        x_star,
        y,
        link,
        seed,
    })
}

/// `(1/m) Aᵀ y`.
pub fn back_project(a: &Matrix, y: &[f64]) -> Vec<f64> {
    let m = a.rows() as f64;
    a.matvec_t(y).into_iter().map(|v| v / m).collect()
}

fn link_draws(
    link: &LinkSpec,
    samples: usize,
    seed: u64,
) -> Result<impl Iterator<Item = (f64, f64)> + '_> {
    if samples == 0 {
        return Err(Error::arg("need at least one Monte Carlo sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples).map(move |_| {
        let g: f64 = rng.sample(StandardNormal);
        (g, link.observe(g, &mut rng))
    }))
}

/// Monte Carlo estimate of `μ = E[f(g) g]`.
pub fn estimate_mu(link: &LinkSpec, samples: usize, seed: u64) -> Result<f64> {
    let sum: f64 = link_draws(link, samples, seed)?.map(|(g, f)| f * g).sum();
    Ok(sum / samples as f64)
}

/// Monte Carlo estimates of `(E[f(g)²], E[f(g)⁴])`.
pub fn estimate_m2_m4(link: &LinkSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let (s2, s4) = link_draws(link, samples, seed)?.fold((0.0, 0.0), |(a, b), (_, f)| {
        let f2 = f * f;
        (a + f2, b + f2 * f2)
    });
    Ok((s2 / samples as f64, s4 / samples as f64))
}
