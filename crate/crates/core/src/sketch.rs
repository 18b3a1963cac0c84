//! Random `d × ℓ` projection matrices with `E[PPᵀ] = I`.
//!
//! Haar and coordinate sketches also satisfy `PᵀP = (d/ℓ)·I` on every draw.
//! Gaussian sketches satisfy it only in expectation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Each `inner` counter owns a block of 2⁴⁰ keystream words.
const INNER_BLOCK_SHIFT: u32 = 40;

/// Counter-addressed random stream: `(seed, outer, inner)` names a unique,
/// reproducible ChaCha keystream position.
///
/// Solvers key sketch draws by iteration so that results do not depend on
/// evaluation order or thread count. Each `inner` slot spans 2⁴⁰ keystream
/// words, so `inner` must stay below 2²⁸.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub outer: u64,
    pub inner: u64,
}

impl RngStream {
    pub fn new(seed: u64, outer: u64, inner: u64) -> Self {
        Self { seed, outer, inner }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        debug_assert!(self.inner < 1 << 28, "inner counter exceeds addressable range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.outer);
        rng.set_word_pos(u128::from(self.inner) << INNER_BLOCK_SHIFT);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    Haar,
    Coordinate,
    Gaussian,
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Self::Haar),
            "coordinate" => Ok(Self::Coordinate),
            "gaussian" => Ok(Self::Gaussian),
            other => config(format!(
                "unknown sketch '{other}' (expected haar | coordinate | gaussian)"
            )),
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Haar => "haar",
            Self::Coordinate => "coordinate",
            Self::Gaussian => "gaussian",
        })
    }
}

/// An immutable `d × ℓ` sketch matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Sketch {
    matrix: DMatrix<f64>,
    kind: SketchKind,
}

impl Sketch {
    pub fn draw(kind: SketchKind, d: usize, ell: usize, stream: RngStream) -> Result<Self> {
        match kind {
            SketchKind::Haar => draw_haar(d, ell, stream),
            SketchKind::Coordinate => draw_coordinate_block(d, ell, stream),
            SketchKind::Gaussian => draw_gaussian(d, ell, stream),
        }
    }

    /// Wraps an explicit matrix; used by tests that need a fixed `P`.
    pub fn from_matrix(matrix: DMatrix<f64>, kind: SketchKind) -> Result<Self> {
        check_shape(matrix.nrows(), matrix.ncols())?;
        Ok(Self { matrix, kind })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    /// `P w`.
    pub fn apply(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        if w.len() != self.rank() {
            return config(format!(
                "sketch apply: expected length {}, got {}",
                self.rank(),
                w.len()
            ));
        }
        Ok(&self.matrix * w)
    }

    /// `Pᵀ v`.
    pub fn apply_transpose(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return config(format!(
                "sketch apply_transpose: expected length {}, got {}",
                self.dim(),
                v.len()
            ));
        }
        Ok(self.matrix.tr_mul(v))
    }
}

fn check_shape(d: usize, ell: usize) -> Result<()> {
    if ell == 0 || ell > d {
        return config(format!("sketch rank must satisfy 1 <= ell <= d, got ell={ell}, d={d}"));
    }
    Ok(())
}

fn scale(d: usize, ell: usize) -> f64 {
    (d as f64 / ell as f64).sqrt()
}

/// Scaled Haar sketch: Gaussian fill, thin QR, column signs fixed by
/// `sign(R_jj)`, then scaled by `√(d/ℓ)`.
///
/// Tall blocks (`2ℓ ≤ d`) are well conditioned, so their QR factor comes from
/// the Cholesky factor of the Gram matrix; its `R` already has a positive
/// diagonal. Other shapes use Householder QR.
pub fn draw_haar(d: usize, ell: usize, stream: RngStream) -> Result<Sketch> {
    check_shape(d, ell)?;
    let mut rng = stream.rng();
    let c = scale(d, ell);
    loop {
        let x = DMatrix::<f64>::from_fn(d, ell, |_, _| rng.sample(StandardNormal));
        let frame = if 2 * ell <= d { cholesky_frame(&x) } else { householder_frame(x) };
        if let Some(mut q) = frame {
            q.scale_mut(c);
            return Ok(Sketch { matrix: q, kind: SketchKind::Haar });
        }
    }
}

fn cholesky_frame(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let ell = x.ncols();
    let gram = x.transpose() * x;
    let r = gram.cholesky()?.l().transpose();
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(ell, ell))?;
    let q = x * r_inv;
    q.iter().all(|v| v.is_finite()).then_some(q)
}

fn householder_frame(x: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let ell = x.ncols();
    let qr = x.qr();
    let r = qr.r();
    if (0..ell).any(|j| r[(j, j)] == 0.0) {
        return None;
    }
    let mut q = qr.q();
    for j in 0..ell {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Some(q)
}

/// `ℓ` distinct scaled basis vectors `√(d/ℓ)·e_i`, chosen without replacement.
pub fn draw_coordinate_block(d: usize, ell: usize, stream: RngStream) -> Result<Sketch> {
    check_shape(d, ell)?;
    let mut rng = stream.rng();
    let picks = index::sample(&mut rng, d, ell);
    let c = scale(d, ell);
    let mut matrix = DMatrix::zeros(d, ell);
    for (j, i) in picks.iter().enumerate() {
        matrix[(i, j)] = c;
    }
    Ok(Sketch { matrix, kind: SketchKind::Coordinate })
}

/// I.i.d. `N(0, 1/ℓ)` entries.
pub fn draw_gaussian(d: usize, ell: usize, stream: RngStream) -> Result<Sketch> {
    check_shape(d, ell)?;
    let mut rng = stream.rng();
    let sd = (1.0 / ell as f64).sqrt();
    let matrix = DMatrix::from_fn(d, ell, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    Ok(Sketch { matrix, kind: SketchKind::Gaussian })
}
