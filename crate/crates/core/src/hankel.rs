//! d-level Hankel and double-Hankel operators.
//!
//! A d-level Hankel matrix of a d-way array `y` has its rows indexed by the
//! row-major multi-index `(a_1, ..., a_d)` with `a_j < N_{j,1}` and its columns
//! by `(b_1, ..., b_d)` with `b_j < N_{j,2}`; the entry is `y[a + b]`. For
//! `d = 2` this is the block-Hankel matrix whose blocks are Hankel matrices of
//! the rows of `y`.
//!
//! The double-Hankel matrix adjoins the reversed conjugate:
//! `[H y | J₁ conj(H y) J₂]`, where `J₁`, `J₂` reverse the row and column
//! multi-indices. A reversal of every level of a row-major multi-index is a
//! reversal of the linear index, so `J_l` is never materialized by the
//! operators; [`reversal_matrix`] builds it explicitly for checking.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::signal::{strides, Signal};

/// Hankel split of one dimension: `rows + cols = n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Level {
    pub fn new(n: usize, rows: usize) -> Result<Self> {
        if n == 0 || rows == 0 || rows > n {
            return Err(invalid!("level split needs 1 <= rows <= n, got n={n}, rows={rows}"));
        }
        Ok(Self { n, rows, cols: n + 1 - rows })
    }

    /// Number of `(a, b)` pairs with `a + b = index` (0-based).
    pub fn antidiag_count(&self, index: usize) -> usize {
        (index + 1).min(self.n - index).min(self.rows).min(self.cols)
    }
}

/// Per-dimension Hankel geometry of a d-level Hankel matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelShape {
    levels: Vec<Level>,
}

impl LevelShape {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid!("a level shape needs at least one dimension"));
        }
        for l in &levels {
            if l.rows == 0 || l.cols == 0 || l.rows + l.cols != l.n + 1 {
                return Err(invalid!("inconsistent level {:?}", l));
            }
        }
        Ok(Self { levels })
    }

    pub fn one_d(n: usize, rows: usize) -> Result<Self> {
        Self::new(vec![Level::new(n, rows)?])
    }

    /// Uniform splits `rows_j = ⌊fraction · (N_j + 1)⌋`, clamped to `[1, N_j]`.
    pub fn with_fraction(dims: &[usize], fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(invalid!("split fraction must lie in (0, 1), got {fraction}"));
        }
        let levels = dims
            .iter()
            .map(|&n| {
                let rows = crate::math::floor(fraction * (n as f64 + 1.0)) as usize;
                Level::new(n, rows.clamp(1, n.max(1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    /// The recommended default split, `⌊0.6 (N + 1)⌋` per dimension.
    pub fn recommended(dims: &[usize]) -> Result<Self> {
        Self::with_fraction(dims, 0.6)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn ndim(&self) -> usize {
        self.levels.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    /// Total signal length `N = ∏ N_j`.
    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `R = ∏ N_{j,1}`.
    pub fn rows(&self) -> usize {
        self.levels.iter().map(|l| l.rows).product()
    }

    /// `C = ∏ N_{j,2}`.
    pub fn cols(&self) -> usize {
        self.levels.iter().map(|l| l.cols).product()
    }

    fn check_signal(&self, y: &Signal) -> Result<()> {
        if y.dims() != self.dims().as_slice() {
            return Err(invalid!(
                "signal dims {:?} do not match level shape {:?}",
                y.dims(),
                self.dims()
            ));
        }
        Ok(())
    }

    /// Linear signal offsets contributed by each row and each column.
    fn offsets(&self) -> (Vec<usize>, Vec<usize>) {
        let st = strides(&self.dims());
        let expand = |sizes: Vec<usize>| {
            let mut offs = vec![0usize];
            for (j, &m) in sizes.iter().enumerate() {
                let mut next = Vec::with_capacity(offs.len() * m);
                for &o in &offs {
                    for a in 0..m {
                        next.push(o + a * st[j]);
                    }
                }
                offs = next;
            }
            offs
        };
        (
            expand(self.levels.iter().map(|l| l.rows).collect()),
            expand(self.levels.iter().map(|l| l.cols).collect()),
        )
    }

    /// Sums of a `R × C` matrix along its (multi-level) antidiagonals.
    fn antidiag_sums(&self, g: nalgebra::DMatrixView<'_, Complex64>) -> Vec<Complex64> {
        let (row_off, col_off) = self.offsets();
        let mut sums = vec![Complex64::new(0.0, 0.0); self.len()];
        for (c, &oc) in col_off.iter().enumerate() {
            let column = g.column(c);
            for (r, &or) in row_off.iter().enumerate() {
                sums[or + oc] += column[r];
            }
        }
        sums
    }
}

/// `[H y | J₁ conj(H y) J₂]` together with the geometry that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleHankelMatrix {
    pub matrix: DMatrix<Complex64>,
    pub shape: LevelShape,
}

impl DoubleHankelMatrix {
    pub fn forward_block(&self) -> nalgebra::DMatrixView<'_, Complex64> {
        self.matrix.columns(0, self.shape.cols())
    }

    pub fn backward_block(&self) -> nalgebra::DMatrixView<'_, Complex64> {
        self.matrix.columns(self.shape.cols(), self.shape.cols())
    }
}

/// d-level Hankel matrix `H y` of size `R × C`.
pub fn level_hankel(y: &Signal, shape: &LevelShape) -> Result<DMatrix<Complex64>> {
    shape.check_signal(y)?;
    let (row_off, col_off) = shape.offsets();
    let data = y.as_slice();
    Ok(DMatrix::from_fn(row_off.len(), col_off.len(), |r, c| {
        data[row_off[r] + col_off[c]]
    }))
}

/// Conjugated backward signal: every dimension reversed, then conjugated.
pub fn conj_backward(y: &Signal) -> Signal {
    let data = y.as_slice().iter().rev().map(|v| v.conj()).collect();
    Signal::new(y.dims().to_vec(), data).expect("dims unchanged")
}

/// Double-Hankel matrix `[H y | J₁ conj(H y) J₂]` of size `R × 2C`.
pub fn double_hankel(y: &Signal, shape: &LevelShape) -> Result<DoubleHankelMatrix> {
    let h = level_hankel(y, shape)?;
    let (r, c) = h.shape();
    let mut matrix = DMatrix::zeros(r, 2 * c);
    matrix.columns_mut(0, c).copy_from(&h);
    for j in 0..c {
        for i in 0..r {
            matrix[(i, c + j)] = h[(r - 1 - i, c - 1 - j)].conj();
        }
    }
    Ok(DoubleHankelMatrix { matrix, shape: shape.clone() })
}

/// Antidiagonal multiplicities `ω` over the signal's multi-indices, flattened
/// row-major. Each is the product of the per-dimension counts.
pub fn antidiag_weights(shape: &LevelShape) -> Vec<usize> {
    let dims = shape.dims();
    let st = strides(&dims);
    (0..shape.len())
        .map(|lin| {
            shape
                .levels()
                .iter()
                .enumerate()
                .map(|(j, l)| l.antidiag_count((lin / st[j]) % dims[j]))
                .product()
        })
        .collect()
}

/// Least-squares inverse of [`level_hankel`]: antidiagonal averages.
pub fn level_hankel_pinv(g: &DMatrix<Complex64>, shape: &LevelShape) -> Result<Signal> {
    if g.shape() != (shape.rows(), shape.cols()) {
        return Err(invalid!(
            "matrix is {:?}, level shape expects {}x{}",
            g.shape(),
            shape.rows(),
            shape.cols()
        ));
    }
    let sums = shape.antidiag_sums(g.as_view());
    let w = antidiag_weights(shape);
    let data = sums.iter().zip(&w).map(|(s, &w)| s / w as f64).collect();
    Signal::new(shape.dims(), data)
}

/// Exact least-squares inverse of [`double_hankel`].
///
/// The backward block depends conjugate-linearly on `y`, so the normal
/// equations are solved over the reals; with antidiagonal sums `S₁`, `S₂` of
/// the two blocks the minimizer is
/// `y_n = (S₁[n] + conj(S₂[N−1−n])) / (ω_n + ω_{N−1−n})`.
pub fn double_hankel_pinv(g: &DMatrix<Complex64>, shape: &LevelShape) -> Result<Signal> {
    let (r, c) = (shape.rows(), shape.cols());
    if g.shape() != (r, 2 * c) {
        return Err(invalid!(
            "matrix is {:?}, double-Hankel shape expects {}x{}",
            g.shape(),
            r,
            2 * c
        ));
    }
    let s1 = shape.antidiag_sums(g.columns(0, c));
    let s2 = shape.antidiag_sums(g.columns(c, c));
    let w = antidiag_weights(shape);
    let n = shape.len();
    let data = (0..n)
        .map(|i| (s1[i] + s2[n - 1 - i].conj()) / (w[i] + w[n - 1 - i]) as f64)
        .collect();
    Signal::new(shape.dims(), data)
}

/// Which side of the double-Hankel matrix a reversal matrix acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Rows,
    Cols,
}

/// Explicit reversal `J_l = J_{1l} ⊗ J_{2l} ⊗ ...` built by Kronecker products
/// of the per-dimension reversal matrices.
pub fn reversal_matrix(shape: &LevelShape, side: Side) -> DMatrix<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    shape.levels().iter().fold(DMatrix::from_element(1, 1, one), |acc, l| {
        let m = match side {
            Side::Rows => l.rows,
            Side::Cols => l.cols,
        };
        let j = DMatrix::from_fn(m, m, |a, b| {
            if a + b == m - 1 {
                one
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        acc.kronecker(&j)
    })
}

/// Structured model used by the solvers and the retrieval step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Model {
    /// `H y` alone (EMaC-style).
    Single,
    /// `[H y | J₁ conj(H y) J₂]`.
    #[default]
    Double,
}

impl Model {
    pub fn forward(self, y: &Signal, shape: &LevelShape) -> Result<DMatrix<Complex64>> {
        match self {
            Model::Single => level_hankel(y, shape),
            Model::Double => double_hankel(y, shape).map(|d| d.matrix),
        }
    }

    pub fn pinv(self, g: &DMatrix<Complex64>, shape: &LevelShape) -> Result<Signal> {
        match self {
            Model::Single => level_hankel_pinv(g, shape),
            Model::Double => double_hankel_pinv(g, shape),
        }
    }

    /// Diagonal of `𝓗*𝓗`: how many matrix entries each signal sample fills.
    pub fn gram_weights(self, shape: &LevelShape) -> Vec<f64> {
        let w = antidiag_weights(shape);
        let n = w.len();
        match self {
            Model::Single => w.iter().map(|&v| v as f64).collect(),
            Model::Double => (0..n).map(|i| (w[i] + w[n - 1 - i]) as f64).collect(),
        }
    }

    /// Number of Hankel blocks in the operator matrix.
    pub fn blocks(self) -> usize {
        match self {
            Model::Single => 1,
            Model::Double => 2,
        }
    }

    pub fn matrix_shape(self, shape: &LevelShape) -> (usize, usize) {
        (shape.rows(), self.blocks() * shape.cols())
    }
}
