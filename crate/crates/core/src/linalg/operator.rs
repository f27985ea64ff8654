use nalgebra::DMatrix;

use super::vector::dot;

/// A rectangular linear operator `ℝ^cols → ℝ^rows` known only through its
/// action and the action of its transpose.
///
/// Implementations must be safe to call concurrently: both methods take
/// `&self` and must not mutate shared state.
pub trait LinearMap {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, u: &[f64]) -> Vec<f64>;
}

impl<M: LinearMap + ?Sized> LinearMap for &M {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (**self).apply(v)
    }
    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        (**self).apply_transpose(u)
    }
}

/// Row-major dense matrix, used for materialized per-datum Jacobian blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRows {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseRows {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows × cols");
        Self { rows, cols, data }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out.data[r * m.ncols() + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Stacks blocks with equal column counts on top of each other.
    pub fn vstack(blocks: &[DenseRows]) -> Self {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "column counts differ");
            data.extend_from_slice(&b.data);
            rows += b.rows;
        }
        Self { rows, cols, data }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

impl LinearMap for DenseRows {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        self.iter_rows().map(|row| dot(row, v)).collect()
    }

    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &ui) in self.iter_rows().zip(u) {
            if ui != 0.0 {
                for (o, r) in out.iter_mut().zip(row) {
                    *o += ui * r;
                }
            }
        }
        out
    }
}

/// `A Aᵀ` as a square operator on `ℝ^rows`.
#[derive(Debug, Clone, Copy)]
pub struct Gram<M>(pub M);

impl<M: LinearMap> LinearMap for Gram<M> {
    fn rows(&self) -> usize {
        self.0.rows()
    }
    fn cols(&self) -> usize {
        self.0.rows()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.0.apply(&self.0.apply_transpose(v))
    }
    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u)
    }
}

/// Largest relative adjointness defect `|⟨u, Av⟩ − ⟨Aᵀu, v⟩| / (‖u‖‖A‖‖v‖)`
/// over the given probe pairs, with `‖A‖` crudely bounded by the probe norms.
pub fn adjoint_defect<M: LinearMap>(map: &M, probes: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    probes
        .iter()
        .map(|(u, v)| {
            let av = map.apply(v);
            let atu = map.apply_transpose(u);
            let lhs = dot(u, &av);
            let rhs = dot(&atu, v);
            let scale = super::vector::norm(u) * super::vector::norm(&av)
                + super::vector::norm(&atu) * super::vector::norm(v);
            if scale == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
