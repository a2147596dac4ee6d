use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A matrix-valued field `σ: ℝ^e → ℝ^{e×d}` with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VectorField {
    /// `σ(y) = S`.
    Constant { matrix: Matrix },
    /// `σ(y)_{·j} = C_j y`; `columns` holds `C_1, …, C_d`, each `e × e`.
    Linear { columns: Vec<Matrix> },
    /// `σ_ij(y) = base_ij + amplitude_ij · sin(y_{(i+j) mod e})`.
    Trig { base: Matrix, amplitude: Matrix },
}

impl VectorField {
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorField::Constant { matrix } => {
                if matrix.rows() == 0 || matrix.cols() == 0 {
                    return Err(Error::param("sigma", "constant field must be non-empty"));
                }
            }
            VectorField::Linear { columns } => {
                let e = columns
                    .first()
                    .ok_or_else(|| Error::param("sigma", "linear field needs at least one column"))?
                    .rows();
                if e == 0 || columns.iter().any(|c| c.rows() != e || c.cols() != e) {
                    return Err(Error::param("sigma", format!("every column map must be {e}x{e} with e > 0")));
                }
            }
            VectorField::Trig { base, amplitude } => {
                if base.rows() == 0
                    || base.cols() == 0
                    || base.rows() != amplitude.rows()
                    || base.cols() != amplitude.cols()
                {
                    return Err(Error::param("sigma", "base and amplitude must share a non-empty shape"));
                }
            }
        }
        let finite = match self {
            VectorField::Constant { matrix } => matrix.as_slice().iter().all(|x| x.is_finite()),
            VectorField::Linear { columns } => columns.iter().all(|c| c.as_slice().iter().all(|x| x.is_finite())),
            VectorField::Trig { base, amplitude } => {
                base.as_slice().iter().chain(amplitude.as_slice()).all(|x| x.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::param("sigma", "entries must be finite"))
        }
    }

    /// Dimension `e` of the solution.
    pub fn out_dim(&self) -> usize {
        match self {
            VectorField::Constant { matrix } => matrix.rows(),
            VectorField::Linear { columns } => columns[0].rows(),
            VectorField::Trig { base, .. } => base.rows(),
        }
    }

    /// Dimension `d` of the driver.
    pub fn driver_dim(&self) -> usize {
        match self {
            VectorField::Constant { matrix } => matrix.cols(),
            VectorField::Linear { columns } => columns.len(),
            VectorField::Trig { base, .. } => base.cols(),
        }
    }

    pub fn eval(&self, y: &[f64]) -> Matrix {
        match self {
            VectorField::Constant { matrix } => matrix.clone(),
            VectorField::Linear { columns } => {
                let cols: Vec<Vec<f64>> = columns.iter().map(|c| c.mul_vec(y)).collect();
                Matrix::from_fn(y.len(), columns.len(), |i, j| cols[j][i])
            }
            VectorField::Trig { base, amplitude } => {
                let e = base.rows();
                Matrix::from_fn(e, base.cols(), |i, j| base[(i, j)] + amplitude[(i, j)] * y[(i + j) % e].sin())
            }
        }
    }

    /// `∂_k σ(y)`, an `e × d` matrix.
    pub fn derivative(&self, y: &[f64], k: usize) -> Matrix {
        match self {
            VectorField::Constant { matrix } => Matrix::zeros(matrix.rows(), matrix.cols()),
            VectorField::Linear { columns } => Matrix::from_fn(y.len(), columns.len(), |i, j| columns[j][(i, k)]),
            VectorField::Trig { base, amplitude } => {
                let e = base.rows();
                Matrix::from_fn(
                    e,
                    base.cols(),
                    |i, j| {
                        if (i + j) % e == k {
                            amplitude[(i, j)] * y[k].cos()
                        } else {
                            0.0
                        }
                    },
                )
            }
        }
    }

    /// Drift `Σ_{j,k,ℓ} ∂_kσ_{·j}(y) σ_{kℓ}(y) G_{ℓj}`, where `G` is the
    /// area correction indexed like the lift, `G_{ℓj} ~ ∫X^ℓ dX^j`.
    pub fn correction_drift(&self, y: &[f64], g: &Matrix) -> Vec<f64> {
        let e = self.out_dim();
        let d = self.driver_dim();
        let s = self.eval(y);
        let sg = s.matmul(g);
        let mut out = vec![0.0; e];
        if let VectorField::Constant { .. } = self {
            return out;
        }
        for k in 0..e {
            let dk = self.derivative(y, k);
            for (i, o) in out.iter_mut().enumerate() {
                for j in 0..d {
                    *o += dk[(i, j)] * sg[(k, j)];
                }
            }
        }
        out
    }
}
