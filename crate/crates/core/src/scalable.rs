//! Seeded scalable test problem with affine, linearly coupled disciplines.
//!
//! Discipline `i` computes `y_i = -(C_z z + C_x,i x_i - sum_{j != i} C_ij y_j)`
//! with identity `C_i`; its local constraint is `y_i - 1 >= 0` and the
//! objective is `z'z + sum_i y_i'y_i`. Coefficients are drawn once,
//! uniformly on the open coefficient range, from a ChaCha8 stream seeded with
//! `coeff_seed`, in the order: per discipline `i` ascending, `C_z`, then
//! `C_x,i`, then `C_ij` for `j` ascending; each matrix row-major.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::local_opt::{minimize, Evaluation, LocalProblem};
use crate::mdo::{DesignPoint, Dims, MdoProblem, ProblemBounds, Vov};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::lhs_sample_with;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalableSpec {
    pub n_disciplines: usize,
    pub dim_z: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    pub coeff_seed: u64,
    pub coeff_range: (f64, f64),
    pub z_bounds: (f64, f64),
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
}

impl Default for ScalableSpec {
    fn default() -> Self {
        ScalableSpec {
            n_disciplines: 2,
            dim_z: 1,
            dim_x: 1,
            dim_y: 1,
            coeff_seed: 42,
            coeff_range: (0.0, 10.0),
            z_bounds: (-10.0, 10.0),
            x_bounds: (-10.0, 10.0),
            y_bounds: (-100.0, 100.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalableProblem {
    spec: ScalableSpec,
    dims: Dims,
    bounds: ProblemBounds,
    /// Per discipline: `C_z` (`dim_y x dim_z`).
    pub c_z: Vec<DMatrix<f64>>,
    /// Per discipline: `C_x,i` (`dim_y x dim_x`).
    pub c_x: Vec<DMatrix<f64>>,
    /// Per discipline: `C_ij` for every `j != i`, ascending `j`.
    pub c_y: Vec<Vec<DMatrix<f64>>>,
}

/// Builds the problem for `spec`.
pub fn make_problem(spec: &ScalableSpec) -> Result<ScalableProblem> {
    let ScalableSpec {
        n_disciplines: n,
        dim_z,
        dim_x,
        dim_y,
        ..
    } = *spec;
    if n == 0 || dim_z == 0 || dim_x == 0 || dim_y == 0 {
        return Err(Error::InvalidConfig(
            "scalable dimensions must be positive".into(),
        ));
    }
    let (lo, hi) = spec.coeff_range;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(Error::InvalidConfig(
            "coefficient range must be non-negative and increasing".into(),
        ));
    }
    let mut rng = rng_from_seed(spec.coeff_seed);
    let mut draw = |rows: usize, cols: usize| {
        let v: Vec<f64> = (0..rows * cols)
            .map(|_| lo + (hi - lo) * rng.sample::<f64, _>(Open01))
            .collect();
        DMatrix::from_row_slice(rows, cols, &v)
    };
    let mut c_z = Vec::with_capacity(n);
    let mut c_x = Vec::with_capacity(n);
    let mut c_y = Vec::with_capacity(n);
    for i in 0..n {
        c_z.push(draw(dim_y, dim_z));
        c_x.push(draw(dim_y, dim_x));
        c_y.push(
            (0..n)
                .filter(|&j| j != i)
                .map(|_| draw(dim_y, dim_y))
                .collect(),
        );
    }
    let dims = Dims {
        z: dim_z,
        x: vec![dim_x; n],
        y: vec![dim_y; n],
    };
    let bounds = ProblemBounds::uniform(&dims, spec.z_bounds, spec.x_bounds, spec.y_bounds);
    Ok(ScalableProblem {
        spec: spec.clone(),
        dims,
        bounds,
        c_z,
        c_x,
        c_y,
    })
}

impl ScalableProblem {
    pub fn spec(&self) -> &ScalableSpec {
        &self.spec
    }

    /// Solves all governing equations simultaneously for `y`.
    pub fn coupled_solve(&self, z: &[f64], x: &Vov) -> Result<Vov> {
        let n = self.spec.n_disciplines;
        let dy = self.spec.dim_y;
        if z.len() != self.dims.z || x.block_lengths() != self.dims.x {
            return Err(Error::DimensionMismatch {
                context: "coupled_solve",
                expected: self.dims.z + self.dims.x.iter().sum::<usize>(),
                got: z.len() + x.len(),
            });
        }
        // (I - C_couple) y = -(C_z z + C_x x)
        let size = n * dy;
        let mut a = DMatrix::<f64>::identity(size, size);
        let mut b = DVector::<f64>::zeros(size);
        let zv = DVector::from_column_slice(z);
        for i in 0..n {
            let rhs = -(&self.c_z[i] * &zv + &self.c_x[i] * DVector::from_column_slice(x.block(i)));
            b.rows_mut(i * dy, dy).copy_from(&rhs);
            for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
                let mut blk = a.view_mut((i * dy, j * dy), (dy, dy));
                blk -= &self.c_y[i][k];
            }
        }
        let y = a.lu().solve(&b).ok_or(Error::Singular("coupled system"))?;
        Vov::from_flat(y.as_slice(), &self.dims.y)
    }
}

impl MdoProblem for ScalableProblem {
    fn dims(&self) -> &Dims {
        &self.dims
    }

    fn bounds(&self) -> &ProblemBounds {
        &self.bounds
    }

    fn objective(&self, z: &[f64], _x: &Vov, y: &Vov) -> f64 {
        z.iter().chain(y.as_slice()).map(|v| v * v).sum()
    }

    fn analysis(&self, i: usize, y_others: &[f64], z_i: &[f64], x_i: &[f64]) -> Vec<f64> {
        let dy = self.spec.dim_y;
        let mut y = &self.c_z[i] * DVector::from_column_slice(z_i)
            + &self.c_x[i] * DVector::from_column_slice(x_i);
        for (k, c) in self.c_y[i].iter().enumerate() {
            y -= c * DVector::from_column_slice(&y_others[k * dy..(k + 1) * dy]);
        }
        y.iter().map(|v| -v).collect()
    }

    fn local_constraints(
        &self,
        _i: usize,
        _y_others: &[f64],
        _z_i: &[f64],
        _x_i: &[f64],
        y_i: &[f64],
    ) -> Vec<f64> {
        y_i.iter().map(|v| v - 1.0).collect()
    }

    fn n_local_constraints(&self, _i: usize) -> usize {
        self.spec.dim_y
    }
}

/// Constrained optimum of the fully coupled problem, by multi-start local
/// search over `(z, x)` with `y` from [`ScalableProblem::coupled_solve`].
/// Returns `f*` and the optimal point (copies equal to targets).
pub fn reference_optimum(spec: &ScalableSpec) -> Result<(f64, DesignPoint)> {
    let problem = make_problem(spec)?;
    let dims = problem.dims().clone();
    let nz = dims.z;
    let nx: usize = dims.x.iter().sum();
    let mut bounds = vec![spec.z_bounds; nz];
    bounds.extend(vec![spec.x_bounds; nx]);
    let (ylo, yhi) = spec.y_bounds;

    let split = |v: &[f64]| -> Result<(Vec<f64>, Vov)> {
        Ok((v[..nz].to_vec(), Vov::from_flat(&v[nz..], &dims.x)?))
    };
    let evaluate = |v: &[f64]| -> Result<Evaluation> {
        let (z, x) = split(v)?;
        let y = problem.coupled_solve(&z, &x)?;
        let mut ineq: Vec<f64> = y.as_slice().iter().map(|v| v - 1.0).collect();
        ineq.extend(y.as_slice().iter().map(|v| yhi - v));
        ineq.extend(y.as_slice().iter().map(|v| v - ylo));
        Ok(Evaluation {
            objective: problem.objective(&z, &x, &y),
            inequalities: ineq,
            equalities: Vec::new(),
        })
    };

    let mut rng = rng_from_seed(derive_seed(spec.coeff_seed, &[0x5ca1ab1e]));
    let starts = lhs_sample_with(40, &bounds, &mut rng)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (k, s) in starts.into_iter().enumerate() {
        let mut lp = LocalProblem::new(evaluate, bounds.clone(), s, 4000);
        lp.seed = k as u64;
        lp.options.penalty_passes = 6;
        lp.options.feasibility_tol = 1e-16;
        let r = minimize(lp)?;
        if r.violation <= 1e-16 && best.as_ref().is_none_or(|(f, _)| r.f_star < *f) {
            best = Some((r.f_star, r.x_star));
        }
    }
    let (f, v) = best.ok_or(Error::InvalidConfig(
        "no feasible reference point found".into(),
    ))?;
    let (z, x) = split(&v)?;
    let y = problem.coupled_solve(&z, &x)?;
    Ok((f, DesignPoint::from_system(z, x, y)))
}
