use super::vov::Vov;
use crate::error::{Error, Result};

/// Variable counts of a decomposed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dims {
    /// Shared (global) design variables.
    pub z: usize,
    /// Local design variables, one entry per discipline.
    pub x: Vec<usize>,
    /// Coupling variables, one entry per discipline.
    pub y: Vec<usize>,
}

impl Dims {
    pub fn n_disciplines(&self) -> usize {
        self.x.len()
    }

    /// Length of the flattened system vector `(z, x_1..x_N, y_1..y_N)`.
    pub fn system_len(&self) -> usize {
        self.z + self.x.iter().sum::<usize>() + self.y.iter().sum::<usize>()
    }

    /// Length of a subsystem's free vector `(z_i, x_i)`.
    pub fn subsystem_len(&self, i: usize) -> usize {
        self.z + self.x[i]
    }

    /// Length of `y_{j != i}`.
    pub fn y_others_len(&self, i: usize) -> usize {
        self.y.iter().sum::<usize>() - self.y[i]
    }
}

/// Per-coordinate `(lower, upper)` bounds, grouped like the variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemBounds {
    pub z: Vec<(f64, f64)>,
    pub x: Vec<Vec<(f64, f64)>>,
    pub y: Vec<Vec<(f64, f64)>>,
}

impl ProblemBounds {
    /// The same interval for every coordinate of each variable group.
    pub fn uniform(dims: &Dims, z: (f64, f64), x: (f64, f64), y: (f64, f64)) -> Self {
        ProblemBounds {
            z: vec![z; dims.z],
            x: dims.x.iter().map(|&n| vec![x; n]).collect(),
            y: dims.y.iter().map(|&n| vec![y; n]).collect(),
        }
    }

    /// Bounds of the flattened system vector `(z, x, y)`.
    pub fn system(&self) -> Vec<(f64, f64)> {
        let mut b = self.z.clone();
        self.x.iter().for_each(|xi| b.extend_from_slice(xi));
        self.y.iter().for_each(|yi| b.extend_from_slice(yi));
        b
    }

    /// Bounds of `(z_i, x_i)`.
    pub fn subsystem(&self, i: usize) -> Vec<(f64, f64)> {
        let mut b = self.z.clone();
        b.extend_from_slice(&self.x[i]);
        b
    }

    pub fn check(&self) -> Result<()> {
        for (dim, &(lower, upper)) in self.system().iter().enumerate() {
            if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                return Err(Error::InvalidBounds { dim, lower, upper });
            }
        }
        Ok(())
    }
}

/// A decomposed multidisciplinary problem.
///
/// `analysis` is the expensive black box and must only be reached through
/// [`super::eval_discipline`], which charges the budget ledger. Everything
/// else is cheap. Constraints are feasible when `>= 0`.
pub trait MdoProblem: Send + Sync {
    fn dims(&self) -> &Dims;

    fn bounds(&self) -> &ProblemBounds;

    /// System objective `f(z, x, y)`.
    fn objective(&self, z: &[f64], x: &Vov, y: &Vov) -> f64;

    /// System constraints `c(z, x, y)`.
    fn system_constraints(&self, _z: &[f64], _x: &Vov, _y: &Vov) -> Vec<f64> {
        Vec::new()
    }

    fn n_system_constraints(&self) -> usize {
        0
    }

    /// Disciplinary analysis `y_i(y_{j != i}, z_i, x_i)`.
    fn analysis(&self, i: usize, y_others: &[f64], z_i: &[f64], x_i: &[f64]) -> Vec<f64>;

    /// Local constraints `g_i(y_{j != i}, z_i, x_i)`, given the analysis output
    /// `y_i` already computed at the same inputs.
    fn local_constraints(
        &self,
        i: usize,
        y_others: &[f64],
        z_i: &[f64],
        x_i: &[f64],
        y_i: &[f64],
    ) -> Vec<f64>;

    fn n_local_constraints(&self, i: usize) -> usize;
}

type AnalysisFn = dyn Fn(usize, &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync;
type LocalConstraintFn = dyn Fn(usize, &[f64], &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync;
type SystemFn<T> = dyn Fn(&[f64], &Vov, &Vov) -> T + Send + Sync;

/// An [`MdoProblem`] assembled from closures.
pub struct FnProblem {
    pub dims: Dims,
    pub bounds: ProblemBounds,
    pub objective: Box<SystemFn<f64>>,
    pub system_constraints: Option<(usize, Box<SystemFn<Vec<f64>>>)>,
    pub analysis: Box<AnalysisFn>,
    pub local_constraints: Box<LocalConstraintFn>,
    pub n_local: Vec<usize>,
}

impl MdoProblem for FnProblem {
    fn dims(&self) -> &Dims {
        &self.dims
    }

    fn bounds(&self) -> &ProblemBounds {
        &self.bounds
    }

    fn objective(&self, z: &[f64], x: &Vov, y: &Vov) -> f64 {
        (self.objective)(z, x, y)
    }

    fn system_constraints(&self, z: &[f64], x: &Vov, y: &Vov) -> Vec<f64> {
        match &self.system_constraints {
            Some((_, c)) => c(z, x, y),
            None => Vec::new(),
        }
    }

    fn n_system_constraints(&self) -> usize {
        self.system_constraints.as_ref().map_or(0, |(n, _)| *n)
    }

    fn analysis(&self, i: usize, y_others: &[f64], z_i: &[f64], x_i: &[f64]) -> Vec<f64> {
        (self.analysis)(i, y_others, z_i, x_i)
    }

    fn local_constraints(
        &self,
        i: usize,
        y_others: &[f64],
        z_i: &[f64],
        x_i: &[f64],
        y_i: &[f64],
    ) -> Vec<f64> {
        (self.local_constraints)(i, y_others, z_i, x_i, y_i)
    }

    fn n_local_constraints(&self, i: usize) -> usize {
        self.n_local[i]
    }
}

/// A system-level iterate together with every subsystem's copies.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub z_sys: Vec<f64>,
    pub x_sys: Vov,
    pub y_sys: Vov,
    pub z_sub: Vec<Vec<f64>>,
    pub x_sub: Vec<Vec<f64>>,
}

impl DesignPoint {
    /// A point whose subsystem copies equal the system targets.
    pub fn from_system(z: Vec<f64>, x: Vov, y: Vov) -> Self {
        let n = x.n_blocks();
        DesignPoint {
            z_sub: vec![z.clone(); n],
            x_sub: x.blocks().map(<[f64]>::to_vec).collect(),
            z_sys: z,
            x_sys: x,
            y_sys: y,
        }
    }

    /// Rebuilds the system part from a flat `(z, x, y)` vector, copies equal targets.
    pub fn from_system_vector(dims: &Dims, v: &[f64]) -> Result<Self> {
        let (z, x, y) = split_system_vector(dims, v)?;
        Ok(Self::from_system(z, x, y))
    }

    pub fn n_disciplines(&self) -> usize {
        self.z_sub.len()
    }

    pub fn system_vector(&self) -> Vec<f64> {
        let mut v = self.z_sys.clone();
        v.extend_from_slice(self.x_sys.as_slice());
        v.extend_from_slice(self.y_sys.as_slice());
        v
    }

    /// Replaces the system targets, leaving the subsystem copies untouched.
    pub fn set_system_vector(&mut self, dims: &Dims, v: &[f64]) -> Result<()> {
        let (z, x, y) = split_system_vector(dims, v)?;
        self.z_sys = z;
        self.x_sys = x;
        self.y_sys = y;
        Ok(())
    }

    /// Subsystem `i`'s free vector `(z_i, x_i)`.
    pub fn subsystem_vector(&self, i: usize) -> Vec<f64> {
        let mut v = self.z_sub[i].clone();
        v.extend_from_slice(&self.x_sub[i]);
        v
    }

    pub fn set_subsystem_vector(&mut self, i: usize, v: &[f64]) -> Result<()> {
        let nz = self.z_sys.len();
        let nx = self.x_sub[i].len();
        if v.len() != nz + nx {
            return Err(Error::DimensionMismatch {
                context: "DesignPoint::set_subsystem_vector",
                expected: nz + nx,
                got: v.len(),
            });
        }
        self.z_sub[i] = v[..nz].to_vec();
        self.x_sub[i] = v[nz..].to_vec();
        Ok(())
    }

    /// Checks the structural invariants against `dims` and `bounds`.
    pub fn validate(&self, dims: &Dims, bounds: &ProblemBounds) -> Result<()> {
        let n = dims.n_disciplines();
        let mismatch = |context, expected, got| Error::DimensionMismatch {
            context,
            expected,
            got,
        };
        if self.z_sub.len() != n || self.x_sub.len() != n {
            return Err(mismatch("DesignPoint copies", n, self.z_sub.len()));
        }
        if self.x_sys.block_lengths() != dims.x {
            return Err(mismatch(
                "DesignPoint x_sys",
                dims.x.len(),
                self.x_sys.n_blocks(),
            ));
        }
        if self.y_sys.block_lengths() != dims.y {
            return Err(mismatch(
                "DesignPoint y_sys",
                dims.y.len(),
                self.y_sys.n_blocks(),
            ));
        }
        for i in 0..n {
            if self.z_sub[i].len() != self.z_sys.len() {
                return Err(mismatch(
                    "DesignPoint z_sub",
                    self.z_sys.len(),
                    self.z_sub[i].len(),
                ));
            }
            if self.x_sub[i].len() != dims.x[i] {
                return Err(mismatch(
                    "DesignPoint x_sub",
                    dims.x[i],
                    self.x_sub[i].len(),
                ));
            }
            let inside = self
                .subsystem_vector(i)
                .iter()
                .zip(bounds.subsystem(i))
                .all(|(v, (lo, hi))| *v >= lo && *v <= hi);
            if !inside {
                return Err(Error::InvalidConfig(format!(
                    "subsystem {i} copy outside bounds"
                )));
            }
        }
        let inside = self
            .system_vector()
            .iter()
            .zip(bounds.system())
            .all(|(v, (lo, hi))| *v >= lo && *v <= hi);
        if !inside {
            return Err(Error::InvalidConfig("system targets outside bounds".into()));
        }
        Ok(())
    }
}

pub(crate) fn split_system_vector(dims: &Dims, v: &[f64]) -> Result<(Vec<f64>, Vov, Vov)> {
    if v.len() != dims.system_len() {
        return Err(Error::DimensionMismatch {
            context: "system vector",
            expected: dims.system_len(),
            got: v.len(),
        });
    }
    let nx: usize = dims.x.iter().sum();
    let z = v[..dims.z].to_vec();
    let x = Vov::from_flat(&v[dims.z..dims.z + nx], &dims.x)?;
    let y = Vov::from_flat(&v[dims.z + nx..], &dims.y)?;
    Ok((z, x, y))
}
