use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Grid;

/// A scalar function of position, `x = [x1, x2]` (`x2 = 0` in 1D).
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

impl From<f64> for ScalarFn {
    fn from(c: f64) -> Self {
        Self::constant(c)
    }
}

/// Nodal values over every node of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid_id: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_nodes(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid_id: grid.id(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            grid_id: grid.id(),
            values: grid.nodes().iter().map(|n| f(n.x)).collect(),
        }
    }

    pub fn sample(grid: &Grid, f: &ScalarFn) -> Self {
        Self::from_fn(grid, |x| f.eval(x))
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid_id: grid.id(),
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn ensure_on(&self, grid: &Grid) -> Result<()> {
        if self.grid_id != grid.id() || self.values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_nodes(),
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
