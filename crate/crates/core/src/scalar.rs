use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the solvers are generic over.
///
/// Model data (probabilities, labels) is stored in `f64` and converted on
/// use, so `f32` solvers trade precision for memory and speed.
pub trait Real:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Smallest pivot magnitude the simplex accepts for this precision.
    const PIVOT_TOL: f64;
    /// Feasibility / optimality tolerance for this precision.
    const FEAS_TOL: f64;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("value representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const PIVOT_TOL: f64 = 1e-9;
    const FEAS_TOL: f64 = 1e-9;
}

impl Real for f32 {
    const PIVOT_TOL: f64 = 1e-5;
    const FEAS_TOL: f64 = 1e-4;
}
