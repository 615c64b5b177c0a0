//! Explicit Runge-Kutta steppers over fixed-size arrays. The right-hand side
//! is autonomous within a step (inputs are held by the caller).

use crate::error::Result;

fn axpy<const N: usize>(x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *x;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        *o += h * s;
    }
    out
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(x: &[f64; N], dt: f64, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(x)?;
    let k2 = f(&axpy(x, dt, &[(0.5, &k1)]))?;
    let k3 = f(&axpy(x, dt, &[(0.5, &k2)]))?;
    let k4 = f(&axpy(x, dt, &[(1.0, &k3)]))?;
    Ok(axpy(x, dt, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub struct DopriStep<const N: usize> {
    pub x: [f64; N],
    /// Local error estimate (difference of the embedded solutions).
    pub err: [f64; N],
    /// Derivative at the new point, reusable as the next first stage.
    pub k_end: [f64; N],
}

/// One Dormand-Prince step from `x` with first stage `k1 = f(x)`.
pub fn dopri_step<const N: usize, F>(
    x: &[f64; N],
    k1: &[f64; N],
    dt: f64,
    mut f: F,
) -> Result<DopriStep<N>>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(&axpy(x, dt, &[(A21, k1)]))?;
    let k3 = f(&axpy(x, dt, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(&axpy(x, dt, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(&axpy(x, dt, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(&axpy(x, dt, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let x_new = axpy(x, dt, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&x_new)?;
    let zero = [0.0; N];
    let err = axpy(&zero, dt, &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    Ok(DopriStep { x: x_new, err, k_end: k7 })
}
