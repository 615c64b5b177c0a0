//! Equilibrium search: damped Newton on the scaled residual, with
//! pseudo-transient continuation when Newton stalls.

use nalgebra::{SMatrix, SVector};

use super::StateScale;
use crate::error::Result;
use crate::plant::{Disturbance, Plant, PlantInput, PlantState, N_STATES};

type Vec6 = SVector<f64, N_STATES>;
type Mat6 = SMatrix<f64, N_STATES, N_STATES>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Convergence threshold on `max_i |dx_i/dt| / scale_i` [1/s].
    pub tol: f64,
    pub max_newton: usize,
    pub max_continuation: usize,
    /// First pseudo time step of the continuation phase [s].
    pub continuation_dt: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_newton: 50, max_continuation: 2_000, continuation_dt: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateResult {
    pub x_star: PlantState,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when Newton stalled and continuation steps were needed.
    pub used_continuation: bool,
}

struct Problem<'a> {
    plant: &'a Plant,
    u: f64,
    d: f64,
    scale: [f64; N_STATES],
}

impl Problem<'_> {
    fn state(&self, z: &Vec6) -> [f64; N_STATES] {
        let mut x = [0.0; N_STATES];
        for i in 0..N_STATES {
            x[i] = z[i] * self.scale[i];
        }
        x
    }

    /// Scaled residual `f(x) / scale`, or `None` outside the valid domain.
    fn residual(&self, z: &Vec6) -> Option<Vec6> {
        let f = self.plant.rhs(&self.state(z), self.u, self.d).ok()?;
        let r = Vec6::from_fn(|i, _| f[i] / self.scale[i]);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self, z: &Vec6, r0: &Vec6) -> Mat6 {
        let mut jac = Mat6::zeros();
        for j in 0..N_STATES {
            let xj = z[j] * self.scale[j];
            let h = (1e-6 * xj.abs()).max(1e-10) / self.scale[j];
            let mut zp = *z;
            zp[j] += h;
            let mut zm = *z;
            zm[j] -= h;
            let col = match (self.residual(&zp), self.residual(&zm)) {
                (Some(rp), Some(rm)) => (rp - rm) / (2.0 * h),
                (Some(rp), None) => (rp - r0) / h,
                (None, Some(rm)) => (r0 - rm) / h,
                (None, None) => Vec6::zeros(),
            };
            jac.set_column(j, &col);
        }
        jac
    }
}

fn norm(r: &Vec6) -> f64 {
    r.amax()
}

fn clamp_speed(mut z: Vec6) -> Vec6 {
    if z[0] < 0.0 {
        z[0] = 0.0;
    }
    z
}

/// Solve `dx/dt = 0` for fixed `u` and `d` starting from `guess`.
///
/// Returns the best iterate with `converged = false` when the iteration
/// budget runs out; an invalid guess is an error.
pub fn find_steady_state(
    plant: &Plant,
    guess: &PlantState,
    u: PlantInput,
    d: Disturbance,
    scale: &StateScale,
    opts: &SteadyStateOptions,
) -> Result<SteadyStateResult> {
    guess.check()?;
    plant.derivative(guess, u, d)?;
    let prob = Problem { plant, u: u.v_cm, d: d.i_fc, scale: scale.0 };
    let mut z = Vec6::from_fn(|i, _| guess.to_array()[i] / scale.0[i]);
    let mut r = prob.residual(&z).expect("guess was checked above");
    let mut res = norm(&r);
    let mut iterations = 0;
    let mut used_continuation = false;

    let finish = |z: &Vec6, res: f64, iterations, used_continuation| SteadyStateResult {
        x_star: PlantState::from_array(prob.state(z)),
        residual_norm: res,
        iterations,
        converged: res < opts.tol,
        used_continuation,
    };

    while res >= opts.tol && iterations < opts.max_newton {
        let jac = prob.jacobian(&z, &r);
        let Some(step) = jac.lu().solve(&(-r)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = clamp_speed(z + step * lambda);
            if let Some(rt) = prob.residual(&trial) {
                let nt = norm(&rt);
                if nt < (1.0 - 1e-4 * lambda) * res {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((zt, rt, nt)) => {
                z = zt;
                r = rt;
                res = nt;
            }
            None => break,
        }
    }
    if res < opts.tol {
        return Ok(finish(&z, res, iterations, used_continuation));
    }

    // Pseudo-transient continuation: (I/dt - J) dz = r with dt grown by the
    // ratio of successive residuals.
    used_continuation = true;
    let mut dt = opts.continuation_dt;
    let mut count = 0;
    while res >= opts.tol && count < opts.max_continuation {
        count += 1;
        iterations += 1;
        let jac = prob.jacobian(&z, &r);
        let lhs = Mat6::identity() / dt - jac;
        let next = lhs
            .lu()
            .solve(&r)
            .map(|dz| clamp_speed(z + dz))
            .and_then(|zt| prob.residual(&zt).map(|rt| (zt, rt)));
        match next {
            Some((zt, rt)) if norm(&rt).is_finite() && norm(&rt) < 10.0 * res => {
                let nt = norm(&rt);
                dt = (dt * res / nt).clamp(dt * 0.1, dt * 10.0).min(1e12);
                z = zt;
                r = rt;
                res = nt;
            }
            _ => dt *= 0.25,
        }
        if dt < 1e-14 {
            break;
        }
    }
    Ok(finish(&z, res, iterations, used_continuation))
}
