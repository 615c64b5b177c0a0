//! Least-squares calibration of the fitted voltage-loss parameters
//! (`alpha_ct`, `i0`, `r_ohm`, `m_mt`, `n_mt`) against polarization anchors.
//!
//! The shipped defaults were produced by [`fit_reference`]: the anchor set
//! below is a representative polarization curve for a 25 cm^2 single cell at
//! 60 C with both reactants at 1 bar. It is not measured data.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{Dyn, OMatrix, OVector, U5};

use crate::electrochem::nernst_voltage;
use crate::error::{Error, Result};
use crate::params::units::{pa_to_atm, PA_PER_BAR};
use crate::params::{ElectrochemParams, PhysicalConstants};

/// One point of a polarization curve: stack current [A] and cell voltage [V].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub i_fc: f64,
    pub v_cell: f64,
}

pub const REFERENCE_TEMPERATURE: f64 = 333.15;
pub const REFERENCE_PRESSURE: f64 = PA_PER_BAR;

pub const REFERENCE_ANCHORS: [Anchor; 15] = {
    const fn a(i_fc: f64, v_cell: f64) -> Anchor {
        Anchor { i_fc, v_cell }
    }
    [
        a(1.0, 0.860),
        a(2.0, 0.820),
        a(3.0, 0.790),
        a(4.0, 0.770),
        a(5.0, 0.750),
        a(6.0, 0.732),
        a(7.0, 0.716),
        a(8.0, 0.700),
        a(9.0, 0.685),
        a(10.0, 0.670),
        a(11.0, 0.655),
        a(12.0, 0.638),
        a(13.0, 0.620),
        a(14.0, 0.600),
        a(15.0, 0.576),
    ]
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub params: ElectrochemParams,
    /// Root-mean-square voltage residual [V].
    pub rms: f64,
    pub evaluations: usize,
}

// Parameters are searched as [alpha_ct, ln i0, r_ohm, ln m_mt, n_mt] so that
// i0 and m_mt stay positive.
struct Fit<'a> {
    base: ElectrochemParams,
    anchors: &'a [Anchor],
    e_nernst: f64,
    /// RT / 2F [V].
    k: f64,
    theta: OVector<f64, U5>,
}

impl Fit<'_> {
    fn params_from(&self, theta: &OVector<f64, U5>) -> ElectrochemParams {
        ElectrochemParams {
            alpha_ct: theta[0],
            i0: theta[1].exp(),
            r_ohm: theta[2],
            m_mt: theta[3].exp(),
            n_mt: theta[4],
            ..self.base
        }
    }
}

impl LeastSquaresProblem<f64, Dyn, U5> for Fit<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U5>;
    type ParameterStorage = Owned<f64, U5>;

    fn set_params(&mut self, x: &OVector<f64, U5>) {
        self.theta = *x;
    }

    fn params(&self) -> OVector<f64, U5> {
        self.theta
    }

    fn residuals(&self) -> Option<OVector<f64, Dyn>> {
        let [alpha, ln_i0, r, ln_m, n] = [0, 1, 2, 3, 4].map(|j| self.theta[j]);
        let a = self.base.a_eff;
        let r = OVector::<f64, Dyn>::from_iterator(
            self.anchors.len(),
            self.anchors.iter().map(|p| {
                let v_act = self.k / alpha * ((p.i_fc / a).ln() - ln_i0);
                let v = self.e_nernst - v_act - p.i_fc * r / a - (ln_m + n * p.i_fc).exp();
                v - p.v_cell
            }),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U5>> {
        let [alpha, ln_i0, _, ln_m, n] = [0, 1, 2, 3, 4].map(|j| self.theta[j]);
        let a = self.base.a_eff;
        let mut jac = OMatrix::<f64, Dyn, U5>::zeros(self.anchors.len());
        for (row, p) in self.anchors.iter().enumerate() {
            let log_ratio = (p.i_fc / a).ln() - ln_i0;
            let conc = (ln_m + n * p.i_fc).exp();
            jac[(row, 0)] = self.k / (alpha * alpha) * log_ratio;
            jac[(row, 1)] = self.k / alpha;
            jac[(row, 2)] = -p.i_fc / a;
            jac[(row, 3)] = -conc;
            jac[(row, 4)] = -p.i_fc * conc;
        }
        Some(jac)
    }
}

/// Fit the five loss parameters to `anchors` at temperature `t` [K] and
/// partial pressures in atm, starting from `start`. Anchors must lie above
/// the exchange current so the activation term is in its logarithmic range.
pub fn fit_electrochem(
    start: &ElectrochemParams,
    pc: &PhysicalConstants,
    anchors: &[Anchor],
    t: f64,
    p_h2_atm: f64,
    p_o2_atm: f64,
) -> Result<CalibrationReport> {
    if anchors.len() < 5 {
        return Err(Error::validation("calibration", "at least five anchors are needed for five parameters"));
    }
    if anchors.iter().any(|p| !(p.i_fc > 0.0) || !p.v_cell.is_finite()) {
        return Err(Error::validation("calibration", "anchor currents must be positive and voltages finite"));
    }
    if !(start.i0 > 0.0 && start.m_mt > 0.0 && start.alpha_ct > 0.0) {
        return Err(Error::validation("calibration", "starting alpha_ct, i0 and m_mt must be positive"));
    }
    let fit = Fit {
        base: *start,
        anchors,
        e_nernst: nernst_voltage(t, p_h2_atm, p_o2_atm)?,
        k: pc.r_univ * t / (2.0 * pc.faraday),
        theta: OVector::<f64, U5>::new(start.alpha_ct, start.i0.ln(), start.r_ohm, start.m_mt.ln(), start.n_mt),
    };
    let (fit, report) = LevenbergMarquardt::new()
        .with_ftol(1e-13)
        .with_xtol(1e-13)
        .with_patience(200)
        .minimize(fit);
    if !report.termination.was_successful() {
        return Err(Error::Convergence { message: format!("calibration stopped: {:?}", report.termination) });
    }
    let params = fit.params_from(&fit.theta);
    let rms = fit
        .residuals()
        .map(|r| (r.norm_squared() / anchors.len() as f64).sqrt())
        .ok_or_else(|| Error::Convergence { message: "calibration ended at a non-finite point".into() })?;
    if params.alpha_ct <= 0.0 || params.r_ohm < 0.0 {
        return Err(Error::Convergence { message: format!("calibration left the physical range: {params:?}") });
    }
    Ok(CalibrationReport { params, rms, evaluations: report.number_of_evaluations })
}

/// Refit the shipped defaults from the reference anchors.
pub fn fit_reference(start: &ElectrochemParams, pc: &PhysicalConstants) -> Result<CalibrationReport> {
    let p = pa_to_atm(REFERENCE_PRESSURE);
    fit_electrochem(start, pc, &REFERENCE_ANCHORS, REFERENCE_TEMPERATURE, p, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electrochem::cell_voltage;
    use crate::params::ParameterSet;

    fn generic_start() -> ElectrochemParams {
        ElectrochemParams { alpha_ct: 0.8, i0: 1e-4, r_ohm: 0.5, m_mt: 1e-3, n_mt: 0.1, ..Default::default() }
    }

    #[test]
    fn recovers_parameters_from_synthetic_curve() {
        let p = ParameterSet::default();
        let truth = ElectrochemParams { alpha_ct: 0.6, i0: 3e-6, r_ohm: 0.25, m_mt: 2e-4, n_mt: 0.35, ..p.electrochem };
        let anchors: Vec<_> = (1..=15)
            .map(|i| {
                let i_fc = i as f64;
                let v = cell_voltage(&truth, &p.constants, 333.15, 1.0, 1.0, i_fc).unwrap().v_cell;
                Anchor { i_fc, v_cell: v }
            })
            .collect();
        let fit = fit_electrochem(&p.electrochem, &p.constants, &anchors, 333.15, 1.0, 1.0).unwrap();
        assert!(fit.rms < 1e-9, "{}", fit.rms);
        let f = fit.params;
        for (a, b) in [(f.alpha_ct, 0.6), (f.i0, 3e-6), (f.r_ohm, 0.25), (f.m_mt, 2e-4), (f.n_mt, 0.35)] {
            assert!((a - b).abs() < 1e-5 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn shipped_defaults_reproduce_the_reference_fit() {
        let p = ParameterSet::default();
        let fit = fit_reference(&generic_start(), &p.constants).unwrap();
        let d = p.electrochem;
        for (a, b) in [
            (fit.params.alpha_ct, d.alpha_ct),
            (fit.params.i0, d.i0),
            (fit.params.r_ohm, d.r_ohm),
            (fit.params.m_mt, d.m_mt),
            (fit.params.n_mt, d.n_mt),
        ] {
            assert!((a - b).abs() < 1e-6 * b.abs(), "{a} vs {b}");
        }
        assert!(fit.rms < 5e-3, "{}", fit.rms);
    }

    #[test]
    fn too_few_anchors() {
        let p = ParameterSet::default();
        let r = fit_electrochem(&generic_start(), &p.constants, &REFERENCE_ANCHORS[..4], 333.15, 1.0, 1.0);
        assert!(r.is_err());
    }
}
