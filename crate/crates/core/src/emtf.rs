//! The fast-scale two-fluid Euler–Maxwell system in symmetrized variables,
//!
//!   ∂_t 𝒰 = ε⁻¹ 𝓛 𝒰 + N(ε, 𝒰),
//!
//! integrated through the filtered unknown V = S(−t/ε)𝒰, which obeys
//! ∂_t V = S(−t/ε) N(ε, S(t/ε) V). The stiff term never enters a discrete
//! operator: ε only appears in the conjugation and in the closure quotients.

use std::sync::Arc;

use rayon::prelude::*;

use crate::modes::ModeCache;
use crate::plasma::{Basis, PlasmaParams, Remainder, State, BF, RHO_E, RHO_I, U_E, U_I};
use crate::rk4;
use crate::spectral::{Field, Grid};
use crate::{Error, Result};

fn check(grid: &Grid, u: &State) -> Result<()> {
    u.expect(Basis::Symmetrized)?;
    if u.n() != grid.n() {
        return Err(Error::GridMismatch { expected: grid.n(), found: u.n() });
    }
    Ok(())
}

/// Non-penalized part N(ε, 𝒰): transport, closure-weighted divergence and
/// gradient terms, Lorentz forces and the nonlinear current in Ampère's law.
/// Products are formed on the grid and dealiased.
pub fn rhs_nonstiff(grid: &Grid, params: &PlasmaParams, eps: f64, u: &State) -> Result<State> {
    check(grid, u)?;
    let [we, wi] = params.sym_weights();
    let (ce, ci) = (params.electron(), params.ion());
    let (me, mi) = (params.m_e, params.m_i);

    // layout: 14 components, ∇ϱ_e, ∇ϱ_i, then ∂_j u_{s,c} at 20 + 9s + 3c + j
    let mut spec: Vec<Field> = u.comps.clone();
    for s in [RHO_E, RHO_I] {
        spec.extend(grid.grad(&u.comps[s])?);
    }
    for s in [U_E, U_I] {
        for c in 0..3 {
            spec.extend(grid.grad(&u.comps[s + c])?);
        }
    }
    let refs: Vec<&Field> = spec.iter().collect();
    let phys = grid.inverse_many(&refs)?;

    let out: Vec<[f64; 11]> = (0..grid.len())
        .into_par_iter()
        .map(|p| -> Result<[f64; 11]> {
            let at = |c: usize| phys[c][p];
            let vec3 = |start: usize| [at(start), at(start + 1), at(start + 2)];
            let b = vec3(BF);
            let mut o = [0.0; 11];
            let mut current = [0.0; 3];
            for (s, (w, cl, m, sign)) in [(we, &ce, me, -1.0), (wi, &ci, mi, 1.0)].into_iter().enumerate() {
                let rho = at(RHO_E + s);
                let grad_rho = vec3(14 + 3 * s);
                let us = vec3(U_E + 3 * s);
                let du = |c: usize, j: usize| at(20 + 9 * s + 3 * c + j);
                let q = rho / w;
                let v = [us[0] / w, us[1] / w, us[2] / w];
                let ra = cl.remainder(Remainder::SoundSpeed, eps, q)?;
                let rg = cl.remainder(Remainder::DensityInverse, eps, q)?;
                let div_u = du(0, 0) + du(1, 1) + du(2, 2);
                o[s] = -(v[0] * grad_rho[0] + v[1] * grad_rho[1] + v[2] * grad_rho[2]) - ra * div_u;
                let uxb = [us[1] * b[2] - us[2] * b[1], us[2] * b[0] - us[0] * b[2], us[0] * b[1] - us[1] * b[0]];
                for c in 0..3 {
                    let adv = v[0] * du(c, 0) + v[1] * du(c, 1) + v[2] * du(c, 2);
                    o[2 + 3 * s + c] = -adv - ra * grad_rho[c] + sign * uxb[c] / m;
                    current[c] -= sign * rg * v[c];
                }
            }
            o[8..11].copy_from_slice(&current);
            Ok(o)
        })
        .collect::<Result<_>>()?;

    let samples: Vec<Vec<f64>> = (0..11).map(|c| out.iter().map(|o| o[c]).collect()).collect();
    let mut fields = grid.project_many(&samples)?;
    fields.extend((0..3).map(|_| Field::zeros(grid.n())));
    Ok(State { basis: Basis::Symmetrized, comps: fields })
}

/// L² norms of the two Gauss residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GaussResidual {
    pub div_b: f64,
    /// ‖∇·E + 𝓡(g_e⁻¹)(ε, q_e) − 𝓡(g_i⁻¹)(ε, q_i)‖
    pub charge: f64,
}

pub fn gauss_residual(grid: &Grid, params: &PlasmaParams, eps: f64, u: &State) -> Result<GaussResidual> {
    check(grid, u)?;
    let div_b = grid.div(u.b())?.norm();
    let [we, wi] = params.sym_weights();
    let (ce, ci) = (params.electron(), params.ion());
    let phys = grid.inverse_many(&[&u.comps[RHO_E], &u.comps[RHO_I]])?;
    let dens: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| -> Result<f64> {
            Ok(ce.remainder(Remainder::DensityInverse, eps, phys[0][p] / we)?
                - ci.remainder(Remainder::DensityInverse, eps, phys[1][p] / wi)?)
        })
        .collect::<Result<_>>()?;
    let charge = grid.div(u.e())?.add(&grid.forward(&dens)?).norm();
    Ok(GaussResidual { div_b, charge })
}

/// Largest physical speed max_s max_x |v_s| of a symmetrized state.
pub fn max_speed(grid: &Grid, params: &PlasmaParams, u: &State) -> Result<f64> {
    let [we, wi] = params.sym_weights();
    let mut vmax = 0.0f64;
    for (start, w) in [(U_E, we), (U_I, wi)] {
        let refs: Vec<&Field> = u.comps[start..start + 3].iter().collect();
        let p = grid.inverse_many(&refs)?;
        for i in 0..grid.len() {
            let s = (p[0][i] * p[0][i] + p[1][i] * p[1][i] + p[2][i] * p[2][i]).sqrt() / w;
            vmax = vmax.max(s);
        }
    }
    Ok(vmax)
}

/// Filtered variable and slow time of one EMTF trajectory.
#[derive(Clone, Debug)]
pub struct EmtfRunState {
    pub epsilon: f64,
    pub t: f64,
    pub v: State,
    pub dt: f64,
}

/// Default fraction of a fast period allowed per step.
pub const PHASE_FRACTION: f64 = 0.5;

/// Evaluates and advances the filtered EMTF equation for one ε.
#[derive(Clone)]
pub struct EmtfSolver {
    cache: Arc<ModeCache>,
    epsilon: f64,
    /// Apply an exponential spectral filter after each step (off by default).
    pub spectral_filter: bool,
}

impl EmtfSolver {
    pub fn new(cache: Arc<ModeCache>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(EmtfSolver { cache, epsilon, spectral_filter: false })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Grid {
        self.cache.grid()
    }

    pub fn params(&self) -> &PlasmaParams {
        self.cache.params()
    }

    pub fn cache(&self) -> &ModeCache {
        &self.cache
    }

    pub fn rhs_nonstiff(&self, u: &State) -> Result<State> {
        rhs_nonstiff(self.grid(), self.params(), self.epsilon, u)
    }

    /// S(−t/ε) N(ε, S(t/ε) V)
    pub fn filtered_rhs(&self, t: f64, v: &State) -> Result<State> {
        let tau = t / self.epsilon;
        let u = self.cache.group_exp(tau, v)?;
        let n = self.rhs_nonstiff(&u)?;
        self.cache.group_exp(-tau, &n)
    }

    /// 𝒰(t) = S(t/ε) V(t)
    pub fn physical(&self, t: f64, v: &State) -> Result<State> {
        self.cache.group_exp(t / self.epsilon, v)
    }

    /// V(t) = S(−t/ε) 𝒰(t)
    pub fn filtered(&self, t: f64, u: &State) -> Result<State> {
        self.cache.group_exp(-t / self.epsilon, u)
    }

    /// min(cfl·Δx/(max|v| + max a̅), θ·ε/ω_max). The advective bound keeps the
    /// transport terms stable; the second resolves the phases e^{iλt/ε} that
    /// the filtered right-hand side carries.
    pub fn default_dt(&self, u: &State, cfl: f64) -> Result<f64> {
        let d = self.params().derived();
        let speed = max_speed(self.grid(), self.params(), u)? + d.a_bar_e.max(d.a_bar_i);
        let advective = cfl * self.grid().spacing() / speed;
        let omega = self.cache.omega_max();
        let phase = if omega > 0.0 { PHASE_FRACTION * self.epsilon / omega } else { f64::INFINITY };
        Ok(advective.min(phase))
    }

    fn filter(&self, v: &mut State) {
        if !self.spectral_filter {
            return;
        }
        let grid = self.grid();
        let kc = grid.cutoff() as f64;
        for f in v.comps.iter_mut() {
            for (idx, c) in f.coef.iter_mut().enumerate() {
                let k = grid.kvec(idx);
                let r = k.iter().fold(0.0f64, |m, x| m.max(x.abs())) / kc;
                *c *= (-36.0 * r.powi(36)).exp();
            }
        }
    }

    /// One RK4 step of the filtered equation.
    pub fn step(&self, st: &EmtfRunState) -> Result<EmtfRunState> {
        let mut v = rk4::step(st.t, st.dt, &st.v, |t, v| self.filtered_rhs(t, v))?;
        if !v.is_finite() {
            return Err(Error::Instability { t: st.t + st.dt, reason: "non-finite filtered state".into() });
        }
        v = v.dealias(self.grid());
        self.filter(&mut v);
        Ok(EmtfRunState { epsilon: st.epsilon, t: st.t + st.dt, v, dt: st.dt })
    }

    /// Integrates from 𝒰(0) = `u0` to slow time `t_end`, reporting
    /// (t, V(t), 𝒰(t)) at `intervals + 1` equispaced times.
    pub fn integrate(
        &self,
        u0: &State,
        t_end: f64,
        intervals: usize,
        dt_max: f64,
        mut observe: impl FnMut(f64, &State, &State) -> Result<()>,
    ) -> Result<EmtfRunState> {
        check(self.grid(), u0)?;
        let v0 = u0.dealias(self.grid());
        let v = rk4::integrate_sampled(
            &v0,
            t_end,
            intervals,
            dt_max,
            |t, v| self.filtered_rhs(t, v),
            |v| {
                *v = v.dealias(self.grid());
                self.filter(v);
            },
            |t, v| {
                let u = self.physical(t, v)?;
                observe(t, v, &u)
            },
        )?;
        Ok(EmtfRunState { epsilon: self.epsilon, t: t_end, v, dt: dt_max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::C64;

    #[test]
    fn magnetic_only_state_has_zero_rhs() {
        let grid = Grid::new(8).unwrap();
        let p = PlasmaParams::default();
        let mut u = State::zeros(8, Basis::Symmetrized);
        u.comps[BF + 2].coef[grid.index_of([1, 0, 0])] = C64::new(0.3, 0.0);
        u.comps[BF + 2].coef[grid.index_of([-1, 0, 0])] = C64::new(0.3, 0.0);
        let r = rhs_nonstiff(&grid, &p, 0.1, &u).unwrap();
        assert_eq!(r.norm(), 0.0);
        assert_eq!(rhs_nonstiff(&grid, &p, 0.1, &State::zeros(8, Basis::Symmetrized)).unwrap().norm(), 0.0);
    }

    #[test]
    fn injected_divergence_is_reported() {
        let grid = Grid::new(8).unwrap();
        let p = PlasmaParams::default();
        let mut u = State::zeros(8, Basis::Symmetrized);
        let idx = grid.index_of([0, 0, 2]);
        u.comps[BF + 2].coef[idx] = C64::new(0.5, 0.0);
        let g = gauss_residual(&grid, &p, 0.1, &u).unwrap();
        assert!((g.div_b - 1.0).abs() < 1e-15);
        assert_eq!(g.charge, 0.0);
    }
}
