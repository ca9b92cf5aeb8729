//! Slow-limit dynamics: preparation of initial data, the effective slow-limit
//! right-hand side on the 14-component state, incompressible extended MHD on
//! (u, B*), the bridge between them, the fast-time averaged right-hand side,
//! and physics diagnostics (energy, Ohm's law residual, irrotational flows).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::emtf;
use crate::modes::{self, ModeCache};
use crate::plasma::{Basis, PlasmaParams, Remainder, State, BF, EF, RHO_E, RHO_I, U_E, U_I};
use crate::rk4::Axpy;
use crate::spectral::{vcombine, vnorm, vscale, vzeros, Field, Grid, Vector, C64};
use crate::{Error, Result};

const TWO_PI_CUBED: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI;

/// Incompressible XMHD unknowns: center-of-mass velocity and drifted field B*.
#[derive(Clone, Debug, PartialEq)]
pub struct XmhdState {
    pub u: Vector,
    pub b_star: Vector,
}

impl XmhdState {
    pub fn zeros(n: usize) -> Self {
        XmhdState { u: vzeros(n), b_star: vzeros(n) }
    }

    pub fn n(&self) -> usize {
        self.u[0].n()
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        self.u.iter().chain(self.b_star.iter())
    }

    pub fn norm(&self) -> f64 {
        self.fields().map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &XmhdState) -> XmhdState {
        let mut out = self.clone();
        out.axpy_fields(-1.0, other);
        out
    }

    fn axpy_fields(&mut self, a: f64, o: &XmhdState) {
        for (s, x) in self.u.iter_mut().zip(&o.u) {
            s.axpy(a, x);
        }
        for (s, x) in self.b_star.iter_mut().zip(&o.b_star) {
            s.axpy(a, x);
        }
    }

    pub fn dealias(&self, grid: &Grid) -> XmhdState {
        XmhdState {
            u: std::array::from_fn(|j| grid.dealias(&self.u[j])),
            b_star: std::array::from_fn(|j| grid.dealias(&self.b_star[j])),
        }
    }

    /// B = (1 − b̲Δ)⁻¹ B*
    pub fn b(&self, grid: &Grid, params: &PlasmaParams) -> Result<Vector> {
        b_of_bstar(grid, params, &self.b_star)
    }
}

impl Axpy for XmhdState {
    fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        if other.n() != self.n() {
            return Err(Error::GridMismatch { expected: self.n(), found: other.n() });
        }
        self.axpy_fields(a, other);
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.fields().all(|f| f.coef.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

/// B* = (1 − b̲Δ) B
pub fn bstar_of_b(grid: &Grid, params: &PlasmaParams, b: &[Field]) -> Result<Vector> {
    grid.vhelmholtz(b, params.derived().b_bar)
}

/// B = (1 − b̲Δ)⁻¹ B*
pub fn b_of_bstar(grid: &Grid, params: &PlasmaParams, b_star: &[Field]) -> Result<Vector> {
    grid.vhelmholtz_inverse(b_star, params.derived().b_bar)
}

// ---- pseudo-spectral products ----

fn samples(grid: &Grid, v: &[Field]) -> Result<Vec<Vec<f64>>> {
    let refs: Vec<&Field> = v.iter().collect();
    grid.inverse_many(&refs)
}

fn to_vector(mut f: Vec<Field>) -> Vector {
    let c = f.pop().unwrap();
    let b = f.pop().unwrap();
    let a = f.pop().unwrap();
    [a, b, c]
}

/// (a·∇) b, dealiased.
fn advect(grid: &Grid, a: &[Field], b: &[Field]) -> Result<Vector> {
    let pa = samples(grid, a)?;
    let mut grads = Vec::with_capacity(9);
    for c in 0..3 {
        grads.extend(grid.grad(&b[c])?);
    }
    let pg = samples(grid, &grads)?;
    let out: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            (0..grid.len())
                .map(|p| pa[0][p] * pg[3 * c][p] + pa[1][p] * pg[3 * c + 1][p] + pa[2][p] * pg[3 * c + 2][p])
                .collect()
        })
        .collect();
    Ok(to_vector(grid.project_many(&out)?))
}

/// ∇·(a ⊗ a), with (∇·S)_i = Σ_j ∂_j S_ij and the products dealiased.
fn div_outer(grid: &Grid, a: &[Field]) -> Result<Vector> {
    let pa = samples(grid, a)?;
    let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let prods: Vec<Vec<f64>> =
        pairs.iter().map(|&(i, j)| pa[i].iter().zip(&pa[j]).map(|(x, y)| x * y).collect()).collect();
    let s = grid.project_many(&prods)?;
    let entry = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &s[pairs.iter().position(|&p| p == (i, j)).unwrap()]
    };
    let mut out = vzeros(grid.n());
    for i in 0..3 {
        for j in 0..3 {
            let d = grid.grad(entry(i, j))?;
            out[i].axpy(1.0, &d[j]);
        }
    }
    Ok(out)
}

// ---- prepared data ----

/// Center-of-mass velocity (√m_e u_e + √m_i u_i)/(√n̄ (m_e + m_i)).
pub fn center_of_mass(params: &PlasmaParams, u_e: &[Field], u_i: &[Field]) -> Vector {
    let (me, mi, nb) = (params.m_e, params.m_i, params.n_bar);
    let s = 1.0 / (nb.sqrt() * (me + mi));
    std::array::from_fn(|j| Field::combine(&[(me.sqrt() * s, &u_e[j]), (mi.sqrt() * s, &u_i[j])]))
}

/// ‖(Id − P_e)𝒰‖ through the global multiplier formula.
pub fn prepared_residual(grid: &Grid, params: &PlasmaParams, u: &State) -> Result<f64> {
    Ok(modes::apply_pe_global(grid, params, u)?.sub(u)?.norm())
}

/// Rejects states that are not P_e-polarized within `rel_tol`·‖𝒰‖.
pub fn check_prepared(grid: &Grid, params: &PlasmaParams, u: &State, rel_tol: f64) -> Result<()> {
    let residual = prepared_residual(grid, params, u)?;
    if residual > rel_tol * u.norm().max(1e-300) && residual > 1e-300 {
        return Err(Error::Precondition { what: "state is not polarized by P_e".into(), residual });
    }
    Ok(())
}

/// Density offset n̄₀ carried by a prepared state.
pub fn density_offset(params: &PlasmaParams, u: &State) -> f64 {
    let d = params.derived();
    u.comps[RHO_I].coef[0].re / (d.dp_i / params.n_bar).sqrt()
}

fn constant(n: usize, value: f64) -> Field {
    let mut f = Field::zeros(n);
    f.coef[0] = C64::new(value, 0.0);
    f
}

/// Builds a P_e-polarized state from raw physical velocities: both are
/// Leray-projected and given the mass-weighted common mean, densities are set
/// to the constant offset n̄₀, E = 0 and B = n̄ ∇×Δ⁻¹(v_e − v_i).
pub fn prepare_data(grid: &Grid, params: &PlasmaParams, v_e: &[Field], v_i: &[Field], n0: f64) -> Result<State> {
    params.validate()?;
    let n = grid.n();
    let (me, mi, nb) = (params.m_e, params.m_i, params.n_bar);
    let mut ve = grid.leray(v_e)?;
    let mut vi = grid.leray(v_i)?;
    for j in 0..3 {
        ve[j] = grid.real_part(&ve[j])?;
        vi[j] = grid.real_part(&vi[j])?;
        let mean = (me * ve[j].coef[0] + mi * vi[j].coef[0]) / (me + mi);
        ve[j].coef[0] = mean;
        vi[j].coef[0] = mean;
    }
    let diff = vcombine(&[(1.0, &ve), (-1.0, &vi)]);
    let b = vscale(&grid.curl(&grid.vinverse_laplacian(&diff)?)?, nb);
    let [we, wi] = params.sym_weights();
    let [re, ri] = params.rho_of_density(n0, n0);
    let u = State::from_parts(
        Basis::Symmetrized,
        [constant(n, re), constant(n, ri)],
        vscale(&ve, we),
        vscale(&vi, wi),
        vzeros(n),
        b,
    );
    let residual = prepared_residual(grid, params, &u)?;
    if residual > 1e-11 * u.norm().max(1.0) {
        return Err(Error::Precondition { what: "prepared data left the range of P_e".into(), residual });
    }
    let g = emtf::gauss_residual(grid, params, 0.0, &u)?;
    if g.div_b.max(g.charge) > 1e-12 * u.norm().max(1.0) {
        return Err(Error::Precondition {
            what: "prepared data violates a Gauss law".into(),
            residual: g.div_b.max(g.charge),
        });
    }
    Ok(u)
}

/// Seeded random vector field with coefficients in |k|∞ ≤ band, zero mean,
/// real-valued in physical space.
pub fn random_vector(grid: &Grid, rng: &mut ChaCha8Rng, band: i32) -> Result<Vector> {
    let mut v = vzeros(grid.n());
    for comp in v.iter_mut() {
        for idx in 0..grid.len() {
            let k = grid.k_of(idx);
            if k.iter().all(|kj| kj.abs() <= band) && k != [0, 0, 0] && !grid.is_nyquist(idx) {
                comp.coef[idx] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        *comp = grid.real_part(comp)?;
    }
    Ok(v)
}

/// Random prepared data: band-limited divergence-free velocities, jointly
/// normalized to H¹ norm `amplitude`, then passed through [`prepare_data`].
pub fn random_prepared(grid: &Grid, params: &PlasmaParams, seed: u64, amplitude: f64, n0: f64) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = grid.cutoff().min(4);
    let ve = grid.leray(&random_vector(grid, &mut rng, band)?)?;
    let vi = grid.leray(&random_vector(grid, &mut rng, band)?)?;
    let mut both: Vec<Field> = ve.to_vec();
    both.extend(vi.iter().cloned());
    let h1 = grid.hsigma_norm(&both, 1.0);
    let s = if h1 > 0.0 { amplitude / h1 } else { 0.0 };
    prepare_data(grid, params, &vscale(&ve, s), &vscale(&vi, s), n0)
}

// ---- effective slow-limit model ----

/// Right-hand side of the effective slow-limit model on a P_e-polarized state.
/// Density and electric rows are zero; the velocity and magnetic rows combine
/// the projected Lorentz column and the projected quasilinear column.
pub fn eslm_rhs(grid: &Grid, params: &PlasmaParams, u: &State) -> Result<State> {
    check_prepared(grid, params, u, 1e-8)?;
    eslm_rhs_unchecked(grid, params, u)
}

/// [`eslm_rhs`] without the polarization check, for use inside time steppers.
pub fn eslm_rhs_unchecked(grid: &Grid, params: &PlasmaParams, u: &State) -> Result<State> {
    let n = grid.n();
    let d = params.derived();
    let (me, mi, nb, b) = (params.m_e, params.m_i, params.n_bar, d.b_bar);
    let lu = grid.leray(&center_of_mass(params, u.u_e(), u.u_i()))?;
    let bf = grid.leray(u.b())?;
    let j = grid.curl(&bf)?;
    let curl_j = grid.curl(&j)?;
    let curl_lu = grid.curl(&lu)?;

    let jxb = grid.cross(&j, &bf)?;
    let d0 = vcombine(&[(1.0, &lu), (-(1.0 - d.delta) * mi / d.rho_bar, &j)]);
    let dxb = grid.cross(&d0, &bf)?;
    let div_s = vcombine(&[(1.0, &div_outer(grid, &lu)?), (b / d.rho_bar, &div_outer(grid, &j)?)]);
    let t0 = vcombine(&[
        (-b, &grid.cross(&lu, &curl_j)?),
        (-b, &grid.cross(&j, &curl_lu)?),
        (mi.powi(3) * d.delta * (1.0 - d.delta) / (d.rho_bar * d.rho_bar), &grid.cross(&j, &curl_j)?),
    ]);

    let l_jxb = grid.leray(&jxb)?;
    let h_dxb = grid.vhelmholtz_ratio(&grid.leray(&dxb)?, b)?;
    let l_divs = grid.leray(&div_s)?;
    let h_t = grid.vhelmholtz_ratio(&grid.leray(&t0)?, b)?;
    let lorentz = b / (me * mi);

    let r_ue = vcombine(&[
        ((nb * me).sqrt() * lorentz, &l_jxb),
        ((nb / me).sqrt(), &h_dxb),
        (-(nb * me).sqrt(), &l_divs),
        (-(nb / me).sqrt(), &h_t),
    ]);
    let r_ui = vcombine(&[
        ((nb * mi).sqrt() * lorentz, &l_jxb),
        (-(nb / mi).sqrt(), &h_dxb),
        (-(nb * mi).sqrt(), &l_divs),
        ((nb / mi).sqrt(), &h_t),
    ]);
    let curl_diff = vcombine(&[(1.0, &grid.curl(&dxb)?), (-1.0, &grid.curl(&t0)?)]);
    let r_b = grid.vhelmholtz_inverse(&curl_diff, b)?;
    Ok(State::from_parts(
        Basis::Symmetrized,
        [Field::zeros(n), Field::zeros(n)],
        r_ue,
        r_ui,
        vzeros(n),
        r_b,
    ))
}

/// Redundancy of the velocity and magnetic rows: the time derivative of
/// Ampère's law, ∇×R_B − (√(n̄/m_i) R_ui − √(n̄/m_e) R_ue), in L².
pub fn redundancy_residual(grid: &Grid, params: &PlasmaParams, rhs: &State) -> Result<f64> {
    let (me, mi, nb) = (params.m_e, params.m_i, params.n_bar);
    let dj = vcombine(&[((nb / mi).sqrt(), &rhs.vector(U_I)), (-(nb / me).sqrt(), &rhs.vector(U_E))]);
    let curl = grid.curl(rhs.b())?;
    Ok(vnorm(&vcombine(&[(1.0, &curl), (-1.0, &dj)])))
}

// ---- incompressible XMHD ----

fn max_divergence(grid: &Grid, v: &[Field]) -> Result<f64> {
    Ok(grid.div(v)?.coef.iter().fold(0.0f64, |m, c| m.max(c.norm())))
}

/// Time derivatives of (u, B*) for incompressible XMHD; pressure is removed by
/// the Leray projection.
pub fn xmhd_rhs(grid: &Grid, params: &PlasmaParams, x: &XmhdState) -> Result<XmhdState> {
    let scale = x.norm().max(1.0) * (grid.cutoff() as f64 + 1.0);
    let div = max_divergence(grid, &x.u)?.max(max_divergence(grid, &x.b_star)?);
    if div > 1e-10 * scale {
        return Err(Error::Precondition { what: "XMHD fields must be divergence-free".into(), residual: div });
    }
    let d = params.derived();
    let bf = x.b(grid, params)?;
    let j = grid.curl(&bf)?;
    let w = grid.curl(&x.u)?;
    let force = vcombine(&[(1.0, &advect(grid, &x.u, &x.u)?), (1.0 / d.rho_bar, &grid.cross(&x.b_star, &j)?)]);
    let du = vscale(&grid.leray(&force)?, -1.0);
    let drift = vcombine(&[(1.0, &x.u), (-d.d_i / d.rho_bar, &j)]);
    let flux = vcombine(&[(1.0, &grid.cross(&x.b_star, &drift)?), (d.b_bar, &grid.cross(&w, &j)?)]);
    let db = vscale(&grid.curl(&flux)?, -1.0);
    Ok(XmhdState { u: du, b_star: db })
}

/// Pressure p = −Δ⁻¹∇·[(u·∇)u + ρ̲⁻¹ B*×(∇×B)], reconstructed for reporting.
pub fn xmhd_pressure(grid: &Grid, params: &PlasmaParams, x: &XmhdState) -> Result<Field> {
    let d = params.derived();
    let j = grid.curl(&x.b(grid, params)?)?;
    let force = vcombine(&[(1.0, &advect(grid, &x.u, &x.u)?), (1.0 / d.rho_bar, &grid.cross(&x.b_star, &j)?)]);
    Ok(grid.inverse_laplacian(&grid.div(&force)?)?.scale(-1.0))
}

/// ∫ [ρ̲|u|²/2 + |B|²/2 + b̲|∇×B|²/2] dx, by Parseval.
pub fn energy(grid: &Grid, params: &PlasmaParams, x: &XmhdState) -> Result<f64> {
    let d = params.derived();
    let bf = x.b(grid, params)?;
    let j = grid.curl(&bf)?;
    let sq = |v: &[Field]| vnorm(v).powi(2);
    Ok(TWO_PI_CUBED * 0.5 * (d.rho_bar * sq(&x.u) + sq(&bf) + d.b_bar * sq(&j)))
}

// ---- bridge ----

/// Linear map (u_e, u_i, B) ↦ (u, B*) without the polarization check; this
/// is also its own differential.
pub fn bridge_linear(grid: &Grid, params: &PlasmaParams, u: &State) -> Result<XmhdState> {
    Ok(XmhdState {
        u: center_of_mass(params, u.u_e(), u.u_i()),
        b_star: bstar_of_b(grid, params, u.b())?,
    })
}

pub fn slm_to_xmhd(grid: &Grid, params: &PlasmaParams, u: &State) -> Result<XmhdState> {
    u.expect(Basis::Symmetrized)?;
    check_prepared(grid, params, u, 1e-9)?;
    bridge_linear(grid, params, u)
}

/// Back-map u_e = √(n̄m_e)u − b̲√(n̄/m_e)∇×B, u_i = √(n̄m_i)u + b̲√(n̄/m_i)∇×B,
/// B = (1 − b̲Δ)⁻¹B*, E = 0, constant densities for the offset n̄₀.
pub fn xmhd_to_slm(grid: &Grid, params: &PlasmaParams, x: &XmhdState, n0: f64) -> Result<State> {
    let n = grid.n();
    let d = params.derived();
    let (me, mi, nb, b) = (params.m_e, params.m_i, params.n_bar, d.b_bar);
    let bf = x.b(grid, params)?;
    let j = grid.curl(&bf)?;
    let ue = vcombine(&[((nb * me).sqrt(), &x.u), (-b * (nb / me).sqrt(), &j)]);
    let ui = vcombine(&[((nb * mi).sqrt(), &x.u), (b * (nb / mi).sqrt(), &j)]);
    let [re, ri] = params.rho_of_density(n0, n0);
    Ok(State::from_parts(Basis::Symmetrized, [constant(n, re), constant(n, ri)], ue, ui, vzeros(n), bf))
}

// ---- fast-time average ----

/// Trapezoidal mean over τ ∈ [0, T] of S(−τ) N(0, S(τ)𝒰₀).
pub fn flm_rhs_quadrature(cache: &ModeCache, u0: &State, t_avg: f64, nodes: usize) -> Result<State> {
    if nodes < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 quadrature nodes, got {nodes}")));
    }
    let (grid, params) = (cache.grid(), cache.params());
    modes::trapezoid_mean(t_avg, nodes, u0, |tau| {
        let u = cache.group_exp(tau, u0)?;
        let n = emtf::rhs_nonstiff(grid, params, 0.0, &u)?;
        cache.group_exp(-tau, &n)
    })
}

/// Error budget for comparing the quadrature average with its τ → ∞ limit:
/// the closed-form finite-T averaging error plus the trapezoid error, both
/// evaluated on the integrand at the prepared state.
pub fn flm_error_bound(cache: &ModeCache, u0: &State, t_avg: f64, nodes: usize) -> Result<f64> {
    let (grid, params) = (cache.grid(), cache.params());
    let n0 = emtf::rhs_nonstiff(grid, params, 0.0, u0)?;
    let finite = cache.finite_mean(-1.0, t_avg, &n0)?;
    let limit = modes::apply_p(grid, params, &n0)?;
    let quad = modes::trapezoid_mean(t_avg, nodes, &n0, |tau| cache.group_exp(-tau, &n0))?;
    Ok(finite.sub(&limit)?.norm() + quad.sub(&finite)?.norm())
}

/// Running averages (1/T')∫₀^{T'} S(τ)𝒰 dτ sampled at the nodes of a fine
/// trapezoid grid on [0, t_max]; returns (T', ‖average − P𝒰‖) pairs.
pub fn average_decay(cache: &ModeCache, u: &State, t_max: f64, nodes: usize) -> Result<Vec<(f64, f64)>> {
    if nodes < 2 || !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("need t_max > 0 and at least 2 nodes, got {t_max}, {nodes}")));
    }
    let h = t_max / (nodes - 1) as f64;
    let limit = cache.mean_value_exact(u)?;
    let mut acc = State::zeros(u.n(), u.basis);
    let mut prev = u.clone();
    let mut out = Vec::with_capacity(nodes - 1);
    for j in 1..nodes {
        let t = j as f64 * h;
        let next = cache.group_exp(t, u)?;
        acc.axpy(0.5 * h, &prev)?;
        acc.axpy(0.5 * h, &next)?;
        out.push((t, acc.scale(1.0 / t).sub(&limit)?.norm()));
        prev = next;
    }
    Ok(out)
}

/// Upper envelope δ(T) = sup_{T' ≥ T} e(T') of a decay curve.
pub fn decay_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = points.to_vec();
    for j in (0..out.len().saturating_sub(1)).rev() {
        out[j].1 = out[j].1.max(out[j + 1].1);
    }
    out
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// ---- generalized Ohm's law ----

/// Coefficients of the generalized Ohm's law residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OhmCoefficients {
    pub d_e2: f64,
    pub d_i: f64,
    /// Weights (w_e, w_i) of the pressure term −(w_e∇p_e − w_i∇p_i)/ρ.
    pub pressure: [f64; 2],
}

impl OhmCoefficients {
    pub fn from_params(params: &PlasmaParams) -> Self {
        let d = params.derived();
        OhmCoefficients { d_e2: d.d_e * d.d_e, d_i: d.d_i, pressure: [params.m_i, params.m_e] }
    }

    /// Ideal MHD: only E + u×B remains.
    pub fn ideal() -> Self {
        OhmCoefficients { d_e2: 0.0, d_i: 0.0, pressure: [0.0, 0.0] }
    }
}

/// Physical two-fluid fields on the grid.
pub struct PhysicalFields {
    pub n_e: Vec<f64>,
    pub n_i: Vec<f64>,
    pub v_e: [Vec<f64>; 3],
    pub v_i: [Vec<f64>; 3],
    pub e: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
}

fn arr3(mut v: Vec<Vec<f64>>) -> [Vec<f64>; 3] {
    let c = v.pop().unwrap();
    let b = v.pop().unwrap();
    let a = v.pop().unwrap();
    [a, b, c]
}

/// Undoes the scaling of the fast-scale system: n_s = n̄ + ε𝓡(g_s⁻¹)(ε, q_s),
/// v_s = ε u_s/√(n̄m_s), E = εE', B = εB'.
pub fn physical_fields(grid: &Grid, params: &PlasmaParams, eps: f64, u: &State) -> Result<PhysicalFields> {
    let [we, wi] = params.sym_weights();
    let refs: Vec<&Field> = u.comps.iter().collect();
    let p = grid.inverse_many(&refs)?;
    let dens = |c: usize, w: f64, cl: crate::plasma::Closure| -> Result<Vec<f64>> {
        p[c].par_iter()
            .map(|r| Ok(params.n_bar + eps * cl.remainder(Remainder::DensityInverse, eps, r / w)?))
            .collect()
    };
    let scaled = |start: usize, s: f64| arr3((0..3).map(|j| p[start + j].iter().map(|x| s * x).collect()).collect());
    Ok(PhysicalFields {
        n_e: dens(RHO_E, we, params.electron())?,
        n_i: dens(RHO_I, wi, params.ion())?,
        v_e: scaled(U_E, eps / we),
        v_i: scaled(U_I, eps / wi),
        e: scaled(EF, eps),
        b: scaled(BF, eps),
    })
}

/// ρ, u and J/ρ from physical fields.
fn mhd_moments(params: &PlasmaParams, f: &PhysicalFields) -> (Vec<f64>, [Vec<f64>; 3], [Vec<f64>; 3]) {
    let (me, mi) = (params.m_e, params.m_i);
    let len = f.n_e.len();
    let rho: Vec<f64> = (0..len).map(|p| me * f.n_e[p] + mi * f.n_i[p]).collect();
    let u = arr3(
        (0..3)
            .map(|c| (0..len).map(|p| (me * f.n_e[p] * f.v_e[c][p] + mi * f.n_i[p] * f.v_i[c][p]) / rho[p]).collect())
            .collect(),
    );
    let jr = arr3(
        (0..3)
            .map(|c| (0..len).map(|p| (f.n_i[p] * f.v_i[c][p] - f.n_e[p] * f.v_e[c][p]) / rho[p]).collect())
            .collect(),
    );
    (rho, u, jr)
}

fn grad_samples(grid: &Grid, s: &[f64]) -> Result<[Vec<f64>; 3]> {
    let g = grid.grad(&grid.forward(s)?)?;
    Ok(arr3(grid.inverse_many(&[&g[0], &g[1], &g[2]])?))
}

/// L² norm of the generalized Ohm's law residual at the midpoint of two
/// fast-scale states, with ∂_τ(J/ρ) from their centered difference. Time is
/// the physical (fast) time τ = t/ε.
pub fn gol_residual(
    grid: &Grid,
    params: &PlasmaParams,
    eps: f64,
    before: (f64, &State),
    after: (f64, &State),
    coef: &OhmCoefficients,
) -> Result<f64> {
    let (t0, u0) = before;
    let (t1, u1) = after;
    if t1 == t0 {
        return Err(Error::InvalidParameter("snapshot spacing is zero".into()));
    }
    let mut mid = u0.clone();
    mid.axpy(1.0, u1)?;
    let mid = mid.scale(0.5);
    let f = physical_fields(grid, params, eps, &mid)?;
    let (rho, u, jr) = mhd_moments(params, &f);
    let (_, _, jr0) = mhd_moments(params, &physical_fields(grid, params, eps, u0)?);
    let (_, _, jr1) = mhd_moments(params, &physical_fields(grid, params, eps, u1)?);
    let dtau = (t1 - t0) / eps;

    let pe: Vec<f64> = f.n_e.iter().map(|&n| params.pressure_e.pressure(n)).collect();
    let pi: Vec<f64> = f.n_i.iter().map(|&n| params.pressure_i.pressure(n)).collect();
    let gpe = grad_samples(grid, &pe)?;
    let gpi = grad_samples(grid, &pi)?;
    let gu: Vec<[Vec<f64>; 3]> = (0..3).map(|c| grad_samples(grid, &u[c])).collect::<Result<_>>()?;
    let gj: Vec<[Vec<f64>; 3]> = (0..3).map(|c| grad_samples(grid, &jr[c])).collect::<Result<_>>()?;

    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let mut acc = 0.0;
    for p in 0..grid.len() {
        let at = |v: &[Vec<f64>; 3]| [v[0][p], v[1][p], v[2][p]];
        let (uu, bb, jj, ee) = (at(&u), at(&f.b), at(&jr), at(&f.e));
        let uxb = cross(uu, bb);
        let jxb = cross(jj, bb);
        for c in 0..3 {
            let dot = |a: [f64; 3], g: &[Vec<f64>; 3]| a[0] * g[0][p] + a[1] * g[1][p] + a[2] * g[2][p];
            let pressure = -(coef.pressure[0] * gpe[c][p] - coef.pressure[1] * gpi[c][p]) / rho[p];
            let inertia = (jr1[c][p] - jr0[c][p]) / dtau + dot(uu, &gj[c]) + dot(jj, &gu[c]);
            let rhs = pressure + coef.d_i * jxb[c] - coef.d_i * coef.d_e2 * dot(jj, &gj[c]) + coef.d_e2 * inertia;
            let r = ee[c] + uxb[c] - rhs;
            acc += r * r;
        }
    }
    Ok((acc / grid.len() as f64).sqrt())
}

// ---- irrotational flows ----

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct IrrotationalReport {
    /// ‖δ∇×v_e + ∇×v_i‖ relative to ‖∇×v_i‖.
    pub relation_residual: f64,
    pub relation_holds: bool,
    /// ‖B‖ for B forced by (|k|² + n̄(1+δ)/δ) B_k = 0 combining both relations.
    pub forced_b_norm: Option<f64>,
    /// ‖eslm_rhs‖ on the constant state left once B vanishes.
    pub eslm_rhs_norm: Option<f64>,
}

/// For physical velocities with δ∇×v_e = −∇×v_i = B, the Ampère relation
/// ∇×B = n̄(v_i − v_e) forces (|k|² + n̄(1 + δ)/δ) B_k = 0. The report combines
/// the two candidate fields B_pau = δ∇×v_e and B_amp = n̄∇×Δ⁻¹(v_e − v_i)
/// through that mode identity, and evaluates the slow-limit right-hand side on
/// the constant state that remains.
pub fn irrotational_check(grid: &Grid, params: &PlasmaParams, v_e: &[Field], v_i: &[Field]) -> Result<IrrotationalReport> {
    if !(params.n_bar > 0.0) {
        return Err(Error::InvalidParameter("background density must be positive".into()));
    }
    let d = params.derived();
    let nb = params.n_bar;
    let curl_e = grid.curl(v_e)?;
    let curl_i = grid.curl(v_i)?;
    let rel = vnorm(&vcombine(&[(d.delta, &curl_e), (1.0, &curl_i)]));
    let relation_residual = rel / vnorm(&curl_i).max(1e-300);
    let relation_holds = rel <= 1e-10 * vnorm(&curl_i).max(1.0);
    if !relation_holds {
        return Ok(IrrotationalReport { relation_residual, relation_holds, ..Default::default() });
    }
    let b_pau = vscale(&curl_e, d.delta);
    let diff = vcombine(&[(1.0, &grid.leray(v_e)?), (-1.0, &grid.leray(v_i)?)]);
    let b_amp = vscale(&grid.curl(&grid.vinverse_laplacian(&diff)?)?, nb);
    let c = nb * (1.0 + d.delta) / d.delta;
    let mut forced = vzeros(grid.n());
    for j in 0..3 {
        for idx in 0..grid.len() {
            let k2 = grid.k2(idx);
            forced[j].coef[idx] = (k2 * b_amp[j].coef[idx] + c * b_pau[j].coef[idx]) / (k2 + c);
        }
    }
    // with B = 0, Ampère forces v_e = v_i: only the common mean survives
    let (me, mi) = (params.m_e, params.m_i);
    let mean: Vector = std::array::from_fn(|j| {
        constant(grid.n(), ((me * v_e[j].coef[0] + mi * v_i[j].coef[0]) / (me + mi)).re)
    });
    let rest = prepare_data(grid, params, &mean, &mean, 0.0)?;
    let rhs = eslm_rhs(grid, params, &rest)?;
    Ok(IrrotationalReport {
        relation_residual,
        relation_holds,
        forced_b_norm: Some(vnorm(&forced)),
        eslm_rhs_norm: Some(rhs.norm()),
    })
}

/// Physical velocities v_i = w + ∇φ_i, v_e = −w/δ + ∇φ_e + ū built from a
/// random divergence-free w; they satisfy δ∇×v_e = −∇×v_i.
pub fn irrotational_velocities(grid: &Grid, params: &PlasmaParams, seed: u64, amplitude: f64) -> Result<(Vector, Vector)> {
    let d = params.derived();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = grid.cutoff().min(4);
    let w = grid.leray(&random_vector(grid, &mut rng, band)?)?;
    let h1 = grid.hsigma_norm(&w, 1.0);
    let w = vscale(&w, amplitude / h1.max(1e-300));
    let mut phi = [Field::zeros(grid.n()), Field::zeros(grid.n())];
    for p in phi.iter_mut() {
        for idx in 0..grid.len() {
            let k = grid.k_of(idx);
            if k.iter().all(|kj| kj.abs() <= band) && k != [0, 0, 0] && !grid.is_nyquist(idx) {
                p.coef[idx] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.1 * amplitude;
            }
        }
        *p = grid.real_part(p)?;
    }
    let mut vi = vcombine(&[(1.0, &w), (1.0, &grid.grad(&phi[0])?)]);
    let mut ve = vcombine(&[(-1.0 / d.delta, &w), (1.0, &grid.grad(&phi[1])?)]);
    for j in 0..3 {
        let m = C64::new(0.1 * amplitude * (j as f64 + 1.0), 0.0);
        vi[j].coef[0] = m;
        ve[j].coef[0] = m;
    }
    Ok((ve, vi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_preparation_matches_multiplier() {
        let grid = Grid::new(8).unwrap();
        let p = PlasmaParams::default();
        let ve = [Field::zeros(8), grid.forward(&grid.sample(|x| x[0].cos())).unwrap(), Field::zeros(8)];
        let u = prepare_data(&grid, &p, &ve, &vzeros(8), 0.0).unwrap();
        // n̄∇×Δ⁻¹ applied to (0, cos x₁, 0) gives (0, 0, sin x₁)
        let expect = grid.forward(&grid.sample(|x| x[0].sin())).unwrap();
        assert!(u.b()[2].sub(&expect).norm() < 1e-14);
        assert!(u.b()[0].norm() < 1e-15 && u.b()[1].norm() < 1e-15);
    }

    #[test]
    fn bstar_factor_two() {
        let grid = Grid::new(8).unwrap();
        let p = PlasmaParams { m_e: 2.0, m_i: 2.0, ..Default::default() };
        assert!((p.derived().b_bar - 1.0).abs() < 1e-15);
        let mut b = vzeros(8);
        b[1].coef[grid.index_of([0, 0, 1])] = C64::new(1.0, 0.0);
        b[1].coef[0] = C64::new(3.0, 0.0);
        let bs = bstar_of_b(&grid, &p, &b).unwrap();
        assert_eq!(bs[1].coef[grid.index_of([0, 0, 1])], C64::new(2.0, 0.0));
        assert_eq!(bs[1].coef[0], C64::new(3.0, 0.0));
    }

    #[test]
    fn cosine_energy() {
        let grid = Grid::new(8).unwrap();
        let p = PlasmaParams::default();
        let a = 0.7;
        let mut x = XmhdState::zeros(8);
        x.u[1] = grid.forward(&grid.sample(|q| a * q[0].cos())).unwrap();
        let e = energy(&grid, &p, &x).unwrap();
        let expect = p.derived().rho_bar * a * a * TWO_PI_CUBED / 4.0;
        assert!((e - expect).abs() < 1e-12 * expect);
    }
}
