//! Per-Fourier-mode algebra of the penalization operator 𝓛.
//!
//! For each wavenumber k the operator acts on the 14 symmetrized unknowns
//! (ϱ_e, ϱ_i, u_e, u_i, E, B) as the skew-Hermitian matrix L_k, while the two
//! Gauss constraints form the 2×14 matrix G_k. This module builds both, the
//! closed-form orthonormal bases of H_k = Ker L_k ∩ Ker G_k and Ker L_k, the
//! associated projectors P_e and P, and the unitary group S(τ) = e^{τ𝓛}.

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen};
use rayon::prelude::*;

use crate::plasma::{Basis, PlasmaParams, State, BF, EF, NCOMP, RHO_E, RHO_I, U_E, U_I};
use crate::spectral::{vcombine, vzeros, Field, Grid, C64, I};
use crate::{Error, Result};

pub type M14 = SMatrix<C64, 14, 14>;
pub type V14 = SVector<C64, 14>;
pub type G2 = SMatrix<C64, 2, 14>;


fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// L_k and G_k for one wavenumber.
#[derive(Clone, Debug)]
pub struct ModeMatrices {
    pub k: [f64; 3],
    pub l: M14,
    pub g: G2,
}

/// Assembles L_k = i Σ k_j C_j + D and G_k.
pub fn build_mode_matrices(k: [f64; 3], params: &PlasmaParams) -> ModeMatrices {
    let d = params.derived();
    let (se, si) = ((params.n_bar / params.m_e).sqrt(), (params.n_bar / params.m_i).sqrt());
    let mut l = M14::zeros();
    for j in 0..3 {
        l[(RHO_E, U_E + j)] = -I * d.a_bar_e * k[j];
        l[(RHO_I, U_I + j)] = -I * d.a_bar_i * k[j];
        l[(U_E + j, RHO_E)] = -I * d.a_bar_e * k[j];
        l[(U_I + j, RHO_I)] = -I * d.a_bar_i * k[j];
        l[(U_E + j, EF + j)] = re(-se);
        l[(U_I + j, EF + j)] = re(si);
        l[(EF + j, U_E + j)] = re(se);
        l[(EF + j, U_I + j)] = re(-si);
    }
    // k× as a matrix: (k×v)_r = Σ_c kx[r][c] v_c
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    for r in 0..3 {
        for c in 0..3 {
            l[(EF + r, BF + c)] = I * kx[r][c];
            l[(BF + r, EF + c)] = -I * kx[r][c];
        }
    }
    let skew = (l + l.adjoint()).norm();
    assert!(skew <= 1e-14 * (1.0 + l.norm()), "L_k not skew-Hermitian: {skew:e}");

    let mut g = G2::zeros();
    for j in 0..3 {
        g[(0, BF + j)] = I * k[j];
        g[(1, EF + j)] = I * k[j];
    }
    g[(1, RHO_E)] = re((params.n_bar / d.dp_e).sqrt());
    g[(1, RHO_I)] = re(-(params.n_bar / d.dp_i).sqrt());
    ModeMatrices { k, l, g }
}

/// Right-handed orthonormal frame with first vector k/|k|.
pub fn frame(k: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let nk = norm3(k);
    if nk == 0.0 {
        return Err(Error::InvalidParameter("frame requested for k = 0".into()));
    }
    let e1 = [k[0] / nk, k[1] / nk, k[2] / nk];
    let mut a = [0.0, 0.0, 1.0];
    if norm3(cross(e1, a)) < 1e-8 {
        a = [1.0, 0.0, 0.0];
    }
    let c = cross(e1, a);
    let nc = norm3(c);
    assert!(nc > 1e-8, "degenerate frame for k = {k:?}");
    let e2 = [c[0] / nc, c[1] / nc, c[2] / nc];
    let e3 = cross(e1, e2);
    Ok([e1, e2, e3])
}

/// Deliberate corruption of the closed-form basis, used to exercise the
/// verification suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisFault {
    /// Flips the sign of the magnetic entry of w_k³.
    FlipW3Magnetic,
}

fn put(v: &mut V14, start: usize, x: [f64; 3], scale: C64) {
    for j in 0..3 {
        v[start + j] = scale * x[j];
    }
}

/// Closed-form vectors of the mode: (basis of H_k, completion to Ker L_k).
///
/// k = 0: seven vectors spanning H_0 plus the density direction orthogonal
/// to the neutral one. k ≠ 0: w¹..w⁴ spanning H_k plus w⁵, w⁶.
pub fn explicit_vectors(
    k: [f64; 3],
    params: &PlasmaParams,
    fault: Option<BasisFault>,
) -> (Vec<V14>, Vec<V14>) {
    let d = params.derived();
    let (me, mi, nb) = (params.m_e, params.m_i, params.n_bar);
    let nk = norm3(k);
    if nk == 0.0 {
        let r = (d.dp_e / d.dp_i).sqrt();
        let mut w0 = V14::zeros();
        w0[RHO_E] = re(r / (1.0 + r * r).sqrt());
        w0[RHO_I] = re(1.0 / (1.0 + r * r).sqrt());
        let mut h = vec![w0];
        let s = (mi / (me + mi)).sqrt();
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            let mut w = V14::zeros();
            put(&mut w, U_E, e, re(s * (me / mi).sqrt()));
            put(&mut w, U_I, e, re(s));
            h.push(w);
        }
        for j in 0..3 {
            let mut w = V14::zeros();
            w[BF + j] = re(1.0);
            h.push(w);
        }
        let mut extra = V14::zeros();
        extra[RHO_E] = re(1.0 / (1.0 + r * r).sqrt());
        extra[RHO_I] = re(-r / (1.0 + r * r).sqrt());
        return (h, vec![extra]);
    }

    let [e1, e2, e3] = frame(k).expect("nonzero k");
    let b = d.b_bar;
    let mut h = Vec::with_capacity(4);
    for e in [e2, e3] {
        let mut w = V14::zeros();
        let s = 1.0 / (me + mi).sqrt();
        put(&mut w, U_E, e, re(s * me.sqrt()));
        put(&mut w, U_I, e, re(s * mi.sqrt()));
        h.push(w);
    }
    let norm = (1.0 / b + 1.0 / (b * b * nk * nk)).sqrt();
    let mut mag_sign = 1.0;
    if fault == Some(BasisFault::FlipW3Magnetic) {
        mag_sign = -1.0;
    }
    // w³: velocities along 𝕖², magnetic field along 𝕖³
    let mut w3 = V14::zeros();
    put(&mut w3, U_E, e2, re((nb / me).sqrt() / norm));
    put(&mut w3, U_I, e2, re(-(nb / mi).sqrt() / norm));
    put(&mut w3, BF, e3, -I * mag_sign / (b * nk * norm));
    h.push(w3);
    // w⁴: velocities along 𝕖³, magnetic field along 𝕖²
    let mut w4 = V14::zeros();
    put(&mut w4, U_E, e3, re((nb / me).sqrt() / norm));
    put(&mut w4, U_I, e3, re(-(nb / mi).sqrt() / norm));
    put(&mut w4, BF, e2, I / (b * nk * norm));
    h.push(w4);

    let mut w5 = V14::zeros();
    put(&mut w5, BF, e1, re(1.0));
    let mut w6 = V14::zeros();
    let n6 = (nb * d.dp_e + nb * d.dp_i + nk * nk * d.dp_e * d.dp_i).sqrt();
    w6[RHO_E] = re(-(nb * d.dp_i).sqrt() / n6);
    w6[RHO_I] = re((nb * d.dp_e).sqrt() / n6);
    put(&mut w6, EF, e1, I * nk * (d.dp_e * d.dp_i).sqrt() / n6);
    (h, vec![w5, w6])
}

fn outer_sum(vs: &[V14]) -> M14 {
    let mut p = M14::zeros();
    for w in vs {
        p += w * w.adjoint();
    }
    p
}

/// Unitary eigendecomposition iL_k = V diag(λ) V†, so e^{τL_k} = V e^{−iτλ} V†.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: [f64; 14],
    pub vectors: M14,
}

impl Eigen {
    pub fn of(l: &M14) -> Eigen {
        let h = l * I;
        // symmetrize against roundoff before the Hermitian solver
        let h = (h + h.adjoint()) * re(0.5);
        let se = SymmetricEigen::new(h);
        let mut values = [0.0; 14];
        for (j, v) in se.eigenvalues.iter().enumerate() {
            values[j] = *v;
        }
        Eigen { values, vectors: se.eigenvectors }
    }

    /// e^{τ L_k} v
    pub fn apply(&self, tau: f64, v: &V14) -> V14 {
        let mut c = self.vectors.ad_mul(v);
        for j in 0..NCOMP {
            c[j] *= C64::from_polar(1.0, -tau * self.values[j]);
        }
        self.vectors * c
    }

    pub fn exp(&self, tau: f64) -> M14 {
        let mut d = M14::zeros();
        for j in 0..NCOMP {
            d[(j, j)] = C64::from_polar(1.0, -tau * self.values[j]);
        }
        self.vectors * d * self.vectors.adjoint()
    }

    /// (1/T) ∫₀ᵀ e^{sτL_k} dτ v in closed form, s = ±1.
    pub fn finite_mean(&self, sign: f64, t_avg: f64, v: &V14) -> V14 {
        let scale = self.values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut c = self.vectors.ad_mul(v);
        for j in 0..NCOMP {
            let lam = -sign * self.values[j];
            if lam.abs() > 1e-10 * scale {
                let z = I * lam * t_avg;
                c[j] *= (z.exp() - 1.0) / z;
            }
        }
        self.vectors * c
    }

    /// Projector onto the zero eigenspace.
    pub fn kernel_projector(&self) -> M14 {
        let scale = self.values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut p = M14::zeros();
        for j in 0..NCOMP {
            if self.values[j].abs() <= 1e-10 * scale {
                let w = self.vectors.column(j);
                p += w * w.adjoint();
            }
        }
        p
    }
}

/// Closed-form bases and the numerical eigendecomposition of one mode.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    pub k: [f64; 3],
    pub h_basis: Vec<V14>,
    pub kernel_basis: Vec<V14>,
    pub eigen: Eigen,
}

pub fn kernel_bases(m: &ModeMatrices, params: &PlasmaParams) -> ModeBasis {
    kernel_bases_with(m, params, None)
}

pub fn kernel_bases_with(m: &ModeMatrices, params: &PlasmaParams, fault: Option<BasisFault>) -> ModeBasis {
    let (h, extra) = explicit_vectors(m.k, params, fault);
    let mut kernel = h.clone();
    kernel.extend(extra);
    ModeBasis { k: m.k, h_basis: h, kernel_basis: kernel, eigen: Eigen::of(&m.l) }
}

/// P_ek = Σ_{H_k} w w†
pub fn projector_pe_k(basis: &ModeBasis) -> M14 {
    outer_sum(&basis.h_basis)
}

/// P_k = Σ_{Ker L_k} w w†
pub fn projector_p_k(basis: &ModeBasis) -> M14 {
    outer_sum(&basis.kernel_basis)
}

/// P_ek and P_k from the closed-form vectors alone.
pub fn projector_pair(k: [f64; 3], params: &PlasmaParams) -> (M14, M14) {
    let (h, extra) = explicit_vectors(k, params, None);
    let pe = outer_sum(&h);
    let p = pe + outer_sum(&extra);
    (pe, p)
}

fn gather(state: &State, idx: usize) -> V14 {
    V14::from_fn(|r, _| state.comps[r].coef[idx])
}

/// Applies a per-mode linear map to every lattice mode; Nyquist modes are zeroed.
pub fn apply_modewise(grid: &Grid, state: &State, f: impl Fn(usize, &V14) -> V14 + Sync) -> State {
    let n = state.n();
    let cols: Vec<V14> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            if grid.is_nyquist(idx) {
                V14::zeros()
            } else {
                f(idx, &gather(state, idx))
            }
        })
        .collect();
    let mut out = State::zeros(n, state.basis);
    for (idx, c) in cols.iter().enumerate() {
        for r in 0..NCOMP {
            out.comps[r].coef[idx] = c[r];
        }
    }
    out
}

fn check_grid(grid: &Grid, state: &State) -> Result<()> {
    state.expect(Basis::Symmetrized)?;
    if state.n() != grid.n() {
        return Err(Error::GridMismatch { expected: grid.n(), found: state.n() });
    }
    Ok(())
}

/// P_e applied mode by mode with the closed-form projector matrices.
pub fn apply_pe(grid: &Grid, params: &PlasmaParams, state: &State) -> Result<State> {
    check_grid(grid, state)?;
    Ok(apply_modewise(grid, state, |idx, v| projector_pair(grid.kvec(idx), params).0 * v))
}

/// P (projector onto Ker 𝓛) applied mode by mode.
pub fn apply_p(grid: &Grid, params: &PlasmaParams, state: &State) -> Result<State> {
    check_grid(grid, state)?;
    Ok(apply_modewise(grid, state, |idx, v| projector_pair(grid.kvec(idx), params).1 * v))
}

/// P_e through its global Fourier-multiplier expression in terms of the
/// Leray projector, (1 − b̲Δ)⁻¹ and curls. Independent of the per-mode bases.
pub fn apply_pe_global(grid: &Grid, params: &PlasmaParams, state: &State) -> Result<State> {
    check_grid(grid, state)?;
    let n = grid.n();
    let d = params.derived();
    let (me, mi, nb, b) = (params.m_e, params.m_i, params.n_bar, d.b_bar);
    let (ue, ui, bf) = (state.u_e(), state.u_i(), state.b());

    let weighted = vcombine(&[(me.sqrt(), &state.vector(U_E)), (mi.sqrt(), &state.vector(U_I))]);
    let ls = grid.leray(&weighted)?;
    let hi_curl_b = grid.vhelmholtz_inverse(&grid.curl(bf)?, b)?;
    let hr_lue = grid.vhelmholtz_ratio(&grid.leray(ue)?, b)?;
    let hr_lui = grid.vhelmholtz_ratio(&grid.leray(ui)?, b)?;
    let cross_w = b * nb / (me * mi).sqrt();

    let out_ue = vcombine(&[
        (me.sqrt() / (me + mi), &ls),
        (-b * (nb / me).sqrt(), &hi_curl_b),
        (-b * nb / me, &hr_lue),
        (cross_w, &hr_lui),
    ]);
    let out_ui = vcombine(&[
        (mi.sqrt() / (me + mi), &ls),
        (b * (nb / mi).sqrt(), &hi_curl_b),
        (cross_w, &hr_lue),
        (-b * nb / mi, &hr_lui),
    ]);
    let current = vcombine(&[((nb / mi).sqrt(), &state.vector(U_I)), (-(nb / me).sqrt(), &state.vector(U_E))]);
    let b_in = vcombine(&[(1.0, &grid.leray(bf)?), (b, &grid.curl(&current)?)]);
    let out_b = grid.vhelmholtz_inverse(&b_in, b)?;

    // densities: only the mean survives, through the neutral direction
    let r = (d.dp_e / d.dp_i).sqrt();
    let (m_e0, m_i0) = (state.comps[RHO_E].coef[0], state.comps[RHO_I].coef[0]);
    let mut rho_e = Field::zeros(n);
    let mut rho_i = Field::zeros(n);
    rho_e.coef[0] = d.c_bar * (r * m_e0 + m_i0);
    rho_i.coef[0] = d.c_bar * (m_e0 + m_i0 / r);

    Ok(State::from_parts(Basis::Symmetrized, [rho_e, rho_i], out_ue, out_ui, vzeros(n), out_b))
}

/// Reduced form of P_e valid on its range, using Ampère's law ∇×B = J.
/// Fails when the input is not already P_e-polarized.
pub fn apply_pe_simplified(grid: &Grid, params: &PlasmaParams, state: &State) -> Result<State> {
    check_grid(grid, state)?;
    let full = apply_pe_global(grid, params, state)?;
    let residual = full.sub(state)?.norm();
    if residual > 1e-10 * state.norm().max(1e-300) {
        return Err(Error::Precondition { what: "input is not in the range of P_e".into(), residual });
    }
    let d = params.derived();
    let (me, mi, nb, b) = (params.m_e, params.m_i, params.n_bar, d.b_bar);
    let weighted = vcombine(&[(me.sqrt(), &state.vector(U_E)), (mi.sqrt(), &state.vector(U_I))]);
    let ls = grid.leray(&weighted)?;
    let curl_b = grid.curl(state.b())?;
    let out_ue = vcombine(&[(me.sqrt() / (me + mi), &ls), (-(nb / me).sqrt() * b, &curl_b)]);
    let out_ui = vcombine(&[(mi.sqrt() / (me + mi), &ls), ((nb / mi).sqrt() * b, &curl_b)]);
    let out_b = grid.leray(state.b())?;
    let n = grid.n();
    Ok(State::from_parts(
        Basis::Symmetrized,
        [state.comps[RHO_E].clone(), state.comps[RHO_I].clone()],
        out_ue,
        out_ui,
        vzeros(n),
        out_b,
    ))
}

/// Cached eigendecompositions of L_k for the dealiased band of a grid.
pub struct ModeCache {
    grid: Grid,
    params: PlasmaParams,
    eigen: Vec<Option<Eigen>>,
    omega_max: f64,
}

impl ModeCache {
    pub fn new(grid: &Grid, params: &PlasmaParams) -> ModeCache {
        let eigen: Vec<Option<Eigen>> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                if grid.is_nyquist(idx) || !grid.in_band(idx) {
                    None
                } else {
                    Some(Eigen::of(&build_mode_matrices(grid.kvec(idx), params).l))
                }
            })
            .collect();
        let omega_max = eigen
            .iter()
            .flatten()
            .flat_map(|e| e.values.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        ModeCache { grid: grid.clone(), params: *params, eigen, omega_max }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PlasmaParams {
        &self.params
    }

    /// Largest |eigenvalue| of L_k over the cached band.
    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    /// Applies `f` with the eigendecomposition of mode `idx`; modes outside the
    /// cached band are decomposed on demand unless the input vanishes there.
    fn apply_eigen(&self, idx: usize, v: &V14, f: impl FnOnce(&Eigen, &V14) -> V14) -> V14 {
        match &self.eigen[idx] {
            Some(e) => f(e, v),
            None if v.iter().all(|c| *c == C64::new(0.0, 0.0)) => V14::zeros(),
            None => f(&Eigen::of(&build_mode_matrices(self.grid.kvec(idx), &self.params).l), v),
        }
    }

    /// S(τ)𝒰 = e^{τ𝓛}𝒰, mode by mode.
    pub fn group_exp(&self, tau: f64, state: &State) -> Result<State> {
        check_grid(&self.grid, state)?;
        if tau == 0.0 {
            return Ok(apply_modewise(&self.grid, state, |_, v| *v));
        }
        Ok(apply_modewise(&self.grid, state, |idx, v| self.apply_eigen(idx, v, |e, v| e.apply(tau, v))))
    }

    /// (1/T) ∫₀ᵀ S(sτ)𝒰 dτ in closed form.
    pub fn finite_mean(&self, sign: f64, t_avg: f64, state: &State) -> Result<State> {
        check_grid(&self.grid, state)?;
        Ok(apply_modewise(&self.grid, state, |idx, v| {
            self.apply_eigen(idx, v, |e, v| e.finite_mean(sign, t_avg, v))
        }))
    }

    /// The τ-mean of S(τ)𝒰, which is exactly P𝒰.
    pub fn mean_value_exact(&self, state: &State) -> Result<State> {
        apply_p(&self.grid, &self.params, state)
    }

    /// Trapezoidal (1/T) ∫₀ᵀ S(τ)𝒰 dτ with `nodes` equispaced nodes.
    pub fn mean_value_quadrature(&self, state: &State, t_avg: f64, nodes: usize) -> Result<State> {
        trapezoid_mean(t_avg, nodes, state, |tau| self.group_exp(tau, state))
    }
}

/// Trapezoidal mean (1/T) ∫₀ᵀ f(τ) dτ over `nodes` equispaced nodes.
pub fn trapezoid_mean(
    t_avg: f64,
    nodes: usize,
    like: &State,
    f: impl Fn(f64) -> Result<State> + Sync,
) -> Result<State> {
    if nodes < 2 || !(t_avg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs T > 0 and at least 2 nodes (T = {t_avg}, nodes = {nodes})"
        )));
    }
    let h = t_avg / (nodes - 1) as f64;
    let weight = |j: usize| if j == 0 || j == nodes - 1 { 0.5 } else { 1.0 };
    // nodes are evaluated in parallel chunks and summed in a fixed order, so the
    // result does not depend on the thread count and memory stays bounded
    let chunk = 4 * rayon::current_num_threads();
    let mut acc = State::zeros(like.n(), like.basis);
    for start in (0..nodes).step_by(chunk) {
        let parts: Vec<Result<State>> =
            (start..(start + chunk).min(nodes)).into_par_iter().map(|j| f(j as f64 * h)).collect();
        for (j, p) in (start..).zip(parts) {
            acc.axpy(weight(j) * h / t_avg, &p?)?;
        }
    }
    Ok(acc)
}

/// Brute-force references used to check the closed-form algebra.
pub mod oracle {
    use super::*;

    /// Orthogonal projector onto the nullspace of `m` via SVD, with the rank
    /// cutoff 1e−10 relative to the largest singular value. Returns the
    /// projector and the nullity.
    pub fn nullspace_projector(m: &DMatrix<C64>) -> (M14, usize) {
        assert_eq!(m.ncols(), NCOMP);
        // pad to square so that all right singular vectors are returned
        let rows = m.nrows().max(NCOMP);
        let mut a = DMatrix::<C64>::zeros(rows, NCOMP);
        a.view_mut((0, 0), (m.nrows(), NCOMP)).copy_from(m);
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors");
        let smax = svd.singular_values.iter().fold(0.0f64, |s, x| s.max(*x));
        let mut p = M14::zeros();
        let mut nullity = 0;
        for (j, s) in svd.singular_values.iter().enumerate() {
            if *s <= 1e-10 * smax.max(1e-300) {
                nullity += 1;
                let row = v_t.row(j);
                for r in 0..NCOMP {
                    for c in 0..NCOMP {
                        p[(r, c)] += row[r].conj() * row[c];
                    }
                }
            }
        }
        (p, nullity)
    }

    /// Oracle projectors (onto Ker[L_k; G_k], onto Ker L_k) and the two nullities.
    pub fn projectors(m: &ModeMatrices) -> (M14, M14, usize, usize) {
        let mut stacked = DMatrix::<C64>::zeros(16, NCOMP);
        stacked.view_mut((0, 0), (14, 14)).copy_from(&m.l);
        stacked.view_mut((14, 0), (2, 14)).copy_from(&m.g);
        let (pe, dim_h) = nullspace_projector(&stacked);
        let l = DMatrix::<C64>::from_iterator(14, 14, m.l.iter().cloned());
        let (p, dim_ker) = nullspace_projector(&l);
        (pe, p, dim_ker, dim_h)
    }

    /// Spectral norm of a 14×14 matrix.
    pub fn op_norm(m: &M14) -> f64 {
        let d = DMatrix::<C64>::from_iterator(14, 14, m.iter().cloned());
        d.singular_values().iter().fold(0.0, |s, x| s.max(*x))
    }
}

/// Residuals of the closed-form algebra of one mode.
#[derive(Clone, Debug, Default)]
pub struct ModeResiduals {
    pub dim_kernel: usize,
    pub dim_h: usize,
    pub orthonormality: f64,
    pub annihilation: f64,
    pub oracle_pe: f64,
    pub oracle_p: f64,
    pub projector_axioms: f64,
    pub skew: f64,
    pub group: f64,
}

/// Checks one mode: dimensions, orthonormality, annihilation by L_k (and G_k on
/// H_k), projector axioms, distance to the SVD oracle, unitarity and group law.
pub fn check_mode(k: [f64; 3], params: &PlasmaParams, fault: Option<BasisFault>) -> ModeResiduals {
    let m = build_mode_matrices(k, params);
    let basis = kernel_bases_with(&m, params, fault);
    let pe = projector_pe_k(&basis);
    let p = projector_p_k(&basis);
    let (ope, op, dim_kernel, dim_h) = oracle::projectors(&m);

    let kb = &basis.kernel_basis;
    let mut ortho = 0.0f64;
    for (a, wa) in kb.iter().enumerate() {
        for (b, wb) in kb.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            ortho = ortho.max((wa.dotc(wb) - re(target)).norm());
        }
    }
    let mut ann = 0.0f64;
    for w in kb {
        ann = ann.max((m.l * w).norm());
    }
    for w in &basis.h_basis {
        ann = ann.max((m.g * w).norm());
    }
    let axioms = [
        (pe * pe - pe).norm(),
        (pe - pe.adjoint()).norm(),
        (p * p - p).norm(),
        (p - p.adjoint()).norm(),
        (p * pe - pe).norm(),
        (pe * p - pe).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let tau = 0.7;
    let s = basis.eigen.exp(tau);
    let s_back = basis.eigen.exp(-tau);
    let group = [
        (s.adjoint() * s - M14::identity()).norm(),
        (s * s_back - M14::identity()).norm(),
        (s * p - p).norm(),
        (s * pe - pe * s).norm(),
        (basis.eigen.exp(0.3) * basis.eigen.exp(0.4) - s).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    ModeResiduals {
        dim_kernel,
        dim_h,
        orthonormality: ortho,
        annihilation: ann,
        oracle_pe: oracle::op_norm(&(pe - ope)),
        oracle_p: oracle::op_norm(&(p - op)),
        projector_axioms: axioms,
        skew: (m.l + m.l.adjoint()).norm(),
        group,
    }
}

/// All integer wavenumbers with |k|∞ ≤ kmax.
pub fn lattice(kmax: i32) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            for c in -kmax..=kmax {
                out.push([a as f64, b as f64, c as f64]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mode_matrix_is_coupling_only() {
        let p = PlasmaParams::default();
        let m = build_mode_matrices([0.0; 3], &p);
        for r in 0..NCOMP {
            for c in 0..NCOMP {
                let coupling = (U_E..EF + 3).contains(&r) && (U_E..EF + 3).contains(&c);
                if !coupling {
                    assert_eq!(m.l[(r, c)], C64::new(0.0, 0.0));
                }
                assert_eq!(m.l[(r, c)].im, 0.0);
            }
        }
    }

    #[test]
    fn zero_mode_neutral_direction() {
        let p = PlasmaParams { pressure_e: crate::PressureLaw { k: 0.5, gamma: 2.0 }, ..Default::default() };
        let d = p.derived();
        let (h, extra) = explicit_vectors([0.0; 3], &p, None);
        assert_eq!(h.len(), 7);
        assert_eq!(extra.len(), 1);
        let ratio = h[0][RHO_E].re / h[0][RHO_I].re;
        assert!((ratio - (d.dp_e / d.dp_i).sqrt()).abs() < 1e-14);
        let pe = outer_sum(&h);
        let r = (d.dp_e / d.dp_i).sqrt();
        assert!((pe[(0, 0)].re - d.c_bar * r).abs() < 1e-14);
        assert!((pe[(0, 1)].re - d.c_bar).abs() < 1e-14);
        assert!((pe[(1, 1)].re - d.c_bar / r).abs() < 1e-14);
    }

    #[test]
    fn frame_is_right_handed() {
        for k in [[1.0, 2.0, 3.0], [0.0, 0.0, -2.0], [1e-9, 0.0, 1.0], [3.0, -1.0, 0.0]] {
            let [a, b, c] = frame(k).unwrap();
            let x = cross(a, b);
            for j in 0..3 {
                assert!((x[j] - c[j]).abs() < 1e-14);
            }
            assert!((norm3(b) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_mode_residuals_small() {
        let p = PlasmaParams::default();
        for k in [[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.0, 0.0, 1.0], [-4.0, 1.0, 0.0]] {
            let r = check_mode(k, &p, None);
            let zero = k == [0.0; 3];
            assert_eq!((r.dim_kernel, r.dim_h), if zero { (8, 7) } else { (6, 4) });
            assert!(r.orthonormality < 1e-12);
            assert!(r.annihilation < 1e-12);
            assert!(r.oracle_pe < 1e-10 && r.oracle_p < 1e-10, "{r:?}");
            assert!(r.group < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn fault_breaks_annihilation_only() {
        let p = PlasmaParams::default();
        let r = check_mode([1.0, 2.0, 3.0], &p, Some(BasisFault::FlipW3Magnetic));
        assert!(r.orthonormality < 1e-12);
        assert!(r.annihilation > 1e-3);
    }
}
