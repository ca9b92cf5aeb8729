//! The penalized fast-scale right-hand side ε⁻¹𝓛𝒰 + N(ε, 𝒰), mapped back to
//! physical fields, must satisfy the original two-fluid Euler–Maxwell
//! equations written in conservative physical variables. Band-limited data
//! and a cubic pressure law keep every product and derivative exact on the grid.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofluid::emtf::{self, EmtfSolver};
use twofluid::harness::runs::emtf_initial;
use twofluid::limit::{self, physical_fields, PhysicalFields};
use twofluid::modes::{apply_modewise, build_mode_matrices, ModeCache};
use twofluid::plasma::{Basis, BF, EF};
use twofluid::spectral::C64;
use twofluid::{Grid, PlasmaParams, State};

fn random_fast_state(grid: &Grid, seed: u64, band: i32, amp: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = State::zeros(grid.n(), Basis::Symmetrized);
    for f in s.comps.iter_mut() {
        for idx in 0..grid.len() {
            let k = grid.k_of(idx);
            if k.iter().all(|x| x.abs() <= band) {
                f.coef[idx] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
            }
        }
        *f = grid.real_part(f).unwrap();
    }
    s
}

fn apply_l(grid: &Grid, params: &PlasmaParams, u: &State) -> State {
    apply_modewise(grid, u, |idx, v| build_mode_matrices(grid.kvec(idx), params).l * v)
}

fn deriv(grid: &Grid, s: &[f64], j: usize) -> Vec<f64> {
    let g = grid.grad(&grid.forward(s).unwrap()).unwrap();
    grid.inverse(&g[j]).unwrap()
}

fn fdiff(a: &PhysicalFields, b: &PhysicalFields, h: f64) -> PhysicalFields {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (q - p) / (2.0 * h)).collect::<Vec<f64>>();
    let d3 = |x: &[Vec<f64>; 3], y: &[Vec<f64>; 3]| [d(&x[0], &y[0]), d(&x[1], &y[1]), d(&x[2], &y[2])];
    PhysicalFields {
        n_e: d(&a.n_e, &b.n_e),
        n_i: d(&a.n_i, &b.n_i),
        v_e: d3(&a.v_e, &b.v_e),
        v_i: d3(&a.v_i, &b.v_i),
        e: d3(&a.e, &b.e),
        b: d3(&a.b, &b.b),
    }
}

/// Pointwise residuals (continuity, momentum, Ampère, Faraday) of the
/// physical system in fast time τ = t/ε, each relative to its largest term.
fn physical_residuals(grid: &Grid, p: &PlasmaParams, eps: f64, u: &State) -> [f64; 4] {
    let du = {
        let mut d = apply_l(grid, p, u).scale(1.0 / eps);
        d.axpy(1.0, &emtf::rhs_nonstiff(grid, p, eps, u).unwrap()).unwrap();
        d
    };
    let h = 1e-3;
    let mut plus = u.clone();
    plus.axpy(h, &du).unwrap();
    let mut minus = u.clone();
    minus.axpy(-h, &du).unwrap();
    let f = physical_fields(grid, p, eps, u).unwrap();
    // physical fields are affine in 𝒰 for γ = 3, so the centered difference is exact;
    // ∂_τ = ε ∂_t
    let dt = fdiff(&physical_fields(grid, p, eps, &minus).unwrap(), &physical_fields(grid, p, eps, &plus).unwrap(), h);
    let len = grid.len();
    let mut res = [0.0f64; 4];
    let mut scale = [0.0f64; 4];
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let at = |v: &[Vec<f64>; 3], q: usize| [v[0][q], v[1][q], v[2][q]];
    let curl = |v: &[Vec<f64>; 3]| -> [Vec<f64>; 3] {
        let d = |c: usize, j: usize| deriv(grid, &v[c], j);
        let (d21, d12, d02, d20, d10, d01) = (d(2, 1), d(1, 2), d(0, 2), d(2, 0), d(1, 0), d(0, 1));
        [
            (0..len).map(|q| d21[q] - d12[q]).collect(),
            (0..len).map(|q| d02[q] - d20[q]).collect(),
            (0..len).map(|q| d10[q] - d01[q]).collect(),
        ]
    };
    let curl_b = curl(&f.b);
    let curl_e = curl(&f.e);
    for (n, v, dn, dv, m, law, sign) in [
        (&f.n_e, &f.v_e, &dt.n_e, &dt.v_e, p.m_e, p.pressure_e, -1.0),
        (&f.n_i, &f.v_i, &dt.n_i, &dt.v_i, p.m_i, p.pressure_i, 1.0),
    ]
    {
        // ∂_τ n + ∇·(n v) = 0
        let mut div = vec![0.0; len];
        for j in 0..3 {
            let flux: Vec<f64> = (0..len).map(|q| n[q] * v[j][q]).collect();
            let d = deriv(grid, &flux, j);
            for q in 0..len {
                div[q] += d[q];
            }
        }
        for q in 0..len {
            res[0] = res[0].max((eps * dn[q] + div[q]).abs());
            scale[0] = scale[0].max((eps * dn[q]).abs()).max(div[q].abs());
        }
        // n(∂_τ v + v·∇v) + ∇p/m = ±n(E + v×B)/m
        let pr: Vec<f64> = n.iter().map(|x| law.pressure(*x)).collect();
        let gp: Vec<Vec<f64>> = (0..3).map(|j| deriv(grid, &pr, j)).collect();
        let gv: Vec<Vec<Vec<f64>>> = (0..3).map(|c| (0..3).map(|j| deriv(grid, &v[c], j)).collect()).collect();
        for q in 0..len {
            let vb = cross(at(v, q), at(&f.b, q));
            for c in 0..3 {
                let adv: f64 = (0..3).map(|j| v[j][q] * gv[c][j][q]).sum();
                let lhs = n[q] * (eps * dv[c][q] + adv) + gp[c][q] / m;
                let rhs = sign * n[q] * (f.e[c][q] + vb[c]) / m;
                res[1] = res[1].max((lhs - rhs).abs());
                scale[1] = scale[1].max(lhs.abs()).max(rhs.abs());
            }
        }
    }
    for q in 0..len {
        for c in 0..3 {
            // ∂_τ E − ∇×B = n_e v_e − n_i v_i
            let current = f.n_e[q] * f.v_e[c][q] - f.n_i[q] * f.v_i[c][q];
            let lhs = eps * dt.e[c][q] - curl_b[c][q];
            res[2] = res[2].max((lhs - current).abs());
            scale[2] = scale[2].max(lhs.abs()).max(current.abs());
            // ∂_τ B + ∇×E = 0
            res[3] = res[3].max((eps * dt.b[c][q] + curl_e[c][q]).abs());
            scale[3] = scale[3].max(curl_e[c][q].abs());
        }
    }
    std::array::from_fn(|j| res[j] / scale[j].max(1e-300))
}

#[test]
fn penalized_form_reproduces_the_physical_equations() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    for (seed, eps, amp) in [(1u64, 0.1, 0.3), (2, 0.02, 0.3), (3, 1.0, 0.03)] {
        let u = random_fast_state(&grid, seed, 2, amp);
        let r = physical_residuals(&grid, &p, eps, &u);
        assert!(r.iter().all(|x| *x < 1e-11), "eps {eps}: continuity/momentum/Ampère/Faraday residuals {r:?}");
    }
}

#[test]
fn unequal_pressure_laws_and_masses() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams {
        m_e: 0.1,
        m_i: 1.3,
        n_bar: 1.4,
        pressure_e: twofluid::PressureLaw::new(0.7, 3.0).unwrap(),
        pressure_i: twofluid::PressureLaw::new(0.2, 3.0).unwrap(),
    };
    let u = random_fast_state(&grid, 9, 2, 0.2);
    let r = physical_residuals(&grid, &p, 0.05, &u);
    assert!(r.iter().all(|x| *x < 1e-11), "{r:?}");
}

#[test]
fn gauss_laws_are_preserved_by_the_right_hand_side() {
    // d/dt of both Gauss residuals vanishes along ε⁻¹𝓛𝒰 + N for compliant data
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    let eps = 0.05;
    let prepared = limit::random_prepared(&grid, &p, 4, 1.0, 0.1).unwrap();
    let mut u = emtf_initial(&grid, &p, &prepared, eps).unwrap();
    let extra = random_fast_state(&grid, 5, 2, 0.1);
    // add divergence-free perturbations of B and E
    let bx = grid.leray(&extra.vector(BF)).unwrap();
    let mut b = u.vector(BF);
    for j in 0..3 {
        b[j].axpy(1.0, &bx[j]);
    }
    u.set_vector(BF, b);
    let e = grid.leray(&extra.vector(EF)).unwrap();
    u.set_vector(EF, e);
    let g0 = emtf::gauss_residual(&grid, &p, eps, &u).unwrap();
    assert!(g0.div_b < 1e-14 && g0.charge < 1e-13, "{g0:?}");
    let mut du = apply_l(&grid, &p, &u).scale(1.0 / eps);
    du.axpy(1.0, &emtf::rhs_nonstiff(&grid, &p, eps, &u).unwrap()).unwrap();
    let h = 1e-6;
    let mut v = u.clone();
    v.axpy(h, &du).unwrap();
    let g1 = emtf::gauss_residual(&grid, &p, eps, &v).unwrap();
    assert!(g1.div_b / h < 1e-8 && g1.charge / h < 1e-6, "{g1:?}");
}

#[test]
fn filtered_rhs_is_bounded_uniformly_in_epsilon() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    let cache = Arc::new(ModeCache::new(&grid, &p));
    let u = limit::random_prepared(&grid, &p, 6, 1.0, 0.1).unwrap();
    let mut norms = Vec::new();
    for eps in [0.1, 0.01, 0.001] {
        let solver = EmtfSolver::new(cache.clone(), eps).unwrap();
        let ue = emtf_initial(&grid, &p, &u, eps).unwrap();
        let mut worst = 0.0f64;
        for t in [0.0, 0.013, 0.1] {
            worst = worst.max(solver.filtered_rhs(t, &ue).unwrap().norm());
        }
        norms.push(worst);
    }
    let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
    assert!(hi / lo < 3.0, "{norms:?}");
    // filtering is undone by the group
    let solver = EmtfSolver::new(cache.clone(), 0.01).unwrap();
    let back = solver.physical(0.37, &solver.filtered(0.37, &u).unwrap()).unwrap();
    assert!(back.sub(&u).unwrap().norm() < 1e-13 * u.norm());
}

#[test]
fn emtf_runs_are_deterministic() {
    let grid = Grid::new(8).unwrap();
    let p = PlasmaParams::default();
    let cache = Arc::new(ModeCache::new(&grid, &p));
    let u = limit::random_prepared(&grid, &p, 8, 1.0, 0.1).unwrap();
    let run = || {
        let solver = EmtfSolver::new(cache.clone(), 0.1).unwrap();
        let mut out = Vec::new();
        solver
            .integrate(&u, 0.02, 2, 1e-3, |_, v, _| {
                out.push(v.clone());
                Ok(())
            })
            .unwrap();
        out
    };
    let (a, b) = (run(), run());
    for (x, y) in a.iter().zip(&b) {
        for (f, g) in x.comps.iter().zip(&y.comps) {
            assert!(f.coef.iter().zip(&g.coef).all(|(p, q)| p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits()));
        }
    }
}
