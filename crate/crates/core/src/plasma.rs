//! Physical parameters, γ-law pressure closures, the density change of
//! variables q = g(n) and the 14-component state.

use serde::{Deserialize, Serialize};

use crate::spectral::{Field, Grid, Vector};
use crate::{Error, Result};

/// Densities below `VACUUM_FLOOR · n̄` are rejected.
pub const VACUUM_FLOOR: f64 = 1e-6;

/// Barotropic pressure p(n) = K n^γ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureLaw {
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
}

impl PressureLaw {
    pub fn new(k: f64, gamma: f64) -> Result<Self> {
        let law = PressureLaw { k, gamma };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("pressure coefficient K must be positive, got {}", self.k)));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("pressure exponent must be >= 1, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn pressure(&self, n: f64) -> f64 {
        self.k * n.powf(self.gamma)
    }

    pub fn dpressure(&self, n: f64) -> f64 {
        self.k * self.gamma * n.powf(self.gamma - 1.0)
    }
}

/// Which function the difference quotient 𝓡(h)(ε, q) = (h(εq) − h(0))/ε acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Remainder {
    /// h = a, the sound-speed ratio.
    SoundSpeed,
    /// h = g⁻¹, the inverse density map.
    DensityInverse,
}

/// Density closure of one species: the map q = g(n) with g(n̄) = 0 and
/// g'(n) = √(p'(n)/m)/n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Closure {
    pub law: PressureLaw,
    pub mass: f64,
    pub n_bar: f64,
}

impl Closure {
    fn isothermal(&self) -> bool {
        (self.law.gamma - 1.0).abs() < 1e-14
    }

    fn beta(&self) -> f64 {
        (self.law.gamma - 1.0) / 2.0
    }

    /// √(Kγ/m)
    fn kappa(&self) -> f64 {
        (self.law.k * self.law.gamma / self.mass).sqrt()
    }

    fn guard(&self, n: f64) -> Result<f64> {
        let floor = VACUUM_FLOOR * self.n_bar;
        if n.is_nan() || n <= floor {
            Err(Error::Vacuum { density: n, floor })
        } else {
            Ok(n)
        }
    }

    /// a̅ = √(p'(n̄)/m)
    pub fn a_bar(&self) -> f64 {
        (self.law.dpressure(self.n_bar) / self.mass).sqrt()
    }

    pub fn g(&self, n: f64) -> Result<f64> {
        self.guard(n)?;
        if self.isothermal() {
            Ok(self.kappa() * (n / self.n_bar).ln())
        } else {
            let b = self.beta();
            Ok(self.kappa() / b * (n.powf(b) - self.n_bar.powf(b)))
        }
    }

    pub fn g_inv(&self, q: f64) -> Result<f64> {
        let n = if self.isothermal() {
            self.n_bar * (q / self.kappa()).exp()
        } else {
            let b = self.beta();
            let base = self.n_bar.powf(b) + b * q / self.kappa();
            if base <= 0.0 {
                return Err(Error::Vacuum { density: 0.0, floor: VACUUM_FLOOR * self.n_bar });
            }
            base.powf(1.0 / b)
        };
        self.guard(n)
    }

    /// a(q) = √(p'(g⁻¹(q))/m) = a̅ + ((γ−1)/2) q for the γ-law.
    pub fn a(&self, q: f64) -> f64 {
        self.a_bar() + self.beta() * q
    }

    /// (g⁻¹)'(0) = n̄/a̅
    pub fn g_inv_slope(&self) -> f64 {
        self.n_bar / self.a_bar()
    }

    /// 𝓡(h)(ε, q); ε = 0 gives h'(0) q. Evaluated in closed form so that the
    /// quotient stays accurate as ε → 0.
    pub fn remainder(&self, h: Remainder, eps: f64, q: f64) -> Result<f64> {
        if eps < 0.0 {
            return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {eps}")));
        }
        match h {
            Remainder::SoundSpeed => Ok(self.beta() * q),
            Remainder::DensityInverse => {
                if eps == 0.0 {
                    return Ok(self.g_inv_slope() * q);
                }
                let floor = VACUUM_FLOOR * self.n_bar;
                let rel = if self.isothermal() {
                    (eps * q / self.kappa()).exp_m1()
                } else {
                    let b = self.beta();
                    let x = eps * b * q / (self.kappa() * self.n_bar.powf(b));
                    if x <= -1.0 {
                        return Err(Error::Vacuum { density: 0.0, floor });
                    }
                    if b == 1.0 {
                        x
                    } else {
                        (x.ln_1p() / b).exp_m1()
                    }
                };
                self.guard(self.n_bar * (1.0 + rel))?;
                Ok(self.n_bar * rel / eps)
            }
        }
    }
}

fn default_mass_e() -> f64 {
    0.25
}
fn default_mass_i() -> f64 {
    1.0
}
fn default_n_bar() -> f64 {
    1.0
}
fn default_law() -> PressureLaw {
    PressureLaw { k: 0.25, gamma: 3.0 }
}

/// Masses, background density and pressure laws (charge number fixed to 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasmaParams {
    #[serde(default = "default_mass_e")]
    pub m_e: f64,
    #[serde(default = "default_mass_i")]
    pub m_i: f64,
    #[serde(default = "default_n_bar")]
    pub n_bar: f64,
    #[serde(default = "default_law")]
    pub pressure_e: PressureLaw,
    #[serde(default = "default_law")]
    pub pressure_i: PressureLaw,
}

impl Default for PlasmaParams {
    fn default() -> Self {
        PlasmaParams {
            m_e: default_mass_e(),
            m_i: default_mass_i(),
            n_bar: default_n_bar(),
            pressure_e: default_law(),
            pressure_i: default_law(),
        }
    }
}

/// Coefficients derived from [`PlasmaParams`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub delta: f64,
    pub rho_bar: f64,
    pub d_e: f64,
    pub d_i: f64,
    pub b_bar: f64,
    pub c_bar: f64,
    pub a_bar_e: f64,
    pub a_bar_i: f64,
    /// p'_e(n̄), p'_i(n̄)
    pub dp_e: f64,
    pub dp_i: f64,
}

impl PlasmaParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [("m_e", self.m_e), ("m_i", self.m_i), ("n_bar", self.n_bar)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, law) in [("pressure_e", self.pressure_e), ("pressure_i", self.pressure_i)] {
            if let Err(e) = law.validate() {
                problems.push(format!("{name}: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn electron(&self) -> Closure {
        Closure { law: self.pressure_e, mass: self.m_e, n_bar: self.n_bar }
    }

    pub fn ion(&self) -> Closure {
        Closure { law: self.pressure_i, mass: self.m_i, n_bar: self.n_bar }
    }

    pub fn derived(&self) -> Derived {
        let (me, mi, n) = (self.m_e, self.m_i, self.n_bar);
        let delta = me / mi;
        let rho_bar = n * (me + mi);
        let d_e = delta.sqrt() * mi;
        let d_i = (1.0 - delta) * mi;
        let b_bar = 1.0 / (n / me + n / mi);
        let dp_e = self.pressure_e.dpressure(n);
        let dp_i = self.pressure_i.dpressure(n);
        let r = (dp_e / dp_i).sqrt();
        let c_bar = 1.0 / (r + 1.0 / r);
        let check = d_e * d_e / rho_bar;
        assert!(
            ((b_bar - check) / b_bar).abs() <= 1e-14,
            "b = d_e²/ρ identity failed: {b_bar} vs {check}"
        );
        Derived {
            delta,
            rho_bar,
            d_e,
            d_i,
            b_bar,
            c_bar,
            a_bar_e: (dp_e / me).sqrt(),
            a_bar_i: (dp_i / mi).sqrt(),
            dp_e,
            dp_i,
        }
    }

    /// Density entry ϱ_s of the symmetrized state for a linearized density
    /// perturbation n_s, namely √(p'_s(n̄)/n̄)·n_s.
    pub fn rho_of_density(&self, n_e: f64, n_i: f64) -> [f64; 2] {
        let d = self.derived();
        [(d.dp_e / self.n_bar).sqrt() * n_e, (d.dp_i / self.n_bar).sqrt() * n_i]
    }

    /// √(n̄ m_e), √(n̄ m_i): the symmetrizer weights on densities and velocities.
    pub fn sym_weights(&self) -> [f64; 2] {
        [(self.n_bar * self.m_e).sqrt(), (self.n_bar * self.m_i).sqrt()]
    }
}

/// Which variables a [`State`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// (q_e, q_i, v_e, v_i, E, B)
    Original,
    /// (ϱ_e, ϱ_i, u_e, u_i, E, B) = A₀^{1/2}(q_e, q_i, v_e, v_i, E, B)
    Symmetrized,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::Original => "original",
            Basis::Symmetrized => "symmetrized",
        }
    }

    pub fn component_names(self) -> [&'static str; 14] {
        match self {
            Basis::Original => [
                "q_e", "q_i", "v_e1", "v_e2", "v_e3", "v_i1", "v_i2", "v_i3", "E1", "E2", "E3", "B1",
                "B2", "B3",
            ],
            Basis::Symmetrized => [
                "rho_e", "rho_i", "u_e1", "u_e2", "u_e3", "u_i1", "u_i2", "u_i3", "E1", "E2", "E3",
                "B1", "B2", "B3",
            ],
        }
    }
}

pub const RHO_E: usize = 0;
pub const RHO_I: usize = 1;
pub const U_E: usize = 2;
pub const U_I: usize = 5;
pub const EF: usize = 8;
pub const BF: usize = 11;
pub const NCOMP: usize = 14;

/// The 14-component two-fluid state, stored spectrally.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub basis: Basis,
    pub comps: Vec<Field>,
}

impl State {
    pub fn zeros(n: usize, basis: Basis) -> Self {
        State { basis, comps: (0..NCOMP).map(|_| Field::zeros(n)).collect() }
    }

    pub fn from_parts(basis: Basis, rho: [Field; 2], u_e: Vector, u_i: Vector, e: Vector, b: Vector) -> Self {
        let [r0, r1] = rho;
        let mut comps = vec![r0, r1];
        comps.extend(u_e);
        comps.extend(u_i);
        comps.extend(e);
        comps.extend(b);
        State { basis, comps }
    }

    pub fn n(&self) -> usize {
        self.comps[0].n()
    }

    pub fn expect(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::BasisMismatch { expected: basis.name(), found: self.basis.name() });
        }
        Ok(())
    }

    pub fn block(&self, start: usize) -> &[Field] {
        &self.comps[start..start + 3]
    }

    pub fn block_mut(&mut self, start: usize) -> &mut [Field] {
        &mut self.comps[start..start + 3]
    }

    pub fn vector(&self, start: usize) -> Vector {
        [self.comps[start].clone(), self.comps[start + 1].clone(), self.comps[start + 2].clone()]
    }

    pub fn set_vector(&mut self, start: usize, v: Vector) {
        for (j, f) in v.into_iter().enumerate() {
            self.comps[start + j] = f;
        }
    }

    pub fn u_e(&self) -> &[Field] {
        self.block(U_E)
    }
    pub fn u_i(&self) -> &[Field] {
        self.block(U_I)
    }
    pub fn e(&self) -> &[Field] {
        self.block(EF)
    }
    pub fn b(&self) -> &[Field] {
        self.block(BF)
    }

    /// self += a * other; bases must agree.
    pub fn axpy(&mut self, a: f64, other: &State) -> Result<()> {
        other.expect(self.basis)?;
        self.comps.iter_mut().zip(&other.comps).for_each(|(s, o)| s.axpy(a, o));
        Ok(())
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> State {
        State { basis: self.basis, comps: self.comps.iter().map(|f| f.scale(a)).collect() }
    }

    /// Coefficient L² norm over all components.
    pub fn norm(&self) -> f64 {
        crate::spectral::vnorm(&self.comps)
    }

    pub fn hsigma_norm(&self, grid: &Grid, sigma: f64) -> f64 {
        grid.hsigma_norm(&self.comps, sigma)
    }

    pub fn dealias(&self, grid: &Grid) -> State {
        State { basis: self.basis, comps: self.comps.iter().map(|f| grid.dealias(f)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|f| f.coef.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    /// Diagonal scaling weights taking original variables to symmetrized ones.
    fn weights(params: &PlasmaParams) -> [f64; NCOMP] {
        let [we, wi] = params.sym_weights();
        let mut w = [1.0; NCOMP];
        w[RHO_E] = we;
        w[RHO_I] = wi;
        w[U_E..U_E + 3].fill(we);
        w[U_I..U_I + 3].fill(wi);
        w
    }

    /// 𝒰 = A₀^{1/2} U
    pub fn symmetrize(&self, params: &PlasmaParams) -> Result<State> {
        self.expect(Basis::Original)?;
        let w = Self::weights(params);
        let comps = self.comps.iter().zip(w).map(|(f, a)| f.scale(a)).collect();
        Ok(State { basis: Basis::Symmetrized, comps })
    }

    /// U = A₀^{-1/2} 𝒰
    pub fn desymmetrize(&self, params: &PlasmaParams) -> Result<State> {
        self.expect(Basis::Symmetrized)?;
        let w = Self::weights(params);
        let comps = self.comps.iter().zip(w).map(|(f, a)| f.scale(1.0 / a)).collect();
        Ok(State { basis: Basis::Original, comps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law2() -> Closure {
        Closure { law: PressureLaw { k: 1.0, gamma: 2.0 }, mass: 1.0, n_bar: 1.0 }
    }

    /// ∫_{n̄}^{n} √(p'(s)/m)/s ds by composite Simpson.
    fn g_by_quadrature(c: &Closure, n: f64) -> f64 {
        let m = 2000;
        let h = (n - c.n_bar) / m as f64;
        let f = |s: f64| (c.law.dpressure(s) / c.mass).sqrt() / s;
        let mut acc = f(c.n_bar) + f(n);
        for j in 1..m {
            let s = c.n_bar + j as f64 * h;
            acc += if j % 2 == 1 { 4.0 * f(s) } else { 2.0 * f(s) };
        }
        acc * h / 3.0
    }

    #[test]
    fn gamma_two_closed_form() {
        let c = law2();
        let g4 = c.g(4.0).unwrap();
        assert!((g4 - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!((g4 - g_by_quadrature(&c, 4.0)).abs() < 1e-10);
        assert!((c.g_inv(2.0 * 2f64.sqrt()).unwrap() - 4.0).abs() < 1e-13);
        assert_eq!(c.g(1.0).unwrap(), 0.0);
        assert!((c.a(0.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn closures_match_quadrature_for_several_exponents() {
        for gamma in [1.0, 1.4, 5.0 / 3.0, 3.0] {
            let c = Closure { law: PressureLaw { k: 0.7, gamma }, mass: 0.3, n_bar: 1.3 };
            for n in [0.7, 1.0, 2.1] {
                let g = c.g(n).unwrap();
                assert!((g - g_by_quadrature(&c, n)).abs() < 1e-9, "gamma {gamma} n {n}");
                assert!((c.g_inv(g).unwrap() - n).abs() < 1e-12 * n);
                // a(q) is √(p'(n)/m) at n = g⁻¹(q)
                let a_direct = (c.law.dpressure(n) / c.mass).sqrt();
                assert!((c.a(g) - a_direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isothermal_sound_speed_constant() {
        let c = Closure { law: PressureLaw { k: 2.0, gamma: 1.0 }, mass: 0.5, n_bar: 1.0 };
        for q in [-3.0, 0.0, 7.5] {
            assert_eq!(c.a(q), c.a_bar());
        }
    }

    #[test]
    fn remainder_limits() {
        let c = law2();
        for h in [Remainder::SoundSpeed, Remainder::DensityInverse] {
            assert_eq!(c.remainder(h, 0.3, 0.0).unwrap(), 0.0);
        }
        // a is affine with slope (γ−1)/2
        for eps in [0.0, 0.01, 0.5] {
            assert_eq!(c.remainder(Remainder::SoundSpeed, eps, 1.7).unwrap(), 0.85);
        }
        let q = 0.9;
        let r0 = c.remainder(Remainder::DensityInverse, 0.0, q).unwrap();
        assert!((r0 - c.g_inv_slope() * q).abs() < 1e-15);
        // difference quotient against direct evaluation
        for eps in [0.5, 0.1, 0.01] {
            let direct = (c.g_inv(eps * q).unwrap() - c.n_bar) / eps;
            let r = c.remainder(Remainder::DensityInverse, eps, q).unwrap();
            assert!((r - direct).abs() < 1e-12);
            assert!((r - r0).abs() < 2.0 * eps, "O(eps) approach to the derivative");
        }
    }

    #[test]
    fn vacuum_is_rejected() {
        let c = law2();
        assert!(matches!(c.g(0.0), Err(Error::Vacuum { .. })));
        assert!(matches!(c.g_inv(-10.0), Err(Error::Vacuum { .. })));
        assert!(c.remainder(Remainder::DensityInverse, 1.0, -10.0).is_err());
    }

    #[test]
    fn derived_constants() {
        let p = PlasmaParams { m_e: 1.0, m_i: 4.0, n_bar: 1.0, ..Default::default() };
        let d = p.derived();
        assert!((d.b_bar - 0.8).abs() < 1e-15);
        assert!((d.c_bar - 0.5).abs() < 1e-15);
        let q = PlasmaParams { m_e: 2.0, m_i: 2.0, ..Default::default() };
        let dq = q.derived();
        assert_eq!(dq.delta, 1.0);
        assert_eq!(dq.d_i, 0.0);
    }

    #[test]
    fn symmetrize_round_trip() {
        let p = PlasmaParams::default();
        let g = Grid::new(8).unwrap();
        let mut s = State::zeros(8, Basis::Original);
        for (j, f) in s.comps.iter_mut().enumerate() {
            *f = g.forward(&g.sample(|x| (x[0] + j as f64).sin() * (j as f64 + 1.0))).unwrap();
        }
        let back = s.symmetrize(&p).unwrap().desymmetrize(&p).unwrap();
        assert!(back.sub(&s).unwrap().norm() < 1e-14 * s.norm());
        assert!(s.desymmetrize(&p).is_err());

        let mut only_b = State::zeros(8, Basis::Original);
        only_b.comps[BF] = s.comps[BF].clone();
        assert_eq!(only_b.symmetrize(&p).unwrap().comps[BF], only_b.comps[BF]);
    }
}
