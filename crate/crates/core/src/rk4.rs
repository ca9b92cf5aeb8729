//! Classical fourth-order Runge–Kutta step for the spectral state types.

use crate::{Error, Result};

/// Linear-space operations needed by [`step`].
pub trait Axpy: Clone {
    /// self += a * other
    fn axpy(&mut self, a: f64, other: &Self) -> Result<()>;
    fn all_finite(&self) -> bool;
}

impl Axpy for crate::plasma::State {
    fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        crate::plasma::State::axpy(self, a, other)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

/// Advances y' = f(t, y) by one step of size dt.
pub fn step<S: Axpy>(t: f64, dt: f64, y: &S, mut f: impl FnMut(f64, &S) -> Result<S>) -> Result<S> {
    let k1 = f(t, y)?;
    let mut y2 = y.clone();
    y2.axpy(0.5 * dt, &k1)?;
    let k2 = f(t + 0.5 * dt, &y2)?;
    let mut y3 = y.clone();
    y3.axpy(0.5 * dt, &k2)?;
    let k3 = f(t + 0.5 * dt, &y3)?;
    let mut y4 = y.clone();
    y4.axpy(dt, &k3)?;
    let k4 = f(t + dt, &y4)?;
    let mut out = y.clone();
    out.axpy(dt / 6.0, &k1)?;
    out.axpy(dt / 3.0, &k2)?;
    out.axpy(dt / 3.0, &k3)?;
    out.axpy(dt / 6.0, &k4)?;
    Ok(out)
}

/// Integrates from t = 0 to `t_end`, calling `observe` at the `intervals + 1`
/// equispaced sample times. Each interval is split into the fewest equal steps
/// not exceeding `dt_max`; when a step fails (non-finite state, vacuum, or an
/// error from `f`) the interval is retried with half the step, up to three times.
/// `post` is applied after every accepted step.
pub fn integrate_sampled<S: Axpy>(
    y0: &S,
    t_end: f64,
    intervals: usize,
    dt_max: f64,
    mut f: impl FnMut(f64, &S) -> Result<S>,
    mut post: impl FnMut(&mut S),
    mut observe: impl FnMut(f64, &S) -> Result<()>,
) -> Result<S> {
    if !(t_end >= 0.0) || !(dt_max > 0.0) || intervals == 0 {
        return Err(Error::InvalidParameter(format!(
            "integration needs T >= 0, dt > 0 and at least one interval (T = {t_end}, dt = {dt_max})"
        )));
    }
    observe(0.0, y0)?;
    if t_end == 0.0 {
        return Ok(y0.clone());
    }
    let h = t_end / intervals as f64;
    let base_steps = (h / dt_max).ceil().max(1.0) as usize;
    let mut y = y0.clone();
    for j in 0..intervals {
        let t0 = j as f64 * h;
        let mut steps = base_steps;
        let mut attempt = 0;
        let next = loop {
            match advance(&y, t0, h, steps, &mut f, &mut post) {
                Ok(z) => break z,
                Err(_) if attempt < 3 => {
                    attempt += 1;
                    steps *= 2;
                }
                Err(e) => return Err(e),
            }
        };
        y = next;
        observe(t0 + h, &y)?;
    }
    Ok(y)
}

fn advance<S: Axpy>(
    y0: &S,
    t0: f64,
    h: f64,
    steps: usize,
    f: &mut impl FnMut(f64, &S) -> Result<S>,
    post: &mut impl FnMut(&mut S),
) -> Result<S> {
    let dt = h / steps as f64;
    let mut y = y0.clone();
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        y = step(t, dt, &y, &mut *f)?;
        if !y.all_finite() {
            return Err(Error::Instability { t: t + dt, reason: "non-finite state".into() });
        }
        post(&mut y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Scalar(f64);
    impl Axpy for Scalar {
        fn axpy(&mut self, a: f64, o: &Self) -> Result<()> {
            self.0 += a * o.0;
            Ok(())
        }
        fn all_finite(&self) -> bool {
            self.0.is_finite()
        }
    }

    #[test]
    fn fourth_order_on_exponential() {
        let err = |dt: f64| {
            let mut y = Scalar(1.0);
            let steps = (1.0 / dt).round() as usize;
            for s in 0..steps {
                y = step(s as f64 * dt, dt, &y, |t, y| Ok(Scalar(y.0 * t.cos()))).unwrap();
            }
            (y.0 - 1f64.sin().exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
    }
}
