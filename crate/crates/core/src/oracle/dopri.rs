//! Adaptive Dormand-Prince 5(4) integrator for complex vector ODEs.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-13, max_steps: 1_000_000 }
    }
}

/// Stateful integrator for `dy/dt = f(t, y)`.
pub struct Dopri5<F>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    f: F,
    tol: Tolerances,
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
    pub h: f64,
    pub steps: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    pub fn new(f: F, dim: usize, h0: f64, tol: Tolerances) -> Self {
        Dopri5 {
            f,
            tol,
            k: vec![vec![Complex64::new(0.0, 0.0); dim]; 7],
            tmp: vec![Complex64::new(0.0, 0.0); dim],
            y_new: vec![Complex64::new(0.0, 0.0); dim],
            h: h0,
            steps: 0,
        }
    }

    /// Single explicit step of size `h` from `(t, y)`; returns the error norm and
    /// leaves the result in the internal buffer.
    fn trial(&mut self, t: f64, y: &[Complex64], h: f64) -> f64 {
        let n = y.len();
        (self.f)(t, y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += self.k[j][i] * *a;
                    }
                }
                self.tmp[i] = y[i] + acc * h;
            }
            (self.f)(t + C[s] * h, &self.tmp, &mut self.k[s]);
        }
        // stage 7 evaluates at the fifth-order solution
        self.y_new.copy_from_slice(&self.tmp);
        let mut sum = 0.0;
        for i in 0..n {
            let mut e = Complex64::new(0.0, 0.0);
            for (j, ej) in E.iter().enumerate() {
                if *ej != 0.0 {
                    e += self.k[j][i] * *ej;
                }
            }
            let scale = self.tol.atol + self.tol.rtol * y[i].norm().max(self.y_new[i].norm());
            let r = (e * h).norm() / scale;
            sum += r * r;
        }
        (sum / n.max(1) as f64).sqrt()
    }

    /// Advances `y` from `t` by one accepted adaptive step, at most to `t_end`.
    /// Returns the new time.
    pub fn step(&mut self, t: f64, y: &mut [Complex64], t_end: f64) -> Result<f64> {
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(Error::Accuracy(format!("integrator exceeded {} steps", self.tol.max_steps)));
            }
            self.steps += 1;
            let h = self.h.min(t_end - t);
            if !(h > 0.0) {
                return Ok(t);
            }
            let err = self.trial(t, y, h);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                y.copy_from_slice(&self.y_new);
                self.h = h * fac;
                return Ok(t + h);
            }
            self.h = h * fac.min(1.0);
            if self.h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Accuracy(format!("step size underflow at t = {t}")));
            }
        }
    }

    /// One non-adaptive step of size `h`, for locating events inside an
    /// accepted step.
    pub fn fixed_step(&mut self, t: f64, y: &[Complex64], h: f64, out: &mut [Complex64]) {
        self.trial(t, y, h);
        out.copy_from_slice(&self.y_new);
    }

    /// Integrates to `t_end` (or until `stop` returns true after a step).
    pub fn integrate<S>(&mut self, t0: f64, y: &mut [Complex64], t_end: f64, mut stop: S) -> Result<f64>
    where
        S: FnMut(f64, &[Complex64]) -> bool,
    {
        let mut t = t0;
        while t < t_end {
            t = self.step(t, y, t_end)?;
            if stop(t, y) {
                break;
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let lam = Complex64::new(-0.7, 2.3);
        let mut ig = Dopri5::new(|_, y: &[Complex64], d: &mut [Complex64]| d[0] = lam * y[0], 1, 0.01, Tolerances::default());
        let mut y = vec![Complex64::new(1.0, 0.5)];
        let t = ig.integrate(0.0, &mut y, 3.0, |_, _| false).unwrap();
        assert_eq!(t, 3.0);
        let want = Complex64::new(1.0, 0.5) * (lam * 3.0).exp();
        assert!((y[0] - want).norm() < 1e-9);
    }
}
