//! Scalar and two-dimensional numeric kernels: Brent root finding, damped
//! Newton with a finite-difference Jacobian, golden-section minimization.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Root or minimizer.
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    /// First coordinate, convenient for the scalar solvers.
    pub fn value(&self) -> f64 {
        self.x[0]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("iteration limit reached (residual {})", .0.residual_norm)]
    MaxIterations(SolveReport),
    #[error("singular jacobian at {x:?}")]
    SingularJacobian { x: Vec<f64> },
    #[error("non-finite function value at {x:?}")]
    NonFinite { x: Vec<f64> },
}

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            max_halvings: 30,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Brent's method on a sign-changing bracket.
pub fn find_root_1d<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<SolveReport, SolverError>
where
    F: FnMut(f64) -> f64,
{
    find_root_1d_with(
        f,
        lo,
        hi,
        RootOptions {
            tol,
            ..RootOptions::default()
        },
    )
}

pub fn find_root_1d_with<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    opts: RootOptions,
) -> Result<SolveReport, SolverError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() {
        let x = if fa.is_finite() { b } else { a };
        return Err(SolverError::NonFinite { x: vec![x] });
    }
    let done = |x: f64, fx: f64| SolveReport {
        x: vec![x],
        residual_norm: fx.abs(),
        iterations: 0,
        converged: true,
    };
    if fa == 0.0 {
        return Ok(done(a, fa));
    }
    if fb == 0.0 {
        return Ok(done(b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(SolverError::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let scale = opts.tol * b.abs().max(1.0);
        let xm = 0.5 * (c - b);
        if fb.abs() <= opts.tol || xm.abs() <= scale || fb == 0.0 {
            return Ok(SolveReport {
                x: vec![b],
                residual_norm: fb.abs(),
                iterations: iter,
                converged: true,
            });
        }
        if e.abs() >= scale && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, secant when only two points
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (scale * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > scale {
            d
        } else {
            scale.copysign(xm)
        };
        fb = f(b);
        if !fb.is_finite() {
            return Err(SolverError::NonFinite { x: vec![b] });
        }
    }
    Err(SolverError::MaxIterations(SolveReport {
        x: vec![b],
        residual_norm: fb.abs(),
        iterations: opts.max_iter,
        converged: false,
    }))
}

/// Grows `[lo, hi]` geometrically until `f` changes sign. Intended for
/// monotone functions of a log-scale variable.
pub fn expand_bracket<F>(mut f: F, mut lo: f64, mut hi: f64, max_steps: usize) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..max_steps {
        if f_lo.is_finite() && f_hi.is_finite() && f_lo.signum() != f_hi.signum() {
            return Some((lo, hi));
        }
        let width = hi - lo;
        if f_lo.abs() < f_hi.abs() {
            lo -= width;
            f_lo = f(lo);
        } else {
            hi += width;
            f_hi = f(hi);
        }
    }
    if f_lo.signum() != f_hi.signum() {
        Some((lo, hi))
    } else {
        None
    }
}

fn inf_norm(v: &[f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Damped Newton for `F: R^2 -> R^2` with a central-difference Jacobian.
pub fn solve_2d<F>(f: F, x_init: [f64; 2], tol: f64) -> Result<SolveReport, SolverError>
where
    F: FnMut([f64; 2]) -> [f64; 2],
{
    solve_2d_with(
        f,
        x_init,
        NewtonOptions {
            tol,
            ..NewtonOptions::default()
        },
    )
}

pub fn solve_2d_with<F>(
    mut f: F,
    x_init: [f64; 2],
    opts: NewtonOptions,
) -> Result<SolveReport, SolverError>
where
    F: FnMut([f64; 2]) -> [f64; 2],
{
    let mut x = x_init;
    let mut fx = f(x);
    if !fx.iter().all(|v| v.is_finite()) {
        return Err(SolverError::NonFinite { x: x.to_vec() });
    }
    let mut norm = inf_norm(&fx);
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter;
        if norm <= opts.tol {
            return Ok(SolveReport {
                x: x.to_vec(),
                residual_norm: norm,
                iterations: iter,
                converged: true,
            });
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let h = opts.fd_step * x[j].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(xp), f(xm));
            for i in 0..2 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jscale = jac.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !det.is_finite() || det.abs() <= 1e-300 || det.abs() <= 1e-14 * jscale * jscale {
            return Err(SolverError::SingularJacobian { x: x.to_vec() });
        }
        let dx = [
            -(jac[1][1] * fx[0] - jac[0][1] * fx[1]) / det,
            -(-jac[1][0] * fx[0] + jac[0][0] * fx[1]) / det,
        ];
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = [x[0] + step * dx[0], x[1] + step * dx[1]];
            let ft = f(trial);
            if ft.iter().all(|v| v.is_finite()) && inf_norm(&ft) < norm {
                x = trial;
                fx = ft;
                norm = inf_norm(&ft);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations = iter + 1;
    }
    let report = SolveReport {
        x: x.to_vec(),
        residual_norm: norm,
        iterations,
        converged: norm <= opts.tol,
    };
    if report.converged {
        Ok(report)
    } else {
        Err(SolverError::MaxIterations(report))
    }
}

/// Golden-section search for a unimodal `g` on `[lo, hi]`; returns the
/// midpoint of the final interval.
pub fn minimize_scalar_convex<G>(
    g: G,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<SolveReport, SolverError>
where
    G: FnMut(f64) -> f64,
{
    minimize_scalar_convex_with(
        g,
        lo,
        hi,
        MinimizeOptions {
            tol,
            ..MinimizeOptions::default()
        },
    )
}

pub fn minimize_scalar_convex_with<G>(
    mut g: G,
    lo: f64,
    hi: f64,
    opts: MinimizeOptions,
) -> Result<SolveReport, SolverError>
where
    G: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    let mut iter = 0;
    while (b - a).abs() > opts.tol {
        if iter >= opts.max_iter {
            let x = 0.5 * (a + b);
            return Err(SolverError::MaxIterations(SolveReport {
                x: vec![x],
                residual_norm: (b - a).abs(),
                iterations: iter,
                converged: false,
            }));
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
        iter += 1;
    }
    Ok(SolveReport {
        x: vec![0.5 * (a + b)],
        residual_norm: (b - a).abs(),
        iterations: iter,
        converged: true,
    })
}
