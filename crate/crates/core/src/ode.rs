//! Dormand–Prince 5(4) integrator for two-component complex systems, with
//! magnitude renormalisation and cubic Hermite dense output.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type State = [Complex64; 2];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Largest allowed step; keeps dense output usable for quadrature.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, min_step: 1e-13, max_steps: 2_000_000, max_step: 0.05 }
    }
}

/// One accepted point; the true state is `y * exp(exp)`.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub r: f64,
    pub y: State,
    pub dy: State,
    pub exp: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub nodes: Vec<Node>,
    /// Options the trajectory was computed with.
    pub opts: OdeOptions,
}

const RENORM: f64 = 1e50;

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            out[0] += k[0] * (h * c);
            out[1] += k[1] * (h * c);
        }
    }
    out
}

fn norm_inf(y: &State) -> f64 {
    y[0].norm().max(y[1].norm())
}

/// Integrates `y' = rhs(r, y)` from `r0` to `r1` (either direction).
pub fn integrate<F>(rhs: F, r0: f64, y0: State, exp0: f64, r1: f64, opts: &OdeOptions) -> Result<Trajectory>
where
    F: Fn(f64, &State) -> State,
{
    let dir = if r1 >= r0 { 1.0 } else { -1.0 };
    let span = (r1 - r0).abs();
    let mut r = r0;
    let mut y = y0;
    let mut exp = exp0;
    let mut k1 = rhs(r, &y);
    let mut nodes = vec![Node { r, y, dy: k1, exp }];
    if span == 0.0 {
        return Ok(Trajectory { nodes, opts: *opts });
    }
    let mut peak = [y[0].norm(), y[1].norm()];
    let mut h = (span * 0.01).min(opts.max_step).max(opts.min_step);
    let mut steps = 0usize;
    while (r1 - r) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Tolerance(format!("step budget exhausted at r = {r}")));
        }
        let last = (r1 - r).abs() <= h * 1.000001;
        let hs = if last { r1 - r } else { dir * h };
        let k2 = rhs(r + hs / 5.0, &axpy(&y, hs, &[(1.0 / 5.0, &k1)]));
        let k3 = rhs(r + hs * 0.3, &axpy(&y, hs, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]));
        let k4 = rhs(r + hs * 0.8, &axpy(&y, hs, &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]));
        let k5 = rhs(
            r + hs * 8.0 / 9.0,
            &axpy(
                &y,
                hs,
                &[(19372.0 / 6561.0, &k1), (-25360.0 / 2187.0, &k2), (64448.0 / 6561.0, &k3), (-212.0 / 729.0, &k4)],
            ),
        );
        let k6 = rhs(
            r + hs,
            &axpy(
                &y,
                hs,
                &[
                    (9017.0 / 3168.0, &k1),
                    (-355.0 / 33.0, &k2),
                    (46732.0 / 5247.0, &k3),
                    (49.0 / 176.0, &k4),
                    (-5103.0 / 18656.0, &k5),
                ],
            ),
        );
        let ynew = axpy(
            &y,
            hs,
            &[
                (35.0 / 384.0, &k1),
                (500.0 / 1113.0, &k3),
                (125.0 / 192.0, &k4),
                (-2187.0 / 6784.0, &k5),
                (11.0 / 84.0, &k6),
            ],
        );
        let rnew = if last { r1 } else { r + hs };
        let k7 = rhs(rnew, &ynew);
        let mut err2 = 0.0;
        for i in 0..2 {
            let e = (k1[i] * (71.0 / 57600.0)
                + k3[i] * (-71.0 / 16695.0)
                + k4[i] * (71.0 / 1920.0)
                + k5[i] * (-17253.0 / 339200.0)
                + k6[i] * (22.0 / 525.0)
                + k7[i] * (-1.0 / 40.0))
                * hs;
            let sc = opts.rtol * (y[i].norm().max(ynew[i].norm()) + 1e-3 * peak[i]) + f64::MIN_POSITIVE;
            err2 += (e.norm() / sc).powi(2);
        }
        let err = (err2 / 2.0).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            if h < opts.min_step {
                return Err(Error::Tolerance(format!("non-finite step at r = {r}")));
            }
            continue;
        }
        if err <= 1.0 {
            r = rnew;
            y = ynew;
            k1 = k7;
            let m = norm_inf(&y);
            if m > RENORM {
                y[0] /= m;
                y[1] /= m;
                k1[0] /= m;
                k1[1] /= m;
                exp += m.ln();
                peak = [peak[0] / m, peak[1] / m];
            }
            peak = [peak[0].max(y[0].norm()), peak[1].max(y[1].norm())];
            nodes.push(Node { r, y, dy: k1, exp });
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.max_step);
        if h < opts.min_step {
            return Err(Error::Tolerance(format!("step size fell below {:e} at r = {r}", opts.min_step)));
        }
    }
    Ok(Trajectory { nodes, opts: *opts })
}

impl Trajectory {
    pub fn first(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn last(&self) -> &Node {
        self.nodes.last().expect("trajectory has at least one node")
    }

    /// Node closest to `r`.
    pub fn nearest(&self, r: f64) -> &Node {
        self.nodes
            .iter()
            .min_by(|a, b| (a.r - r).abs().total_cmp(&(b.r - r).abs()))
            .expect("trajectory has at least one node")
    }

    /// State at `r` by a fresh integration from the nearest node; accurate to
    /// the step tolerance, unlike [`Trajectory::eval`].
    pub fn eval_with<F>(&self, rhs: F, r: f64) -> (State, f64)
    where
        F: Fn(f64, &State) -> State,
    {
        let node = self.nearest(r);
        if node.r == r {
            return (node.y, node.exp);
        }
        match integrate(rhs, node.r, node.y, node.exp, r, &self.opts) {
            Ok(t) => (t.last().y, t.last().exp),
            Err(_) => self.eval(r),
        }
    }

    /// Cubic Hermite interpolation; returns `(y, exp)`.
    pub fn eval(&self, r: f64) -> (State, f64) {
        let n = &self.nodes;
        let inc = n.last().unwrap().r >= n[0].r;
        let k = if inc { n.partition_point(|p| p.r < r) } else { n.partition_point(|p| p.r > r) };
        if k == 0 {
            return (n[0].y, n[0].exp);
        }
        if k >= n.len() {
            let l = n.last().unwrap();
            return (l.y, l.exp);
        }
        let (a, b) = (&n[k - 1], &n[k]);
        if b.r == r {
            return (b.y, b.exp);
        }
        let exp = a.exp.max(b.exp);
        let sa = (a.exp - exp).exp();
        let sb = (b.exp - exp).exp();
        let h = b.r - a.r;
        let t = (r - a.r) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let y = std::array::from_fn(|i| {
            a.y[i] * (h00 * sa) + a.dy[i] * (h10 * h * sa) + b.y[i] * (h01 * sb) + b.dy[i] * (h11 * h * sb)
        });
        (y, exp)
    }
}
