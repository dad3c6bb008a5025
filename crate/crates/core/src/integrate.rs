//! Adaptive Dormand-Prince 5(4) integration of linear frame systems
//! Z' = A(x) Z with QR renormalization, path storage, and quadrature of
//! solution products along a stored path.

use crate::error::{CoreError, Result};
use crate::symplectic::positive_qr;
use nalgebra::DMatrix;

/// Integration tolerances and controls.
#[derive(Debug, Clone, Copy)]
pub struct OdeOpts {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// QR-renormalize when any column sup-norm exceeds this.
    pub renorm_threshold: f64,
    pub h_max: f64,
}

impl Default for OdeOpts {
    fn default() -> Self {
        OdeOpts {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            renorm_threshold: 1e6,
            h_max: 0.5,
        }
    }
}

// Dormand-Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th-order weights
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

/// State for the augmented integration: frame columns (and optional carried
/// solution columns) plus an optional quadratic accumulator.
#[derive(Clone)]
struct State {
    /// 2n x m matrix: frame columns, then carried solution columns.
    z: DMatrix<f64>,
    /// Symmetric accumulator Q with Q' = W^T P W over the carried columns.
    q: Option<DMatrix<f64>>,
}

impl State {
    fn axpy_combine(parts: &[(f64, &State)]) -> State {
        let mut z = DMatrix::zeros(parts[0].1.z.nrows(), parts[0].1.z.ncols());
        for (c, s) in parts {
            z += &s.z * *c;
        }
        let q = parts[0].1.q.as_ref().map(|q0| {
            let mut q = DMatrix::zeros(q0.nrows(), q0.ncols());
            for (c, s) in parts {
                q += s.q.as_ref().unwrap() * *c;
            }
            q
        });
        State { z, q }
    }

    fn error_norm(&self, other_scale: &State, err: &State, atol: f64, rtol: f64) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.z.nrows() {
            for j in 0..self.z.ncols() {
                let sc = atol + rtol * self.z[(i, j)].abs().max(other_scale.z[(i, j)].abs());
                m = m.max((err.z[(i, j)] / sc).abs());
            }
        }
        if let (Some(q), Some(qe)) = (&self.q, &err.q) {
            for i in 0..q.nrows() {
                for j in 0..q.ncols() {
                    let sc = atol + rtol * q[(i, j)].abs();
                    m = m.max((qe[(i, j)] / sc).abs());
                }
            }
        }
        m
    }
}

/// Right-hand side of the augmented system.
struct Rhs<'a> {
    a_of_x: &'a dyn Fn(f64) -> DMatrix<f64>,
    /// Coefficient block H of the tracked solutions W = Z H.
    coeffs: Option<&'a DMatrix<f64>>,
    /// Selector P for the quadrature accumulator Q' = W^T P W.
    selector: Option<&'a DMatrix<f64>>,
}

impl<'a> Rhs<'a> {
    fn eval(&self, x: f64, s: &State) -> State {
        let a = (self.a_of_x)(x);
        let z = &a * &s.z;
        let q = s.q.as_ref().map(|_| {
            let p = self.selector.expect("selector required with accumulator");
            let h = self.coeffs.expect("coefficients required with accumulator");
            let w = &s.z * h;
            w.transpose() * (p * &w)
        });
        State { z, q }
    }
}

/// One stored node of an integrated path.
#[derive(Debug, Clone)]
pub struct PathNode {
    pub x: f64,
    /// Frame at this node (post-renormalization if one occurred here).
    pub z: DMatrix<f64>,
    /// Triangular factor applied at this node: frame arriving here equals
    /// z * r_applied. Present only when a renormalization happened.
    pub r_applied: Option<DMatrix<f64>>,
    /// Accumulated log of renormalization determinants up to this node.
    pub log_scale: f64,
}

/// A stored integration of a frame along x, with renormalization bookkeeping.
#[derive(Debug, Clone)]
pub struct FramePath {
    pub nodes: Vec<PathNode>,
    /// +1.0 for increasing x, -1.0 for decreasing x.
    pub direction: f64,
    /// Maximum relative Lagrangian defect observed along the path.
    pub max_lagrangian_defect: f64,
    pub opts: OdeOpts,
}

impl FramePath {
    pub fn x_first(&self) -> f64 {
        self.nodes.first().unwrap().x
    }

    pub fn x_last(&self) -> f64 {
        self.nodes.last().unwrap().x
    }

    pub fn final_frame(&self) -> &DMatrix<f64> {
        &self.nodes.last().unwrap().z
    }

    /// Renormalization events: (x, determinant sign) - always +1 because the
    /// triangular factors are forced to positive diagonals.
    pub fn renorm_events(&self) -> Vec<(f64, i8)> {
        self.nodes
            .iter()
            .filter(|n| n.r_applied.is_some())
            .map(|n| (n.x, 1i8))
            .collect()
    }

    /// Index of the last node at or before x (along the integration direction).
    fn node_before(&self, x: f64) -> usize {
        let dir = self.direction;
        let mut lo = 0usize;
        let mut hi = self.nodes.len() - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if (x - self.nodes[mid].x) * dir >= -1e-14 {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Frame at an arbitrary x within the path range, by re-integration from
    /// the nearest stored node (no renormalization applied on the short hop).
    pub fn frame_at(&self, a_of_x: &dyn Fn(f64) -> DMatrix<f64>, x: f64) -> Result<DMatrix<f64>> {
        let i = self.node_before(x);
        let node = &self.nodes[i];
        if (x - node.x).abs() < 1e-14 {
            return Ok(node.z.clone());
        }
        let mut opts = self.opts;
        opts.renorm_threshold = f64::INFINITY;
        let path = integrate_frame_path(a_of_x, node.x, x, node.z.clone(), &opts)?;
        Ok(path.final_frame().clone())
    }
}

/// Integrate Z' = A(x) Z over [x0, x1] (either direction), storing every
/// accepted step and renormalizing by positive-diagonal QR when column norms
/// exceed the threshold.
pub fn integrate_frame_path(
    a_of_x: &dyn Fn(f64) -> DMatrix<f64>,
    x0: f64,
    x1: f64,
    z0: DMatrix<f64>,
    opts: &OdeOpts,
) -> Result<FramePath> {
    let rhs = Rhs {
        a_of_x,
        coeffs: None,
        selector: None,
    };
    let mut state = State { z: z0, q: None };
    let mut nodes = Vec::new();
    let mut log_scale = 0.0;
    let mut max_defect: f64 = 0.0;
    nodes.push(PathNode {
        x: x0,
        z: state.z.clone(),
        r_applied: None,
        log_scale,
    });
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut h = (opts.h_max * 0.01).min((x1 - x0).abs()).max(1e-8) * dir;
    let mut steps = 0usize;

    while (x1 - x) * dir > 1e-14 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(CoreError::Integration {
                x,
                detail: format!("step limit {} exceeded", opts.max_steps),
            });
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let (new_state, err_norm) = dp5_step(&rhs, x, &state, h, opts.atol, opts.rtol);
        if err_norm <= 1.0 {
            x += h;
            state = new_state;
            // renormalize if any column grew beyond threshold
            let mut r_applied = None;
            let maxcol = (0..state.z.ncols())
                .map(|j| state.z.column(j).amax())
                .fold(0.0, f64::max);
            if maxcol > opts.renorm_threshold {
                let (q, r) = positive_qr(&state.z)?;
                let mut logdet = 0.0;
                for i in 0..r.nrows() {
                    logdet += r[(i, i)].ln();
                }
                log_scale += logdet;
                state.z = q;
                r_applied = Some(r);
            }
            max_defect = max_defect.max(frame_defect(&state.z));
            nodes.push(PathNode {
                x,
                z: state.z.clone(),
                r_applied,
                log_scale,
            });
        }
        // PI-like step-size control
        let fac = if err_norm > 0.0 {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= fac;
        if h.abs() > opts.h_max {
            h = opts.h_max * dir;
        }
        if h.abs() < 1e-13 {
            return Err(CoreError::Integration {
                x,
                detail: "step size underflow (stiffness failure)".into(),
            });
        }
    }
    Ok(FramePath {
        nodes,
        direction: dir,
        max_lagrangian_defect: max_defect,
        opts: *opts,
    })
}

fn frame_defect(z: &DMatrix<f64>) -> f64 {
    let n = z.nrows() / 2;
    let m = z.ncols().min(n);
    let x = z.view((0, 0), (n, m));
    let y = z.view((n, 0), (n, m));
    let d = x.transpose() * y - y.transpose() * x;
    let scale = z.norm_squared();
    if scale == 0.0 {
        0.0
    } else {
        d.norm() / scale
    }
}

fn dp5_step(rhs: &Rhs, x: f64, s: &State, h: f64, atol: f64, rtol: f64) -> (State, f64) {
    let k1 = rhs.eval(x, s);
    let s2 = State::axpy_combine(&[(1.0, s), (h * A21, &k1)]);
    let k2 = rhs.eval(x + C[1] * h, &s2);
    let s3 = State::axpy_combine(&[(1.0, s), (h * A31, &k1), (h * A32, &k2)]);
    let k3 = rhs.eval(x + C[2] * h, &s3);
    let s4 = State::axpy_combine(&[(1.0, s), (h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]);
    let k4 = rhs.eval(x + C[3] * h, &s4);
    let s5 = State::axpy_combine(&[
        (1.0, s),
        (h * A51, &k1),
        (h * A52, &k2),
        (h * A53, &k3),
        (h * A54, &k4),
    ]);
    let k5 = rhs.eval(x + C[4] * h, &s5);
    let s6 = State::axpy_combine(&[
        (1.0, s),
        (h * A61, &k1),
        (h * A62, &k2),
        (h * A63, &k3),
        (h * A64, &k4),
        (h * A65, &k5),
    ]);
    let k6 = rhs.eval(x + C[5] * h, &s6);
    let y5 = State::axpy_combine(&[
        (1.0, s),
        (h * B1, &k1),
        (h * B3, &k3),
        (h * B4, &k4),
        (h * B5, &k5),
        (h * B6, &k6),
    ]);
    let k7 = rhs.eval(x + h, &y5);
    let y4 = State::axpy_combine(&[
        (1.0, s),
        (h * E1, &k1),
        (h * E3, &k3),
        (h * E4, &k4),
        (h * E5, &k5),
        (h * E6, &k6),
        (h * E7, &k7),
    ]);
    let err = State::axpy_combine(&[(1.0, &y5), (-1.0, &y4)]);
    let en = y5.error_norm(s, &err, atol, rtol);
    (y5, en)
}

/// Integrate the accumulator Q' = W^T P W along a stored path, where
/// W(x) = Z(x) H_k are solution columns expressed through the frame with
/// piecewise-constant coefficients H_k (transformed by the stored
/// renormalization factors); `h_at_end` gives the coefficients at the final
/// node. The solutions are never propagated independently of the frame, so
/// decaying components are reconstructed without exponential error
/// amplification. Returns the accumulated Q over the whole stored range.
pub fn quadrature_along_path(
    a_of_x: &dyn Fn(f64) -> DMatrix<f64>,
    path: &FramePath,
    h_at_end: &DMatrix<f64>,
    selector: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = h_at_end.ncols();
    // Back-chain coefficients to every node: h_k at node k with
    // W(node k) = Z_k h_k; moving forward over a renormalization with factor R,
    // h_{k} = R h_{k-1}, so backwards h_{k-1} = R^{-1} h_k.
    let nn = path.nodes.len();
    let mut h_at: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nn];
    let mut h = h_at_end.clone();
    for k in (0..nn).rev() {
        h_at[k] = h.clone();
        if k > 0 {
            if let Some(r) = &path.nodes[k].r_applied {
                let lu = r.clone().lu();
                h = lu.solve(&h).ok_or_else(|| CoreError::Integration {
                    x: path.nodes[k].x,
                    detail: "singular renormalization factor".into(),
                })?;
            }
        }
    }
    let mut q = DMatrix::zeros(m, m);
    // integrate interval by interval between stored nodes, carrying the frame
    // and accumulating Q with the interval's fixed coefficient block
    for k in 1..nn {
        let x_a = path.nodes[k - 1].x;
        let x_b = path.nodes[k].x;
        if (x_b - x_a).abs() < 1e-14 {
            continue;
        }
        let h_k = &h_at[k - 1];
        let rhs = Rhs {
            a_of_x,
            coeffs: Some(h_k),
            selector: Some(selector),
        };
        let mut state = State {
            z: path.nodes[k - 1].z.clone(),
            q: Some(q.clone()),
        };
        let mut x = x_a;
        let mut hstep = x_b - x_a;
        let mut guard = 0usize;
        while (x_b - x) * path.direction > 1e-14 {
            guard += 1;
            if guard > 10_000 {
                return Err(CoreError::Integration {
                    x,
                    detail: "quadrature step limit".into(),
                });
            }
            if (x + hstep - x_b) * path.direction > 0.0 {
                hstep = x_b - x;
            }
            let (ns, en) = dp5_step(&rhs, x, &state, hstep, path.opts.atol, path.opts.rtol);
            if en <= 1.0 {
                x += hstep;
                state = ns;
            }
            let fac = if en > 0.0 {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            hstep *= fac;
            if hstep.abs() < 1e-13 {
                return Err(CoreError::Integration {
                    x,
                    detail: "quadrature step underflow".into(),
                });
            }
        }
        q = state.q.unwrap();
    }
    Ok(q)
}

/// Integrate a frame and return only the final frame (convenience).
#[allow(dead_code)]
pub(crate) fn integrate_frame(
    a_of_x: &dyn Fn(f64) -> DMatrix<f64>,
    x0: f64,
    x1: f64,
    z0: DMatrix<f64>,
    opts: &OdeOpts,
) -> Result<DMatrix<f64>> {
    Ok(integrate_frame_path(a_of_x, x0, x1, z0, opts)?
        .final_frame()
        .clone())
}

/// Public wrapper that seeds tolerances before a path integration.
pub fn integrate_path(
    a_of_x: &dyn Fn(f64) -> DMatrix<f64>,
    x0: f64,
    x1: f64,
    z0: DMatrix<f64>,
    opts: &OdeOpts,
) -> Result<FramePath> {
    integrate_frame_path(a_of_x, x0, x1, z0, opts)
}
