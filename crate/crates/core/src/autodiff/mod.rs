//! Tape-style reverse-mode automatic differentiation.
//!
//! A [`Graph`] is rebuilt for every forward pass. Each operation appends a
//! node holding its forward value and whatever context the backward pass
//! needs; node ids are handed out as [`Var`] handles. Because inputs are
//! always appended before the nodes that consume them, reverse append order
//! is a valid reverse topological order and [`Graph::backward`] visits each
//! node exactly once.
//!
//! ```
//! use geokan::autodiff::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(&Tensor::new(vec![1], vec![3.0]).unwrap());
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap(), &[6.0]);
//! ```

mod tensor;

pub use tensor::{zero_grad, Tensor};

use thiserror::Error;

use crate::spline::SplineGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not match data length {len}")]
    ShapeData { shape: Vec<usize>, len: usize },
    #[error("{op}: argument outside the domain (value {value})")]
    Domain { op: &'static str, value: f64 },
    #[error("backward called on a non-scalar tensor of shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Sum(Var),
    Mean(Var),
    Log(Var),
    Exp(Var),
    Silu(Var),
    Mish(Var),
    AddBias(Var, Var),
    /// Basis expansion of every input column; saves dB/dx per entry.
    SplineBasis { input: Var, deriv: Vec<f64> },
    /// coef[i, o, j] * scale[i, o]
    EdgeScale { coef: Var, scale: Var },
    /// basis[b, i*nb + j] * coef[i, o, j] summed over (i, j)
    EdgeContract { basis: Var, coef: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Append-only computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    no_grad: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A graph for inference: parameters are recorded as constants and no
    /// backward context is kept.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            no_grad: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a constant (no gradient flows into it).
    pub fn constant(&mut self, t: Tensor) -> Var {
        let t = t.detached();
        self.push(t, Op::Leaf, false)
    }

    /// Records a trainable leaf holding a copy of `t`'s values.
    pub fn param(&mut self, t: &Tensor) -> Var {
        let rg = !self.no_grad;
        self.push(t.detached(), Op::Leaf, rg)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn check_finite(&self, v: Var, op: &'static str) -> Result<(), AutodiffError> {
        if self.nodes[v.0].value.is_finite() {
            Ok(())
        } else {
            Err(AutodiffError::NonFinite { op })
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(AutodiffError::Dimension {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let out = self.zip_map(a, b, |x, y| x + y);
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_map(a, b, |x, y| x - y);
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_map(a, b, |x, y| x * y);
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.map(a, |x| c * x);
        let rg = self.needs(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(AutodiffError::Dimension {
                op: "matmul",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, 0.0);
        let out = Tensor::new(vec![m, n], out)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.len().max(1) as f64;
        let s: f64 = t.data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s / n), Op::Mean(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        if let Some(&bad) = self.value(a).data().iter().find(|&&x| !(x > 0.0)) {
            return Err(AutodiffError::Domain { op: "log", value: bad });
        }
        let out = self.map(a, f64::ln);
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::Log(a), rg))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::exp);
        let rg = self.needs(&[a]);
        self.push(out, Op::Exp(a), rg)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let out = self.map(a, silu);
        let rg = self.needs(&[a]);
        self.push(out, Op::Silu(a), rg)
    }

    pub fn mish(&mut self, a: Var) -> Var {
        let out = self.map(a, mish);
        let rg = self.needs(&[a]);
        self.push(out, Op::Mish(a), rg)
    }

    /// Adds a `[n]` bias to every row of an `[m, n]` tensor.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 1 || sa[1] != sb[0] {
            return Err(AutodiffError::Dimension {
                op: "add_bias",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let n = sa[1];
        let b = tb.data();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + b[i % n])
            .collect();
        let out = Tensor::new(sa.to_vec(), data)?;
        let rg = self.needs(&[a, bias]);
        Ok(self.push(out, Op::AddBias(a, bias), rg))
    }

    /// Expands `[batch, n_in]` into `[batch, n_in * nb]` B-spline basis values.
    pub fn spline_basis(&mut self, x: Var, grid: &SplineGrid) -> Result<Var, AutodiffError> {
        let tx = self.value(x);
        let sx = tx.shape();
        if sx.len() != 2 {
            return Err(AutodiffError::Dimension {
                op: "spline_basis",
                left: sx.to_vec(),
                right: vec![grid.num_basis()],
            });
        }
        let (batch, n_in) = (sx[0], sx[1]);
        let nb = grid.num_basis();
        let rg = self.needs(&[x]);
        let mut values = vec![0.0; batch * n_in * nb];
        let mut deriv = if rg { vec![0.0; batch * n_in * nb] } else { Vec::new() };
        for (k, &v) in tx.data().iter().enumerate() {
            if !v.is_finite() {
                return Err(AutodiffError::Domain {
                    op: "spline_basis",
                    value: v,
                });
            }
            let range = k * nb..(k + 1) * nb;
            if rg {
                grid.basis_and_derivative_into(v, &mut values[range.clone()], &mut deriv[range]);
            } else {
                grid.basis_into(v, &mut values[range]);
            }
        }
        let out = Tensor::new(vec![batch, n_in * nb], values)?;
        Ok(self.push(out, Op::SplineBasis { input: x, deriv }, rg))
    }

    /// Scales every edge's coefficient vector: `coef[i, o, :] * scale[i, o]`.
    pub fn edge_scale(&mut self, coef: Var, scale: Var) -> Result<Var, AutodiffError> {
        let (tc, ts) = (self.value(coef), self.value(scale));
        let (sc, ss) = (tc.shape(), ts.shape());
        if sc.len() != 3 || ss.len() != 2 || sc[..2] != ss[..] {
            return Err(AutodiffError::Dimension {
                op: "edge_scale",
                left: sc.to_vec(),
                right: ss.to_vec(),
            });
        }
        let nb = sc[2];
        let s = ts.data();
        let data = tc
            .data()
            .iter()
            .enumerate()
            .map(|(k, &c)| c * s[k / nb])
            .collect();
        let out = Tensor::new(sc.to_vec(), data)?;
        let rg = self.needs(&[coef, scale]);
        Ok(self.push(out, Op::EdgeScale { coef, scale }, rg))
    }

    /// Contracts basis values `[batch, n_in * nb]` with edge coefficients
    /// `[n_in, n_out, nb]` into `[batch, n_out]`.
    pub fn edge_contract(&mut self, basis: Var, coef: Var) -> Result<Var, AutodiffError> {
        let (tb, tc) = (self.value(basis), self.value(coef));
        let (sb, sc) = (tb.shape(), tc.shape());
        if sb.len() != 2 || sc.len() != 3 || sb[1] != sc[0] * sc[2] {
            return Err(AutodiffError::Dimension {
                op: "edge_contract",
                left: sb.to_vec(),
                right: sc.to_vec(),
            });
        }
        let (batch, n_out) = (sb[0], sc[1]);
        let k = sb[1];
        let mat = coef_to_matrix(tc.data(), sc[0], n_out, sc[2]);
        let mut out = vec![0.0; batch * n_out];
        gemm(batch, k, n_out, tb.data(), false, &mat, false, &mut out, 0.0);
        let out = Tensor::new(vec![batch, n_out], out)?;
        let rg = self.needs(&[basis, coef]);
        Ok(self.push(out, Op::EdgeContract { basis, coef }, rg))
    }

    /// Mean squared error between two tensors of equal shape.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, AutodiffError> {
        let d = self.sub(pred, target)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    /// Reverse pass from a scalar `loss`. Gradients from earlier calls on
    /// this graph are kept and added to.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        // Seed into a scratch buffer so earlier accumulations stay intact.
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(gout) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id, &gout, &mut grads);
            let node = &mut self.nodes[id];
            match node.grad.as_mut() {
                Some(acc) => acc.iter_mut().zip(&gout).for_each(|(a, g)| *a += g),
                None => node.grad = Some(gout),
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, gout: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let mut send = |v: Var, g: Vec<f64>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match grads[v.0].as_mut() {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, x)| *a += x),
                None => grads[v.0] = Some(g),
            }
        };
        match node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(a, gout.to_vec());
                send(b, gout.to_vec());
            }
            Op::Sub(a, b) => {
                send(a, gout.to_vec());
                send(b, gout.iter().map(|g| -g).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                send(a, gout.iter().zip(vb).map(|(g, y)| g * y).collect());
                send(b, gout.iter().zip(va).map(|(g, x)| g * x).collect());
            }
            Op::Scale(a, c) => send(a, gout.iter().map(|g| g * c).collect()),
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.nodes[a.0].requires_grad {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, gout, false, tb.data(), true, &mut ga, 0.0);
                    send(a, ga);
                }
                if self.nodes[b.0].requires_grad {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, ta.data(), true, gout, false, &mut gb, 0.0);
                    send(b, gb);
                }
            }
            Op::Sum(a) => send(a, vec![gout[0]; self.value(a).len()]),
            Op::Mean(a) => {
                let n = self.value(a).len().max(1) as f64;
                send(a, vec![gout[0] / n; self.value(a).len()]);
            }
            Op::Log(a) => {
                let va = self.value(a).data();
                send(a, gout.iter().zip(va).map(|(g, x)| g / x).collect());
            }
            Op::Exp(a) => {
                let vo = node.value.data();
                send(a, gout.iter().zip(vo).map(|(g, y)| g * y).collect());
            }
            Op::Silu(a) => {
                let va = self.value(a).data();
                send(a, gout.iter().zip(va).map(|(g, &x)| g * silu_grad(x)).collect());
            }
            Op::Mish(a) => {
                let va = self.value(a).data();
                send(a, gout.iter().zip(va).map(|(g, &x)| g * mish_grad(x)).collect());
            }
            Op::AddBias(a, bias) => {
                send(a, gout.to_vec());
                let n = self.value(bias).len();
                let mut gb = vec![0.0; n];
                for row in gout.chunks(n) {
                    gb.iter_mut().zip(row).for_each(|(acc, g)| *acc += g);
                }
                send(bias, gb);
            }
            Op::SplineBasis { input, ref deriv } => {
                let n = self.value(input).len();
                let nb = deriv.len() / n.max(1);
                let gx = (0..n)
                    .map(|k| {
                        let r = k * nb..(k + 1) * nb;
                        gout[r.clone()].iter().zip(&deriv[r]).map(|(g, d)| g * d).sum()
                    })
                    .collect();
                send(input, gx);
            }
            Op::EdgeScale { coef, scale } => {
                let (tc, ts) = (self.value(coef), self.value(scale));
                let nb = tc.shape()[2];
                if self.nodes[coef.0].requires_grad {
                    let s = ts.data();
                    send(coef, gout.iter().enumerate().map(|(k, g)| g * s[k / nb]).collect());
                }
                if self.nodes[scale.0].requires_grad {
                    let gs = gout
                        .chunks(nb)
                        .zip(tc.data().chunks(nb))
                        .map(|(g, c)| g.iter().zip(c).map(|(x, y)| x * y).sum())
                        .collect();
                    send(scale, gs);
                }
            }
            Op::EdgeContract { basis, coef } => {
                let (tb, tc) = (self.value(basis), self.value(coef));
                let (n_in, n_out, nb) = (tc.shape()[0], tc.shape()[1], tc.shape()[2]);
                let batch = tb.shape()[0];
                let k = n_in * nb;
                if self.nodes[basis.0].requires_grad {
                    let mat = coef_to_matrix(tc.data(), n_in, n_out, nb);
                    let mut gbasis = vec![0.0; batch * k];
                    gemm(batch, n_out, k, gout, false, &mat, true, &mut gbasis, 0.0);
                    send(basis, gbasis);
                }
                if self.nodes[coef.0].requires_grad {
                    let mut gmat = vec![0.0; k * n_out];
                    gemm(k, batch, n_out, tb.data(), true, gout, false, &mut gmat, 0.0);
                    send(coef, matrix_to_coef(&gmat, n_in, n_out, nb));
                }
            }
        }
    }
}

/// `[n_in, n_out, nb]` -> `[(n_in * nb), n_out]`
fn coef_to_matrix(c: &[f64], n_in: usize, n_out: usize, nb: usize) -> Vec<f64> {
    let mut m = vec![0.0; c.len()];
    for i in 0..n_in {
        for o in 0..n_out {
            let src = &c[(i * n_out + o) * nb..(i * n_out + o + 1) * nb];
            for (j, &v) in src.iter().enumerate() {
                m[(i * nb + j) * n_out + o] = v;
            }
        }
    }
    m
}

fn matrix_to_coef(m: &[f64], n_in: usize, n_out: usize, nb: usize) -> Vec<f64> {
    let mut c = vec![0.0; m.len()];
    for i in 0..n_in {
        for j in 0..nb {
            for o in 0..n_out {
                c[(i * n_out + o) * nb + j] = m[(i * nb + j) * n_out + o];
            }
        }
    }
    c
}

/// `c = alpha_is_one * op(a) * op(b) + beta * c` for row-major operands,
/// where `op(a)` is `[m, k]` and `op(b)` is `[k, n]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above describe exactly the row-major buffers whose
    // lengths were asserted, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    (-x.abs()).exp().ln_1p() + x.max(0.0)
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

pub fn mish_grad(x: f64) -> f64 {
    let t = softplus(x).tanh();
    t + x * (1.0 - t * t) * sigmoid(x)
}
