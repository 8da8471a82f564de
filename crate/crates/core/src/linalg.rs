//! Dense and tridiagonal complex linear algebra used by the propagators.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Operator 1-norm (max column sum of moduli).
pub fn norm1(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

fn lincomb(terms: &[(f64, MatRef<'_, C64>)], n: usize, add_identity: f64) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| {
        let mut s = if i == j { C64::new(add_identity, 0.0) } else { C64::new(0.0, 0.0) };
        for (c, m) in terms {
            s += m[(i, j)] * *c;
        }
        s
    })
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Argument(format!("expm needs a square matrix, got {}x{}", n, a.ncols())));
    }
    if !a.is_all_finite() {
        return Err(Error::Numerical("expm input has non-finite entries".into()));
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lincomb(&[(b[13], a6.as_ref()), (b[11], a4.as_ref()), (b[9], a2.as_ref())], n, 0.0);
    let tmp = &a6 * &inner_u;
    let u_poly = lincomb(
        &[(1.0, tmp.as_ref()), (b[7], a6.as_ref()), (b[5], a4.as_ref()), (b[3], a2.as_ref())],
        n,
        b[1],
    );
    let u = &a * &u_poly;
    let inner_v = lincomb(&[(b[12], a6.as_ref()), (b[10], a4.as_ref()), (b[8], a2.as_ref())], n, 0.0);
    let tmp = &a6 * &inner_v;
    let v = lincomb(
        &[(1.0, tmp.as_ref()), (b[6], a6.as_ref()), (b[4], a4.as_ref()), (b[2], a2.as_ref())],
        n,
        b[0],
    );
    let p = lincomb(&[(1.0, v.as_ref()), (1.0, u.as_ref())], n, 0.0);
    let q = lincomb(&[(1.0, v.as_ref()), (-1.0, u.as_ref())], n, 0.0);
    let mut r = p;
    q.partial_piv_lu().solve_in_place(r.as_mut());
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_all_finite() {
        return Err(Error::Numerical("expm produced non-finite entries".into()));
    }
    Ok(r)
}

/// Tridiagonal complex matrix with a constant symmetric off-diagonal.
#[derive(Clone, Debug)]
pub struct SymTridiagonal {
    pub diag: Vec<C64>,
    pub off: f64,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// y = self * x
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.diag.len();
        debug_assert_eq!(x.len(), n);
        if n == 1 {
            y[0] = self.diag[0] * x[0];
            return;
        }
        y[0] = self.diag[0] * x[0] + x[1] * self.off;
        for j in 1..n - 1 {
            y[j] = self.diag[j] * x[j] + (x[j - 1] + x[j + 1]) * self.off;
        }
        y[n - 1] = self.diag[n - 1] * x[n - 1] + x[n - 2] * self.off;
    }

    pub fn norm1(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|j| {
                let k = if j == 0 || j == n - 1 { 1.0 } else { 2.0 };
                self.diag[j].norm() + k * self.off.abs()
            })
            .fold(0.0, f64::max)
    }
}

fn inf_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Matrix-free operator for [`expm_multiply`].
pub trait LinearOp {
    fn dim(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Any upper bound on the operator 1-norm.
    fn norm1(&self) -> f64;
}

impl LinearOp for SymTridiagonal {
    fn dim(&self) -> usize {
        SymTridiagonal::dim(self)
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        SymTridiagonal::apply(self, x, y)
    }
    fn norm1(&self) -> f64 {
        SymTridiagonal::norm1(self)
    }
}

/// Computes exp(coef·A)·v in place by a truncated Taylor series with substepping.
///
/// The substep count keeps ‖coef·A/s‖₁ below 4; each substep sums terms until
/// two consecutive ones fall under machine precision relative to the result.
pub fn expm_multiply<A: LinearOp + ?Sized>(a: &A, coef: C64, v: &mut [C64], work: &mut TaylorWork) {
    const THETA_TAYLOR: f64 = 4.0;
    const MAX_TERMS: usize = 120;
    let n = a.dim();
    work.resize(n);
    let nrm = a.norm1() * coef.norm();
    let s = ((nrm / THETA_TAYLOR).ceil() as usize).max(1);
    let c0 = coef / s as f64;
    for _ in 0..s {
        work.term.copy_from_slice(v);
        let mut prev_small = false;
        for k in 1..=MAX_TERMS {
            a.apply(&work.term, &mut work.next);
            let c = c0 / k as f64;
            for (t, nx) in work.term.iter_mut().zip(work.next.iter()) {
                *t = *nx * c;
            }
            for (vi, t) in v.iter_mut().zip(work.term.iter()) {
                *vi += *t;
            }
            let small = inf_norm(&work.term) <= f64::EPSILON * 0.5 * inf_norm(v);
            if small && prev_small {
                break;
            }
            prev_small = small;
        }
    }
}

/// exp(−i·h·tau)·v for the position-basis Hamiltonian.
pub fn expm_multiply_tridiag(h: &SymTridiagonal, tau: f64, v: &mut [C64], work: &mut TaylorWork) {
    expm_multiply(h, C64::new(0.0, -tau), v, work)
}

#[derive(Default, Clone, Debug)]
pub struct TaylorWork {
    term: Vec<C64>,
    next: Vec<C64>,
}

impl TaylorWork {
    fn resize(&mut self, n: usize) {
        if self.term.len() != n {
            self.term = vec![C64::new(0.0, 0.0); n];
            self.next = vec![C64::new(0.0, 0.0); n];
        }
    }
}

/// Singular values of a dense matrix, descending.
pub fn singular_values(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { C64::new(i as f64 - 1.0, 0.5 * i as f64) } else { C64::new(0.0, 0.0) });
        let e = expm(a.as_ref()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { a[(i, i)].exp() } else { C64::new(0.0, 0.0) };
                assert!((e[(i, j)] - want).norm() < 1e-13 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn expm_rotation_generator() {
        // exp([[0, -t], [t, 0]]) is a rotation by t.
        let t = 7.3;
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(-t, 0.0),
            (1, 0) => C64::new(t, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let e = expm(a.as_ref()).unwrap();
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn taylor_matches_pade() {
        let n = 12;
        let h = SymTridiagonal {
            diag: (0..n).map(|j| C64::new((j as f64 * 0.37).sin() * 3.0, -0.01 * j as f64)).collect(),
            off: -1.3,
        };
        let dense = Mat::from_fn(n, n, |i, j| {
            let hij = if i == j {
                h.diag[i]
            } else if i.abs_diff(j) == 1 {
                C64::new(h.off, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            -I * hij * 2.5
        });
        let e = expm(dense.as_ref()).unwrap();
        let v0: Vec<C64> = (0..n).map(|j| C64::new(1.0 / (1.0 + j as f64), 0.2 * j as f64)).collect();
        let mut v = v0.clone();
        let mut w = TaylorWork::default();
        expm_multiply_tridiag(&h, 2.5, &mut v, &mut w);
        for i in 0..n {
            let mut want = C64::new(0.0, 0.0);
            for j in 0..n {
                want += e[(i, j)] * v0[j];
            }
            assert!((v[i] - want).norm() < 1e-12, "{i}: {} vs {}", v[i], want);
        }
    }
}
