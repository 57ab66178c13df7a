//! Dense complex linear algebra on `Array2<Complex64>`.
//!
//! Matrix products go through ndarray's BLAS backend; decompositions and
//! solves call LAPACK directly. LAPACK is column-major, so every wrapper
//! here converts explicitly at the boundary.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = Array2<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest matrix dimension the dense decompositions accept (12 qubits).
pub const DENSE_CAP: usize = 4096;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> Matrix {
    Array2::eye(d)
}

pub fn dagger(m: &Matrix) -> Matrix {
    m.t().mapv(|z| z.conj())
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Matrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == ZERO {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(b, |o, &v| *o = s * v);
        }
    }
    out
}

pub fn trace(m: &Matrix) -> C64 {
    m.diag().sum()
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry of `m - m†` in absolute value.
pub fn hermitian_deviation(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

pub fn is_real(m: &Matrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

fn check_square(m: &Matrix, what: &str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::Shape(format!("{what}: expected a square matrix, got {r}x{c}")));
    }
    Ok(r)
}

/// Column-major copy of `m` for LAPACK.
fn to_col_major(m: ArrayView2<C64>) -> Vec<C64> {
    m.t().iter().cloned().collect()
}

fn from_col_major(data: Vec<C64>, rows: usize, cols: usize) -> Matrix {
    Array2::from_shape_vec((cols, rows), data)
        .expect("LAPACK buffer has the requested shape")
        .reversed_axes()
        .as_standard_layout()
        .into_owned()
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// unitary whose columns are the eigenvectors.
///
/// Uses the divide-and-conquer drivers (`dsyevd` for real symmetric input,
/// `zheevd` otherwise). The Householder tridiagonal reduction they start from
/// is the standard one.
pub fn eigh(m: &Matrix) -> Result<(Array1<f64>, Matrix)> {
    let n = check_square(m, "eigh")?;
    if n > DENSE_CAP {
        return Err(Error::CapExceeded { dim: n, cap: DENSE_CAP });
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Matrix::zeros((0, 0))));
    }
    let scale = max_abs(m).max(1e-300);
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * scale.max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let ni = n as i32;
    let mut w = vec![0.0; n];
    let mut info = 0;
    if is_real(m) {
        // Symmetric, so row-major and column-major storage coincide.
        let mut a: Vec<f64> = m.iter().map(|z| z.re).collect();
        let mut work = vec![0.0; 1];
        let mut iwork = vec![0i32; 1];
        unsafe {
            lapack::dsyevd(b'V', b'L', ni, &mut a, ni, &mut w, &mut work, -1, &mut iwork, -1, &mut info);
        }
        let lwork = work[0] as usize;
        let liwork = iwork[0] as usize;
        work.resize(lwork.max(1), 0.0);
        iwork.resize(liwork.max(1), 0);
        unsafe {
            lapack::dsyevd(
                b'V', b'L', ni, &mut a, ni, &mut w, &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "dsyevd", info });
        }
        // Column k of the column-major buffer is eigenvector k.
        let v = Array2::from_shape_vec((n, n), a)
            .expect("square buffer")
            .reversed_axes()
            .mapv(|x| C64::new(x, 0.0));
        return Ok((Array1::from(w), v));
    }
    // The row-major buffer of a Hermitian M read column-major is conj(M);
    // its eigenvectors are the conjugates of M's.
    let mut a: Vec<C64> = m.iter().cloned().collect();
    let mut work = vec![ZERO; 1];
    let mut rwork = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::zheevd(
            b'V', b'L', ni, &mut a, ni, &mut w, &mut work, -1, &mut rwork, -1, &mut iwork, -1, &mut info,
        );
    }
    let lwork = work[0].re as usize;
    let lrwork = rwork[0] as usize;
    let liwork = iwork[0] as usize;
    work.resize(lwork.max(1), ZERO);
    rwork.resize(lrwork.max(1), 0.0);
    iwork.resize(liwork.max(1), 0);
    unsafe {
        lapack::zheevd(
            b'V',
            b'L',
            ni,
            &mut a,
            ni,
            &mut w,
            &mut work,
            lwork as i32,
            &mut rwork,
            lrwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheevd", info });
    }
    let v = Array2::from_shape_vec((n, n), a)
        .expect("square buffer")
        .reversed_axes()
        .mapv(|z| z.conj());
    Ok((Array1::from(w), v))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &Matrix) -> Result<Array1<f64>> {
    let n = check_square(m, "eigvalsh")?;
    if n > DENSE_CAP {
        return Err(Error::CapExceeded { dim: n, cap: DENSE_CAP });
    }
    if n == 0 {
        return Ok(Array1::zeros(0));
    }
    let ni = n as i32;
    let mut w = vec![0.0; n];
    let mut info = 0;
    if is_real(m) {
        let mut a: Vec<f64> = m.iter().map(|z| z.re).collect();
        let mut work = vec![0.0; 1];
        let mut iwork = vec![0i32; 1];
        unsafe {
            lapack::dsyevd(b'N', b'L', ni, &mut a, ni, &mut w, &mut work, -1, &mut iwork, -1, &mut info);
        }
        let lwork = work[0] as usize;
        let liwork = iwork[0] as usize;
        work.resize(lwork.max(1), 0.0);
        iwork.resize(liwork.max(1), 0);
        unsafe {
            lapack::dsyevd(
                b'N', b'L', ni, &mut a, ni, &mut w, &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "dsyevd", info });
        }
        return Ok(Array1::from(w));
    }
    let mut a: Vec<C64> = m.iter().cloned().collect();
    let mut work = vec![ZERO; 1];
    let mut rwork = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::zheevd(
            b'N', b'L', ni, &mut a, ni, &mut w, &mut work, -1, &mut rwork, -1, &mut iwork, -1, &mut info,
        );
    }
    let lwork = work[0].re as usize;
    let lrwork = rwork[0] as usize;
    let liwork = iwork[0] as usize;
    work.resize(lwork.max(1), ZERO);
    rwork.resize(lrwork.max(1), 0.0);
    iwork.resize(liwork.max(1), 0);
    unsafe {
        lapack::zheevd(
            b'N',
            b'L',
            ni,
            &mut a,
            ni,
            &mut w,
            &mut work,
            lwork as i32,
            &mut rwork,
            lrwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheevd", info });
    }
    Ok(Array1::from(w))
}

/// Singular values, descending.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    let (rows, cols) = m.dim();
    if rows.max(cols) > DENSE_CAP * 4 {
        return Err(Error::CapExceeded { dim: rows.max(cols), cap: DENSE_CAP * 4 });
    }
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut a = to_col_major(m.view());
    let mut s = vec![0.0; k];
    let mut u = vec![ZERO; 1];
    let mut vt = vec![ZERO; 1];
    let mut work = vec![ZERO; 1];
    let mut rwork = vec![0.0; 7 * k];
    let mut iwork = vec![0i32; 8 * k];
    let mut info = 0;
    let (r, cc) = (rows as i32, cols as i32);
    unsafe {
        lapack::zgesdd(
            b'N', r, cc, &mut a, r, &mut s, &mut u, 1, &mut vt, 1, &mut work, -1, &mut rwork, &mut iwork, &mut info,
        );
    }
    let lwork = work[0].re as usize;
    work.resize(lwork.max(1), ZERO);
    unsafe {
        lapack::zgesdd(
            b'N',
            r,
            cc,
            &mut a,
            r,
            &mut s,
            &mut u,
            1,
            &mut vt,
            1,
            &mut work,
            lwork as i32,
            &mut rwork,
            &mut iwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgesdd", info });
    }
    Ok(s)
}

/// Schatten-1 norm. Hermitian input goes through the eigenvalues.
pub fn trace_norm(m: &Matrix) -> Result<f64> {
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok(0.0);
    }
    if m.nrows() == m.ncols() && hermitian_deviation(m) <= 1e-13 * scale {
        let h = hermitize(m);
        return Ok(eigvalsh(&h)?.iter().map(|x| x.abs()).sum());
    }
    Ok(singular_values(m)?.iter().sum())
}

/// Operator (spectral) norm.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if max_abs(m) == 0.0 {
        return Ok(0.0);
    }
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// `(m + m†) / 2`.
pub fn hermitize(m: &Matrix) -> Matrix {
    let mut h = m.clone();
    let n = h.nrows();
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[[i, j]] + m[[j, i]].conj());
            h[[i, j]] = v;
            h[[j, i]] = v.conj();
        }
    }
    h
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = check_square(a, "solve")?;
    if b.nrows() != n {
        return Err(Error::Shape(format!("solve: rhs has {} rows, expected {n}", b.nrows())));
    }
    let nrhs = b.ncols();
    let mut acol = to_col_major(a.view());
    let mut bcol = to_col_major(b.view());
    let mut ipiv = vec![0i32; n];
    let mut info = 0;
    unsafe {
        lapack::zgesv(n as i32, nrhs as i32, &mut acol, n as i32, &mut ipiv, &mut bcol, n as i32, &mut info);
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgesv", info });
    }
    Ok(from_col_major(bcol, n, nrhs))
}

/// Eigenvalues of a general complex matrix (unordered).
pub fn eigvals_general(m: &Matrix) -> Result<Vec<C64>> {
    let n = check_square(m, "eigvals")?;
    if n > DENSE_CAP {
        return Err(Error::CapExceeded { dim: n, cap: DENSE_CAP });
    }
    let mut a = to_col_major(m.view());
    let mut w = vec![ZERO; n];
    let mut vl = vec![ZERO; 1];
    let mut vr = vec![ZERO; 1];
    let mut work = vec![ZERO; 1];
    let mut rwork = vec![0.0; 2 * n];
    let mut info = 0;
    let ni = n as i32;
    unsafe {
        lapack::zgeev(
            b'N', b'N', ni, &mut a, ni, &mut w, &mut vl, 1, &mut vr, 1, &mut work, -1, &mut rwork, &mut info,
        );
    }
    let lwork = work[0].re as usize;
    work.resize(lwork.max(1), ZERO);
    unsafe {
        lapack::zgeev(
            b'N',
            b'N',
            ni,
            &mut a,
            ni,
            &mut w,
            &mut vl,
            1,
            &mut vr,
            1,
            &mut work,
            lwork as i32,
            &mut rwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgeev", info });
    }
    Ok(w)
}

fn norm_1(m: &Matrix) -> f64 {
    m.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham 2005).
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = check_square(a, "expm")?;
    const B: [f64; 14] = [
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
    const THETA_13: f64 = 5.371920351148152;
    let norm = norm_1(a);
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("expm of a non-finite matrix".into()));
    }
    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let id = identity(n);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let cs = |k: usize| C64::new(B[k], 0.0);
    let inner_u = &a6 * cs(13) + &a4 * cs(11) + &a2 * cs(9);
    let u_poly = a6.dot(&inner_u) + &a6 * cs(7) + &a4 * cs(5) + &a2 * cs(3) + &id * cs(1);
    let u = scaled.dot(&u_poly);
    let inner_v = &a6 * cs(12) + &a4 * cs(10) + &a2 * cs(8);
    let v = a6.dot(&inner_v) + &a6 * cs(6) + &a4 * cs(4) + &a2 * cs(2) + &id * cs(0);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Checks the BLAS/LAPACK backend on a deterministic 192-dimensional real
/// symmetric and complex Hermitian matrix, large enough to reach the blocked
/// code paths. Returns the worst reconstruction error.
pub fn backend_self_test() -> Result<f64> {
    let d = 192;
    let mut worst: f64 = 0.0;
    for complex in [false, true] {
        let m = Matrix::from_shape_fn((d, d), |(i, j)| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            let sign = (j as f64 - i as f64).clamp(-1.0, 1.0);
            let im = if complex { (0.7 * a - 0.3 * b).sin() * sign } else { 0.0 };
            C64::new((1.3 * a + 0.17 * b * b).cos(), im)
        });
        let (w, v) = eigh(&m)?;
        let scaled = Matrix::from_shape_fn((d, d), |(i, k)| v[[i, k]] * w[k]);
        worst = worst.max(max_abs(&(scaled.dot(&dagger(&v)) - &m)));
    }
    if worst > 1e-9 {
        return Err(Error::IllConditioned(format!(
            "linear-algebra backend self-test failed (error {worst:.2e}); try setting OPENBLAS_CORETYPE=Haswell"
        )));
    }
    Ok(worst)
}
