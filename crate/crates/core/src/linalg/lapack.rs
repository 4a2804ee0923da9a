//! Thin FFI layer over the system LAPACK (OpenBLAS).
//!
//! Layout convention: all `Array2` in this crate are row-major. LAPACK reads
//! column-major, so a buffer we see as `M` it sees as `Mᵀ`. Every call below
//! either passes a symmetric matrix (transpose-invariant) or compensates by
//! flipping UPLO/TRANS flags; `dpotrf` with UPLO='U' on a symmetric buffer
//! therefore leaves the *lower* (row-major) triangle holding the factor `L`
//! with `L·Lᵀ = M`. RHS matrices are copied to Fortran order explicitly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

#[allow(clippy::too_many_arguments)]
extern "C" {
    fn openblas_set_num_threads(n: i32);
    fn dpotrf_(uplo: *const u8, n: *const i32, a: *mut f64, lda: *const i32, info: *mut i32);
    fn dpotri_(uplo: *const u8, n: *const i32, a: *mut f64, lda: *const i32, info: *mut i32);
    fn dpotrs_(
        uplo: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn dtrsv_(
        uplo: *const u8,
        trans: *const u8,
        diag: *const u8,
        n: *const i32,
        a: *const f64,
        lda: *const i32,
        x: *mut f64,
        incx: *const i32,
    );
    fn dgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn dgetri_(
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn dgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn dsyev_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
}

/// Pin the BLAS thread pool to one thread. Benchmark timing relies on this.
pub fn set_single_threaded() {
    unsafe { openblas_set_num_threads(1) };
}

fn as_contig(a: ArrayView2<'_, f64>) -> Array2<f64> {
    a.as_standard_layout().into_owned()
}

/// Column-major copy of a row-major matrix.
fn to_fortran(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let (r, c) = a.dim();
    let mut buf = vec![0.0; r * c];
    for j in 0..c {
        for i in 0..r {
            buf[j * r + i] = a[(i, j)];
        }
    }
    buf
}

fn from_fortran(buf: &[f64], r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |(i, j)| buf[j * r + i])
}

/// In-place Cholesky of a symmetric buffer. On success the lower (row-major)
/// triangle holds `L`, the strict upper is zeroed. On failure returns the
/// 1-based pivot index and the offending pivot value.
pub fn cholesky_lower(a: ArrayView2<'_, f64>) -> Result<Array2<f64>, (usize, f64)> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let mut buf = as_contig(a);
    let nn = n as i32;
    let mut info = 0i32;
    unsafe {
        dpotrf_(
            b"U".as_ptr(),
            &nn,
            buf.as_slice_mut().unwrap().as_mut_ptr(),
            &nn,
            &mut info,
        )
    };
    if info > 0 {
        let k = info as usize;
        return Err((k, buf[(k - 1, k - 1)]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            buf[(i, j)] = 0.0;
        }
    }
    Ok(buf)
}

/// Solve `L x = b` (forward) or `Lᵀ x = b` (backward) for a lower factor.
pub fn tri_solve_vec(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, upper: bool) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    if n == 0 {
        return x;
    }
    let lc = as_contig(l);
    let nn = n as i32;
    let one = 1i32;
    // row-major L viewed column-major is Lᵀ (upper): flip TRANS accordingly
    let trans = if upper { b"N" } else { b"T" };
    unsafe {
        dtrsv_(
            b"U".as_ptr(),
            trans.as_ptr(),
            b"N".as_ptr(),
            &nn,
            lc.as_slice().unwrap().as_ptr(),
            &nn,
            x.as_slice_mut().unwrap().as_mut_ptr(),
            &one,
        )
    };
    x
}

/// Solve `L Lᵀ x = b` for a single right-hand side.
pub fn chol_solve_vec(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let y = tri_solve_vec(l, b, false);
    tri_solve_vec(l, y.view(), true)
}

/// Solve `L Lᵀ X = B` for a matrix right-hand side via `dpotrs`.
pub fn chol_solve_mat(l: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = l.nrows();
    let m = b.ncols();
    if n == 0 || m == 0 {
        return Array2::zeros((n, m));
    }
    let lc = as_contig(l);
    let mut bf = to_fortran(b);
    let nn = n as i32;
    let mm = m as i32;
    let mut info = 0i32;
    unsafe {
        dpotrs_(
            b"U".as_ptr(),
            &nn,
            &mm,
            lc.as_slice().unwrap().as_ptr(),
            &nn,
            bf.as_mut_ptr(),
            &nn,
            &mut info,
        )
    };
    debug_assert_eq!(info, 0);
    from_fortran(&bf, n, m)
}

/// Inverse of an SPD matrix from its lower Cholesky factor (`dpotri`).
pub fn spd_inverse_from_chol(l: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = l.nrows();
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let mut buf = as_contig(l);
    let nn = n as i32;
    let mut info = 0i32;
    unsafe {
        dpotri_(
            b"U".as_ptr(),
            &nn,
            buf.as_slice_mut().unwrap().as_mut_ptr(),
            &nn,
            &mut info,
        )
    };
    debug_assert_eq!(info, 0);
    // filled triangle is the lower one in row-major terms; mirror it
    for i in 0..n {
        for j in (i + 1)..n {
            buf[(i, j)] = buf[(j, i)];
        }
    }
    buf
}

/// General inverse via LU (`dgetrf`/`dgetri`). `Err(())` when singular.
pub fn lu_inverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>, ()> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let mut buf = to_fortran(a);
    let nn = n as i32;
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe { dgetrf_(&nn, &nn, buf.as_mut_ptr(), &nn, ipiv.as_mut_ptr(), &mut info) };
    if info != 0 {
        return Err(());
    }
    let mut wkopt = 0.0f64;
    let query = -1i32;
    unsafe {
        dgetri_(
            &nn,
            buf.as_mut_ptr(),
            &nn,
            ipiv.as_ptr(),
            &mut wkopt,
            &query,
            &mut info,
        )
    };
    let lwork = wkopt as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dgetri_(
            &nn,
            buf.as_mut_ptr(),
            &nn,
            ipiv.as_ptr(),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        )
    };
    if info != 0 {
        return Err(());
    }
    Ok(from_fortran(&buf, n, n))
}

/// LU factorization with stored pivots, for repeated solves of one system.
pub struct LuFactors {
    buf: Vec<f64>,
    ipiv: Vec<i32>,
    n: usize,
}

pub fn lu_factor(a: ArrayView2<'_, f64>) -> Result<LuFactors, ()> {
    let n = a.nrows();
    let mut buf = to_fortran(a);
    let nn = n as i32;
    let mut ipiv = vec![0i32; n.max(1)];
    let mut info = 0i32;
    if n > 0 {
        unsafe { dgetrf_(&nn, &nn, buf.as_mut_ptr(), &nn, ipiv.as_mut_ptr(), &mut info) };
    }
    if info != 0 {
        return Err(());
    }
    Ok(LuFactors { buf, ipiv, n })
}

impl LuFactors {
    pub fn solve_vec(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut x = b.to_owned();
        if self.n == 0 {
            return x;
        }
        let nn = self.n as i32;
        let one = 1i32;
        let mut info = 0i32;
        unsafe {
            dgetrs_(
                b"N".as_ptr(),
                &nn,
                &one,
                self.buf.as_ptr(),
                &nn,
                self.ipiv.as_ptr(),
                x.as_slice_mut().unwrap().as_mut_ptr(),
                &nn,
                &mut info,
            )
        };
        debug_assert_eq!(info, 0);
        x
    }
}

/// Eigenvalues (ascending) of a symmetric matrix via `dsyev`.
pub fn sym_eigvals(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = as_contig(a);
    let nn = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let mut wkopt = 0.0f64;
    let query = -1i32;
    unsafe {
        dsyev_(
            b"N".as_ptr(),
            b"U".as_ptr(),
            &nn,
            buf.as_slice_mut().unwrap().as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            &mut wkopt,
            &query,
            &mut info,
        )
    };
    let lwork = wkopt as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dsyev_(
            b"N".as_ptr(),
            b"U".as_ptr(),
            &nn,
            buf.as_slice_mut().unwrap().as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        )
    };
    debug_assert_eq!(info, 0);
    w
}
