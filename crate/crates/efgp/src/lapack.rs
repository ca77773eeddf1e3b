//! Thin wrappers over the system LAPACK (dsyev/dposv) for the dense
//! reference computations: symmetric eigenvalues and SPD solves.
//! Matrices are column-major, but every matrix we pass is symmetric, so
//! row-major callers need no transposition.

use crate::error::{EfgpError, Result};

extern "C" {
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
    fn dposv_(
        uplo: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *mut f64,
        lda: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
}

fn check_square(a: &[f64], n: usize) -> Result<i32> {
    if a.len() != n * n {
        return Err(EfgpError::Argument(format!(
            "matrix buffer holds {} entries, expected {n}x{n}",
            a.len()
        )));
    }
    i32::try_from(n)
        .map_err(|_| EfgpError::Resource(format!("dimension {n} exceeds LAPACK's index range")))
}

/// All eigenvalues of a symmetric matrix, ascending. Consumes the buffer.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let ni = check_square(&a, n)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut w = vec![0.0f64; n];
    let mut info: i32 = 0;
    // Workspace query, then the real call.
    let mut work_query = [0.0f64];
    unsafe {
        dsyev_(
            b"N".as_ptr(),
            b"L".as_ptr(),
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &-1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(EfgpError::Linalg(format!("dsyev workspace query failed: info = {info}")));
    }
    let lwork = (work_query[0] as usize).max(3 * n);
    let lwork_i = i32::try_from(lwork)
        .map_err(|_| EfgpError::Resource("eigen workspace exceeds index range".into()))?;
    let mut work = vec![0.0f64; lwork];
    unsafe {
        dsyev_(
            b"N".as_ptr(),
            b"L".as_ptr(),
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork_i,
            &mut info,
        );
    }
    if info != 0 {
        return Err(EfgpError::Linalg(format!(
            "symmetric eigensolve did not converge: info = {info}"
        )));
    }
    Ok(w)
}

/// Solve `A X = B` for symmetric positive definite `A` (Cholesky).
/// `b` holds `nrhs` columns of length `n`, column-major; the solution
/// replaces it.
pub fn spd_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize, nrhs: usize) -> Result<Vec<f64>> {
    let ni = check_square(&a, n)?;
    if b.len() != n * nrhs {
        return Err(EfgpError::Argument(format!(
            "rhs buffer holds {} entries, expected {n}x{nrhs}",
            b.len()
        )));
    }
    if n == 0 || nrhs == 0 {
        return Ok(b);
    }
    let nrhs_i = i32::try_from(nrhs)
        .map_err(|_| EfgpError::Resource("rhs count exceeds LAPACK's index range".into()))?;
    let mut info: i32 = 0;
    unsafe {
        dposv_(
            b"L".as_ptr(),
            &ni,
            &nrhs_i,
            a.as_mut_ptr(),
            &ni,
            b.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    if info > 0 {
        return Err(EfgpError::Linalg(format!(
            "matrix is not positive definite (leading minor {info})"
        )));
    }
    if info < 0 {
        return Err(EfgpError::Linalg(format!("dposv rejected argument {}", -info)));
    }
    Ok(b)
}
