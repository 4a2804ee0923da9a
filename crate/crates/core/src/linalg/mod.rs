//! Dense symmetric linear algebra: block extraction, Schur-complement
//! inversion over arbitrary index splits, Cholesky factorization and
//! triangular solves. Everything downstream (predictors, cross-validation,
//! criteria) is assembled from these kernels.
//!
//! Index vectors are 1-based at the API boundary, matching the usual
//! block-matrix notation `M[i, j]`; storage is 0-based internally.

pub mod lapack;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub use lapack::set_single_threaded;

/// Relative pivot floor for Cholesky positive-definiteness detection:
/// a pivot at or below `PIVOT_FLOOR_REL * max(diag)` fails the factorization.
pub const PIVOT_FLOOR_REL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// index vectors

/// Strictly ascending, non-empty vector of 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVector(Vec<usize>);

impl IndexVector {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::BadIndexVector {
                reason: "empty".into(),
            });
        }
        if indices[0] == 0 {
            return Err(Error::BadIndexVector {
                reason: "indices are 1-based; got 0".into(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadIndexVector {
                reason: format!("not strictly ascending: {indices:?}"),
            });
        }
        Ok(Self(indices))
    }

    /// The full index vector `(1, …, n)`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new((1..=n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    /// 1-based entries.
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// 0-based entries for internal indexing.
    pub fn zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|&i| i - 1).collect()
    }

    pub fn max_index(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn check_within(&self, dim: usize) -> Result<()> {
        if self.max_index() > dim {
            return Err(Error::IndexOutOfRange {
                index: self.max_index(),
                dim,
            });
        }
        Ok(())
    }

    /// Complement `−i` against order `n`, as 0-based indices (possibly empty).
    pub fn complement_zero_based(&self, n: usize) -> Result<Vec<usize>> {
        self.check_within(n)?;
        let mut mask = vec![true; n];
        for &i in &self.0 {
            mask[i - 1] = false;
        }
        Ok((0..n).filter(|&i| mask[i]).collect())
    }

    /// Complement `−i` as an `IndexVector`; errors when the complement is empty.
    pub fn complement(&self, n: usize) -> Result<IndexVector> {
        let c = self.complement_zero_based(n)?;
        IndexVector::new(c.into_iter().map(|i| i + 1).collect())
    }
}

// ---------------------------------------------------------------------------
// matrices

/// Dense symmetric matrix, symmetry enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    /// Ingest an external square matrix, symmetrizing `(M + Mᵀ)/2` to guard
    /// against round-trip noise.
    pub fn from_array(m: Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimensionMismatch {
                context: "symmetric matrix must be square",
                got: c,
                expected: r,
            });
        }
        if r == 0 {
            return Err(Error::InvalidParameter("matrix order must be >= 1".into()));
        }
        let mut data = m;
        for i in 0..r {
            for j in (i + 1)..r {
                let v = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Ok(Self { data })
    }

    /// Build a symmetric matrix from `f(i, j)` evaluated on `i <= j` (0-based).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: Array2::eye(n),
        }
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// Largest diagonal entry (pivot-floor reference).
    pub fn max_diag(&self) -> f64 {
        (0..self.order())
            .map(|i| self.data[(i, i)])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Inverse through LU; errors on singular input.
    pub fn lu_inverse(&self) -> Result<SymMatrix> {
        let inv = lapack::lu_inverse(self.view()).map_err(|()| Error::SingularBlock {
            block: "full matrix",
        })?;
        SymMatrix::from_array(inv)
    }

    /// Eigenvalues in ascending order.
    pub fn eigvals(&self) -> Vec<f64> {
        lapack::sym_eigvals(self.view())
    }
}

/// Lower-triangular Cholesky factor with `L·Lᵀ = K`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: Array2<f64>,
}

impl CholFactor {
    pub fn order(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> ArrayView2<'_, f64> {
        self.l.view()
    }

    /// Solve `L Lᵀ x = b`.
    pub fn solve_vec(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        lapack::chol_solve_vec(self.l.view(), b)
    }

    /// Solve `L Lᵀ X = B`.
    pub fn solve_mat(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        lapack::chol_solve_mat(self.l.view(), b)
    }

    /// Inverse of `K` from the factor (`dpotri`).
    pub fn inverse(&self) -> Array2<f64> {
        lapack::spd_inverse_from_chol(self.l.view())
    }

    /// `log det K = 2 Σ log L[k,k]`, overflow-safe at any order.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.order()).map(|k| self.l[(k, k)].ln()).sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// operations

/// Extract the block `M[rows, cols]` from a general matrix.
pub fn extract_block(
    m: ArrayView2<'_, f64>,
    rows: &IndexVector,
    cols: &IndexVector,
) -> Result<Array2<f64>> {
    rows.check_within(m.nrows())?;
    cols.check_within(m.ncols())?;
    let r = rows.zero_based();
    let c = cols.zero_based();
    Ok(gather(m, &r, &c))
}

/// 0-based gather, used pervasively by the fold machinery.
pub(crate) fn gather(m: ArrayView2<'_, f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| m[(rows[i], cols[j])])
}

pub(crate) fn gather_vec(v: ArrayView1<'_, f64>, idx: &[usize]) -> Array1<f64> {
    Array1::from_iter(idx.iter().map(|&i| v[i]))
}

/// Which block is inverted directly inside the Schur inversion: the
/// complement block `M[−split]` (with the Schur complement of it carrying
/// `M⁻¹[split]`), or the split block `M[split]` (the variant form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurPivot {
    Complement,
    Split,
}

/// Invert a symmetric matrix through the four-block Schur formula on an
/// arbitrary index split. `schur_invert` prefers pivoting on the complement
/// block and falls back to the split block when the complement is singular
/// (e.g. the zero corner of a bordered trend system).
pub fn schur_invert(m: &SymMatrix, split: &IndexVector) -> Result<SymMatrix> {
    match schur_invert_via(m, split, SchurPivot::Complement) {
        Ok(inv) => Ok(inv),
        Err(Error::SingularBlock { .. }) => schur_invert_via(m, split, SchurPivot::Split),
        Err(e) => Err(e),
    }
}

pub fn schur_invert_via(m: &SymMatrix, split: &IndexVector, pivot: SchurPivot) -> Result<SymMatrix> {
    let n = m.order();
    split.check_within(n)?;
    let s = split.zero_based();
    let c = split.complement_zero_based(n)?;
    if c.is_empty() {
        // split covers everything: plain inverse
        return m.lu_inverse();
    }

    let mv = m.view();
    let a = gather(mv, &s, &s);
    let b = gather(mv, &s, &c);
    let d = gather(mv, &c, &c);

    let mut out = Array2::zeros((n, n));
    match pivot {
        SchurPivot::Complement => {
            let d_inv = lapack::lu_inverse(d.view()).map_err(|()| Error::SingularBlock {
                block: "complement",
            })?;
            let bd = b.dot(&d_inv); // B·D⁻¹
            let schur = &a - &bd.dot(&b.t()); // A − B·D⁻¹·C
            let schur_inv = lapack::lu_inverse(schur.view()).map_err(|()| Error::SingularBlock {
                block: "Schur complement of the complement block",
            })?;
            let tr = -schur_inv.dot(&bd);
            let br = &d_inv + &bd.t().dot(&schur_inv).dot(&bd);
            scatter(&mut out, &s, &s, &schur_inv);
            scatter(&mut out, &s, &c, &tr);
            scatter(&mut out, &c, &s, &tr.t().to_owned());
            scatter(&mut out, &c, &c, &br);
        }
        SchurPivot::Split => {
            let a_inv = lapack::lu_inverse(a.view()).map_err(|()| Error::SingularBlock {
                block: "split",
            })?;
            let ca = b.t().dot(&a_inv); // C·A⁻¹
            let schur = &d - &ca.dot(&b); // D − C·A⁻¹·B
            let schur_inv = lapack::lu_inverse(schur.view()).map_err(|()| Error::SingularBlock {
                block: "Schur complement of the split block",
            })?;
            let bl = -schur_inv.dot(&ca);
            let tl = &a_inv + &ca.t().dot(&schur_inv).dot(&ca);
            scatter(&mut out, &s, &s, &tl);
            scatter(&mut out, &s, &c, &bl.t().to_owned());
            scatter(&mut out, &c, &s, &bl);
            scatter(&mut out, &c, &c, &schur_inv);
        }
    }
    SymMatrix::from_array(out)
}

fn scatter(out: &mut Array2<f64>, rows: &[usize], cols: &[usize], block: &Array2<f64>) {
    for (bi, &i) in rows.iter().enumerate() {
        for (bj, &j) in cols.iter().enumerate() {
            out[(i, j)] = block[(bi, bj)];
        }
    }
}

/// Cholesky factorization with a scale-relative pivot floor: fails when a
/// pivot drops to or below `PIVOT_FLOOR_REL × max(diag K)`, reporting the
/// 1-based pivot index.
pub fn chol(k: &SymMatrix) -> Result<CholFactor> {
    let floor = PIVOT_FLOOR_REL * k.max_diag();
    let l = lapack::cholesky_lower(k.view())
        .map_err(|(pivot, value)| Error::NotPositiveDefinite { pivot, value })?;
    for idx in 0..l.nrows() {
        let pivot_val = l[(idx, idx)] * l[(idx, idx)];
        if pivot_val <= floor {
            return Err(Error::NotPositiveDefinite {
                pivot: idx + 1,
                value: pivot_val,
            });
        }
    }
    Ok(CholFactor { l })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriSide {
    /// Forward substitution against `L`.
    Lower,
    /// Back substitution against `Lᵀ`.
    Upper,
}

/// Triangular solve against the factor: `L x = b` (lower) or `Lᵀ x = b` (upper).
pub fn tri_solve(l: &CholFactor, b: ArrayView1<'_, f64>, side: TriSide) -> Result<Array1<f64>> {
    if b.len() != l.order() {
        return Err(Error::DimensionMismatch {
            context: "tri_solve rhs",
            got: b.len(),
            expected: l.order(),
        });
    }
    for k in 0..l.order() {
        if l.l[(k, k)] == 0.0 {
            return Err(Error::SingularTriangular { pos: k + 1 });
        }
    }
    Ok(lapack::tri_solve_vec(
        l.lower(),
        b,
        matches!(side, TriSide::Upper),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        let mut a = g.dot(&g.t());
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        SymMatrix::from_array(a).unwrap()
    }

    fn rel_frob(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let num: f64 = (a - b).iter().map(|v| v * v).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn extract_identity_block() {
        let m = SymMatrix::identity(3);
        let rows = IndexVector::new(vec![1, 3]).unwrap();
        let b = extract_block(m.view(), &rows, &rows).unwrap();
        assert_eq!(b, array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn extract_full_row() {
        let m = Array2::from_shape_fn((4, 4), |(i, j)| (i * 4 + j) as f64);
        let row = IndexVector::new(vec![2]).unwrap();
        let all = IndexVector::full(4).unwrap();
        let b = extract_block(m.view(), &row, &all).unwrap();
        assert_eq!(b, array![[4.0, 5.0, 6.0, 7.0]]);
    }

    #[test]
    fn complement_extraction_matches_deletion() {
        let m = random_spd(6, 42);
        let i = IndexVector::new(vec![2, 5]).unwrap();
        let comp = i.complement(6).unwrap();
        let b = extract_block(m.view(), &comp, &comp).unwrap();
        assert_eq!(b.nrows(), 4);
        // explicit deletion loop
        let keep: Vec<usize> = (0..6).filter(|&k| k != 1 && k != 4).collect();
        for (bi, &i0) in keep.iter().enumerate() {
            for (bj, &j0) in keep.iter().enumerate() {
                assert_eq!(b[(bi, bj)], m.get(i0, j0));
            }
        }
    }

    #[test]
    fn extract_out_of_range_errors() {
        let m = SymMatrix::identity(3);
        let rows = IndexVector::new(vec![1, 4]).unwrap();
        assert!(matches!(
            extract_block(m.view(), &rows, &rows),
            Err(Error::IndexOutOfRange { index: 4, dim: 3 })
        ));
    }

    #[test]
    fn schur_invert_identity() {
        let m = SymMatrix::identity(4);
        for split in [vec![1], vec![2, 3], vec![1, 4]] {
            let inv = schur_invert(&m, &IndexVector::new(split).unwrap()).unwrap();
            assert!(rel_frob(inv.as_array(), m.as_array()) < 1e-14);
        }
    }

    #[test]
    fn schur_invert_2x2_closed_form() {
        let m = SymMatrix::from_array(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let inv = schur_invert(&m, &IndexVector::new(vec![1]).unwrap()).unwrap();
        // direct 2x2 inverse: 1/(ad−bc) [[d,−b],[−c,a]]
        let expect = array![[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]];
        assert!(rel_frob(inv.as_array(), &expect) < 1e-14);
    }

    #[test]
    fn schur_invert_random_spd_vs_lu() {
        let m = random_spd(8, 7);
        let split = IndexVector::new(vec![2, 3, 7]).unwrap();
        let inv = schur_invert(&m, &split).unwrap();
        let full = m.lu_inverse().unwrap();
        assert!(rel_frob(inv.as_array(), full.as_array()) < 1e-12);
    }

    #[test]
    fn schur_invert_singular_block_reports() {
        // complement block is singular AND split route also fails: M singular
        let m = SymMatrix::from_array(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let err = schur_invert(&m, &IndexVector::new(vec![1]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SingularBlock { .. }));
    }

    #[test]
    fn schur_invert_zero_complement_falls_back() {
        // bordered system: complement block is exactly 0 but M invertible
        let m = SymMatrix::from_array(array![
            [2.0, 0.5, 1.0],
            [0.5, 3.0, 1.0],
            [1.0, 1.0, 0.0]
        ])
        .unwrap();
        let split = IndexVector::new(vec![1, 2]).unwrap();
        let inv = schur_invert(&m, &split).unwrap();
        let full = m.lu_inverse().unwrap();
        assert!(rel_frob(inv.as_array(), full.as_array()) < 1e-12);
    }

    #[test]
    fn binomial_inverse_consistency() {
        // top-left block agrees between the two pivoting routes
        for seed in 0..20u64 {
            let n = 6 + (seed as usize % 4);
            let m = random_spd(n, 1000 + seed);
            let split = IndexVector::new(vec![1, 3, n]).unwrap();
            let via_c = schur_invert_via(&m, &split, SchurPivot::Complement).unwrap();
            let via_s = schur_invert_via(&m, &split, SchurPivot::Split).unwrap();
            let bc = extract_block(via_c.view(), &split, &split).unwrap();
            let bs = extract_block(via_s.view(), &split, &split).unwrap();
            assert!(rel_frob(&bc, &bs) < 1e-11);
        }
    }

    #[test]
    fn horn_identity_on_random_spd() {
        // M⁻¹[i] = (M[i] − M[i,−i] M[−i]⁻¹ M[−i,i])⁻¹
        for seed in 0..20u64 {
            let n = 7;
            let m = random_spd(n, 2000 + seed);
            let i = IndexVector::new(vec![1, 4, 6]).unwrap();
            let c = i.complement(n).unwrap();
            let full_inv = m.lu_inverse().unwrap();
            let lhs = extract_block(full_inv.view(), &i, &i).unwrap();

            let mii = extract_block(m.view(), &i, &i).unwrap();
            let mic = extract_block(m.view(), &i, &c).unwrap();
            let mcc = extract_block(m.view(), &c, &c).unwrap();
            let mcc_inv = lapack::lu_inverse(mcc.view()).unwrap();
            let schur = &mii - &mic.dot(&mcc_inv).dot(&mic.t());
            let rhs = lapack::lu_inverse(schur.view()).unwrap();
            assert!(rel_frob(&lhs, &rhs) < 1e-11);
        }
    }

    #[test]
    fn schur_invert_all_splits_small_n() {
        // every one of the 2^n − 1 index vectors agrees with the full inverse
        for n in [4usize, 6, 8] {
            let m = random_spd(n, 55 + n as u64);
            let full = m.lu_inverse().unwrap();
            for mask in 1u32..(1 << n) {
                let idx: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
                let split = IndexVector::new(idx).unwrap();
                let inv = schur_invert(&m, &split).unwrap();
                assert!(
                    rel_frob(inv.as_array(), full.as_array()) < 1e-11,
                    "n={n} mask={mask:b}"
                );
            }
        }
    }

    #[test]
    fn chol_identity() {
        let l = chol(&SymMatrix::identity(5)).unwrap();
        let eye = Array2::eye(5);
        assert!(rel_frob(&l.lower().to_owned(), &eye) < 1e-15);
    }

    #[test]
    fn chol_hand_example() {
        let k = SymMatrix::from_array(array![[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = chol(&k).unwrap();
        let expect = array![[2.0, 0.0], [1.0, 2.0]];
        assert!(rel_frob(&l.lower().to_owned(), &expect) < 1e-14);
        let rec = l.lower().dot(&l.lower().t());
        assert!(rel_frob(&rec, k.as_array()) < 1e-14);
    }

    #[test]
    fn chol_rank_deficient_fails() {
        // rank-1 outer product, n = 3
        let v = array![1.0, 2.0, -1.0];
        let mut a = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = v[i] * v[j];
            }
        }
        let err = chol(&SymMatrix::from_array(a).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn chol_reconstruction_well_conditioned() {
        let k = random_spd(30, 99);
        let l = chol(&k).unwrap();
        let rec = l.lower().dot(&l.lower().t());
        assert!(rel_frob(&rec, k.as_array()) < 1e-12);
    }

    #[test]
    fn tri_solve_identity_and_hand() {
        let l = chol(&SymMatrix::identity(3)).unwrap();
        let b = array![1.0, -2.0, 0.5];
        let x = tri_solve(&l, b.view(), TriSide::Lower).unwrap();
        assert_eq!(x, b);

        let k = SymMatrix::from_array(array![[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = chol(&k).unwrap();
        let x = tri_solve(&l, array![2.0, 3.0].view(), TriSide::Lower).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chol_solve_vs_dense_inverse() {
        let k = random_spd(10, 3);
        let l = chol(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = Array1::from_shape_fn(10, |_| rng.gen_range(-1.0..1.0));
        let y = tri_solve(&l, b.view(), TriSide::Lower).unwrap();
        let x = tri_solve(&l, y.view(), TriSide::Upper).unwrap();
        let x_oracle = k.lu_inverse().unwrap().as_array().dot(&b);
        let diff: f64 = (&x - &x_oracle).iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm: f64 = x_oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-12);
    }
}
