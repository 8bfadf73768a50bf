//! Sparse exact linear algebra over [`Scalar`].
//!
//! Matrices are stored as sorted sparse rows. All elimination is Gauss-Jordan
//! with normalized pivots: every pivot row is divided by its leading entry as
//! soon as it is chosen, so each stored coordinate is a reduced fraction and
//! the only divisions performed are by pivots. Among the rows eligible for a
//! pivot, the sparsest is taken to limit fill-in.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A sparse vector: strictly increasing column indices, no stored zeros.
pub type SparseVec = Vec<(usize, Scalar)>;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<SparseVec>,
}

/// `a + c * b` for sparse vectors.
pub fn axpy(a: &SparseVec, c: &Scalar, b: &SparseVec) -> SparseVec {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ca = a.get(i).map(|e| e.0).unwrap_or(usize::MAX);
        let cb = b.get(j).map(|e| e.0).unwrap_or(usize::MAX);
        if ca < cb {
            out.push(a[i].clone());
            i += 1;
        } else if cb < ca {
            out.push((cb, c * &b[j].1));
            j += 1;
        } else {
            let v = &a[i].1 + &(c * &b[j].1);
            if !v.is_zero() {
                out.push((ca, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

pub fn scale_vec(v: &SparseVec, c: &Scalar) -> SparseVec {
    if c.is_zero() {
        return Vec::new();
    }
    v.iter().map(|(k, x)| (*k, x * c)).collect()
}

fn lookup(v: &SparseVec, col: usize) -> Option<&Scalar> {
    v.binary_search_by_key(&col, |e| e.0).ok().map(|k| &v[k].1)
}

/// Converts a dense vector to sparse form.
pub fn sparse_from_dense(v: &[Scalar]) -> SparseVec {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(k, x)| (k, x.clone())).collect()
}

pub fn dense_from_sparse(v: &SparseVec, len: usize) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); len];
    for (k, x) in v {
        out[*k] = x.clone();
    }
    out
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triples. Zero values are
    /// dropped; out-of-range or repeated positions are shape errors.
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, Scalar)>) -> Result<Self> {
        let mut data: Vec<SparseVec> = vec![Vec::new(); rows];
        for (r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(Error::Shape(format!("entry ({r}, {c}) outside a {rows}x{cols} matrix")));
            }
            if !v.is_zero() {
                data[r].push((c, v));
            }
        }
        for (r, row) in data.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Shape(format!("repeated entry in row {r}")));
            }
        }
        Ok(SparseMatrix { rows, cols, data })
    }

    /// Builds a matrix from triples, summing repeated positions.
    pub fn accumulate(rows: usize, cols: usize, entries: impl IntoIterator<Item = (usize, usize, Scalar)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, Scalar>> = vec![BTreeMap::new(); rows];
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "entry ({r}, {c}) outside {rows}x{cols}");
            *acc[r].entry(c).or_default() += &v;
        }
        let data = acc.into_iter().map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect()).collect();
        SparseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, data: vec![Vec::new(); rows] }
    }

    pub fn identity(n: usize) -> Self {
        let data = (0..n).map(|k| vec![(k, Scalar::one())]).collect();
        SparseMatrix { rows: n, cols: n, data }
    }

    pub fn from_dense(rows: &[Vec<Scalar>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged dense matrix".into()));
        }
        let data = rows.iter().map(|r| sparse_from_dense(r)).collect();
        Ok(SparseMatrix { rows: rows.len(), cols, data })
    }

    /// Builds a matrix whose columns are the given sparse vectors.
    pub fn from_columns(rows: usize, columns: &[SparseVec]) -> Self {
        let mut data: Vec<SparseVec> = vec![Vec::new(); rows];
        for (c, col) in columns.iter().enumerate() {
            for (r, v) in col {
                data[*r].push((c, v.clone()));
            }
        }
        SparseMatrix { rows, cols: columns.len(), data }
    }

    pub fn from_rows(cols: usize, rows: Vec<SparseVec>) -> Self {
        SparseMatrix { rows: rows.len(), cols, data: rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &SparseVec {
        &self.data[r]
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Vec::is_empty)
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        lookup(&self.data[r], c).cloned().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        self.data.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |(c, v)| (r, *c, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<Scalar>> {
        self.data.iter().map(|r| dense_from_sparse(r, self.cols)).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut data: Vec<SparseVec> = vec![Vec::new(); self.cols];
        for (r, row) in self.data.iter().enumerate() {
            for (c, v) in row {
                data[*c].push((r, v.clone()));
            }
        }
        SparseMatrix { rows: self.cols, cols: self.rows, data }
    }

    /// Column `c` as a sparse vector.
    pub fn column(&self, c: usize) -> SparseVec {
        self.data.iter().enumerate().filter_map(|(r, row)| lookup(row, c).map(|v| (r, v.clone()))).collect()
    }

    pub fn mul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .map(|row| {
                let mut acc: SparseVec = Vec::new();
                for (k, v) in row {
                    acc = axpy(&acc, v, &other.data[*k]);
                }
                acc
            })
            .collect();
        Ok(SparseMatrix { rows: self.rows, cols: other.cols, data })
    }

    pub fn mul_vec(&self, v: &SparseVec) -> SparseVec {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(r, row)| {
                let mut s = Scalar::zero();
                let (mut i, mut j) = (0, 0);
                while i < row.len() && j < v.len() {
                    match row[i].0.cmp(&v[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            s += &(&row[i].1 * &v[j].1);
                            i += 1;
                            j += 1;
                        }
                    }
                }
                (!s.is_zero()).then_some((r, s))
            })
            .collect()
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("cannot add matrices of different shapes".into()));
        }
        let one = Scalar::one();
        let data = self.data.iter().zip(&other.data).map(|(a, b)| axpy(a, &one, b)).collect();
        Ok(SparseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, c: &Scalar) -> SparseMatrix {
        let data = self.data.iter().map(|r| scale_vec(r, c)).collect();
        SparseMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Restricts to the given rows and columns, renumbering both in order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut colmap = vec![usize::MAX; self.cols];
        for (k, &c) in cols.iter().enumerate() {
            colmap[c] = k;
        }
        let data = rows
            .iter()
            .map(|&r| {
                let mut v: SparseVec = self.data[r]
                    .iter()
                    .filter(|(c, _)| colmap[*c] != usize::MAX)
                    .map(|(c, x)| (colmap[*c], x.clone()))
                    .collect();
                v.sort_by_key(|e| e.0);
                v
            })
            .collect();
        SparseMatrix { rows: rows.len(), cols: cols.len(), data }
    }

    /// Permutes columns: new column `k` is old column `order[k]`.
    pub fn permute_columns(&self, order: &[usize]) -> SparseMatrix {
        assert_eq!(order.len(), self.cols);
        let rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&rows, order)
    }

    /// Reduced row echelon form.
    pub fn rref(&self) -> Rref {
        Rref::of(self)
    }

    pub fn rank(&self) -> usize {
        self.rref().pivots.len()
    }

    /// The rank together with a basis of the kernel.
    pub fn rank_kernel(&self) -> (usize, Vec<SparseVec>) {
        let r = self.rref();
        let kernel = r.kernel_basis();
        (r.pivots.len(), kernel)
    }

    /// Solves `self * x = b`, returning one solution if any exists.
    pub fn solve(&self, b: &SparseVec) -> Option<SparseVec> {
        self.solve_many(std::slice::from_ref(b)).pop().unwrap()
    }

    /// Solves `self * x = b` for each right-hand side.
    pub fn solve_many(&self, bs: &[SparseVec]) -> Vec<Option<SparseVec>> {
        let n = self.cols;
        let mut aug = self.data.clone();
        for (k, b) in bs.iter().enumerate() {
            for (r, v) in b {
                aug[*r].push((n + k, v.clone()));
            }
        }
        let r = Rref::of(&SparseMatrix { rows: self.rows, cols: n + bs.len(), data: aug });
        let mut out: Vec<Option<SparseVec>> = vec![Some(Vec::new()); bs.len()];
        for (row, &p) in r.rows.iter().zip(&r.pivots) {
            if p >= n {
                out[p - n] = None;
                continue;
            }
            for (c, v) in row.iter().filter(|e| e.0 >= n) {
                if let Some(x) = out[c - n].as_mut() {
                    x.push((p, v.clone()));
                }
            }
        }
        for x in out.iter_mut().flatten() {
            x.sort_by_key(|e| e.0);
        }
        out
    }
}

/// Reduced row echelon form of a matrix: nonzero rows, each with leading
/// coefficient one at column `pivots[k]`, and zero above and below.
#[derive(Clone, Debug)]
pub struct Rref {
    pub cols: usize,
    pub rows: Vec<SparseVec>,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn of(m: &SparseMatrix) -> Rref {
        let mut pending: Vec<SparseVec> = m.data.iter().filter(|r| !r.is_empty()).cloned().collect();
        let mut done: Vec<(usize, SparseVec)> = Vec::new();
        while !pending.is_empty() {
            // Leftmost column still present in a pending row.
            let col = pending.iter().map(|r| r[0].0).min().unwrap();
            let (best, _) =
                pending.iter().enumerate().filter(|(_, r)| r[0].0 == col).min_by_key(|(_, r)| r.len()).unwrap();
            let row = pending.swap_remove(best);
            let inv = row[0].1.inv().expect("stored entries are nonzero");
            let row = scale_vec(&row, &inv);
            for other in pending.iter_mut() {
                if other[0].0 == col {
                    let c = -&other[0].1;
                    *other = axpy(other, &c, &row);
                }
            }
            pending.retain(|r| !r.is_empty());
            for (_, other) in done.iter_mut() {
                if let Some(v) = lookup(other, col) {
                    let c = -v;
                    *other = axpy(other, &c, &row);
                }
            }
            done.push((col, row));
        }
        let (pivots, rows) = done.into_iter().unzip();
        Rref { cols: m.cols, rows, pivots }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn kernel_basis(&self) -> Vec<SparseVec> {
        let mut is_pivot = vec![false; self.cols];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        (0..self.cols)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v: SparseVec = vec![(f, Scalar::one())];
                for (row, &p) in self.rows.iter().zip(&self.pivots) {
                    if let Some(x) = lookup(row, f) {
                        v.push((p, -x));
                    }
                }
                v.sort_by_key(|e| e.0);
                v
            })
            .collect()
    }
}

/// A subspace of `Scalar^n` held as an echelon basis keyed by pivot column.
#[derive(Clone, Debug, Default)]
pub struct Subspace {
    basis: BTreeMap<usize, SparseVec>,
}

impl Subspace {
    pub fn new() -> Self {
        Subspace::default()
    }

    pub fn spanned_by<'a>(vs: impl IntoIterator<Item = &'a SparseVec>) -> Self {
        let mut s = Subspace::new();
        for v in vs {
            s.insert(v.clone());
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Reduces `v` modulo the subspace. The residual is zero iff `v` lies in it.
    pub fn reduce(&self, mut v: SparseVec) -> SparseVec {
        let mut cursor = 0;
        loop {
            let next = v.iter().find(|(c, _)| *c >= cursor && self.basis.contains_key(c));
            let Some((c, x)) = next else { return v };
            let c = *c;
            let coef = -x;
            v = axpy(&v, &coef, &self.basis[&c]);
            cursor = c + 1;
        }
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v.clone()).is_empty()
    }

    /// Adds `v` to the spanning set; returns whether the dimension grew.
    pub fn insert(&mut self, v: SparseVec) -> bool {
        let r = self.reduce(v);
        if r.is_empty() {
            return false;
        }
        let inv = r[0].1.inv().unwrap();
        let r = scale_vec(&r, &inv);
        self.basis.insert(r[0].0, r);
        true
    }

    pub fn basis(&self) -> impl Iterator<Item = &SparseVec> {
        self.basis.values()
    }
}

/// Dimension of `ker(d_out) / im(d_in)` for composable maps
/// `U --d_in--> V --d_out--> W`. Errors if `d_out * d_in` is nonzero.
pub fn quotient_dim(d_out: &SparseMatrix, d_in: &SparseMatrix) -> Result<usize> {
    if d_out.cols() != d_in.rows() {
        return Err(Error::Shape(format!(
            "maps do not compose: {}x{} after {}x{}",
            d_out.rows(),
            d_out.cols(),
            d_in.rows(),
            d_in.cols()
        )));
    }
    let comp = d_out.mul(d_in)?;
    if !comp.is_zero() {
        let (r, c, _) = comp.entries().next().unwrap();
        return Err(Error::ComplexViolation(format!(
            "image is not contained in the kernel (composite entry ({r}, {c}) is nonzero)"
        )));
    }
    let ker = d_out.cols() - d_out.rank();
    let im = d_in.rank();
    Ok(ker - im)
}

/// Rank of the map induced on cohomology by a chain map `f: V -> V'`, where
/// `d_out: V -> W` and `d_in': U' -> V'` are the adjacent differentials.
pub fn induced_rank(f: &SparseMatrix, d_out: &SparseMatrix, d_in_target: &SparseMatrix) -> Result<usize> {
    if f.cols() != d_out.cols() || f.rows() != d_in_target.rows() {
        return Err(Error::Shape(format!(
            "chain map {}x{} does not fit between differentials on {} and {}",
            f.rows(),
            f.cols(),
            d_out.cols(),
            d_in_target.rows()
        )));
    }
    let (_, cycles) = d_out.rank_kernel();
    let mut span = Subspace::spanned_by(&(0..d_in_target.cols()).map(|c| d_in_target.column(c)).collect::<Vec<_>>());
    let base = span.dim();
    for z in &cycles {
        span.insert(f.mul_vec(z));
    }
    Ok(span.dim() - base)
}
