//! Exact integer linear algebra on small dense matrices: Smith normal form,
//! Hermite reduction, integer kernels, and column-lattice membership.
//!
//! Matrices here are at most ~8x8 with single-digit entries, so plain `i64`
//! with checked ops is plenty. Every transformation matrix is kept unimodular.

pub type Mat = Vec<Vec<i64>>;

fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

fn checked_addmul(a: i64, b: i64, c: i64) -> i64 {
    // a + b*c with overflow panics; inputs stay tiny in practice
    a.checked_add(b.checked_mul(c).expect("intlin overflow")).expect("intlin overflow")
}

/// Result of the Smith decomposition `U * A * V = D` with `U`, `V` unimodular
/// and `D` diagonal (stored as `diag`, invariant factors in division order).
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub u: Mat,
    pub v: Mat,
    pub diag: Vec<i64>,
    pub rank: usize,
    pub rows: usize,
    pub cols: usize,
}

struct SnfWork {
    m: Mat,
    u: Mat,
    v: Mat,
    rows: usize,
    cols: usize,
}

impl SnfWork {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.m.swap(i, j);
        self.u.swap(i, j);
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        for row in self.m.iter_mut() {
            row.swap(i, j);
        }
        for row in self.v.iter_mut() {
            row.swap(i, j);
        }
    }

    /// row_i -= q * row_t
    fn row_sub(&mut self, i: usize, t: usize, q: i64) {
        for j in 0..self.cols {
            self.m[i][j] = checked_addmul(self.m[i][j], -q, self.m[t][j]);
        }
        for j in 0..self.rows {
            self.u[i][j] = checked_addmul(self.u[i][j], -q, self.u[t][j]);
        }
    }

    /// col_j -= q * col_t
    fn col_sub(&mut self, j: usize, t: usize, q: i64) {
        for i in 0..self.rows {
            self.m[i][j] = checked_addmul(self.m[i][j], -q, self.m[i][t]);
        }
        for i in 0..self.cols {
            self.v[i][j] = checked_addmul(self.v[i][j], -q, self.v[i][t]);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            self.m[i][j] = -self.m[i][j];
        }
        for j in 0..self.rows {
            self.u[i][j] = -self.u[i][j];
        }
    }

    /// Diagonalize the trailing block starting at `start`.
    fn diagonalize_from(&mut self, start: usize) {
        let dim = self.rows.min(self.cols);
        let mut t = start;
        while t < dim {
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..self.rows {
                for j in t..self.cols {
                    if self.m[i][j] != 0
                        && pivot.map_or(true, |(pi, pj)| {
                            self.m[i][j].abs() < self.m[pi][pj].abs()
                        })
                    {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else { break };
            self.swap_rows(t, pi);
            self.swap_cols(t, pj);

            let mut clean = false;
            while !clean {
                clean = true;
                for i in t + 1..self.rows {
                    if self.m[i][t] != 0 {
                        let q = self.m[i][t].div_euclid(self.m[t][t]);
                        self.row_sub(i, t, q);
                        if self.m[i][t] != 0 {
                            self.swap_rows(t, i);
                            clean = false;
                        }
                    }
                }
                for j in t + 1..self.cols {
                    if self.m[t][j] != 0 {
                        let q = self.m[t][j].div_euclid(self.m[t][t]);
                        self.col_sub(j, t, q);
                        if self.m[t][j] != 0 {
                            self.swap_cols(t, j);
                            clean = false;
                        }
                    }
                }
            }
            if self.m[t][t] < 0 {
                self.negate_row(t);
            }
            t += 1;
        }
    }
}

pub fn smith_normal_form(a: &Mat) -> SmithForm {
    let rows = a.len();
    let cols = if rows > 0 { a[0].len() } else { 0 };
    let mut w = SnfWork { m: a.clone(), u: identity(rows), v: identity(cols), rows, cols };
    w.diagonalize_from(0);

    // Enforce the divisibility chain: fold a violating d_{i+1} into column i
    // and re-diagonalize from i.
    let dim = rows.min(cols);
    loop {
        let mut violation = None;
        for i in 0..dim.saturating_sub(1) {
            let (d1, d2) = (w.m[i][i], w.m[i + 1][i + 1]);
            if d1 != 0 && d2 != 0 && d2 % d1 != 0 {
                violation = Some(i);
                break;
            }
        }
        let Some(i) = violation else { break };
        w.col_sub(i, i + 1, -1); // col_i += col_{i+1}
        w.diagonalize_from(i);
    }

    let diag: Vec<i64> = (0..dim).map(|i| w.m[i][i]).collect();
    let rank = diag.iter().filter(|&&d| d != 0).count();
    SmithForm { u: w.u, v: w.v, diag, rank, rows, cols }
}

pub fn mat_vec(a: &Mat, x: &[i64]) -> Vec<i64> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(0i64, |acc, (&r, &xi)| checked_addmul(acc, r, xi)))
        .collect()
}

/// Membership test for the column lattice of a fixed integer matrix,
/// precomputed from its Smith form so each query is a matrix-vector product.
#[derive(Debug, Clone)]
pub struct LatticeMembership {
    u: Mat,
    diag: Vec<i64>,
    rows: usize,
}

impl LatticeMembership {
    pub fn new(a: &Mat) -> Self {
        let snf = smith_normal_form(a);
        LatticeMembership { u: snf.u, diag: snf.diag, rows: snf.rows }
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        assert_eq!(x.len(), self.rows, "vector length mismatch");
        let z = mat_vec(&self.u, x);
        for (i, &zi) in z.iter().enumerate() {
            let d = self.diag.get(i).copied().unwrap_or(0);
            if d == 0 {
                if zi != 0 {
                    return false;
                }
            } else if zi % d != 0 {
                return false;
            }
        }
        true
    }
}

/// Basis of the integer kernel {x : A x = 0}, Hermite-reduced so the output
/// is deterministic.
pub fn kernel_basis(a: &Mat) -> Vec<Vec<i64>> {
    let snf = smith_normal_form(a);
    let cols = snf.cols;
    let mut basis: Vec<Vec<i64>> = Vec::new();
    for j in snf.rank..cols {
        let col: Vec<i64> = (0..cols).map(|i| snf.v[i][j]).collect();
        basis.push(col);
    }
    hermite_reduce_rows(&mut basis);
    basis
}

/// In-place row Hermite normal form: echelon with positive pivots, entries
/// above each pivot reduced into [0, pivot).
pub fn hermite_reduce_rows(rows: &mut Vec<Vec<i64>>) {
    if rows.is_empty() {
        return;
    }
    let ncols = rows[0].len();
    let mut pivot_row = 0;
    for col in 0..ncols {
        loop {
            let mut best: Option<usize> = None;
            for r in pivot_row..rows.len() {
                if rows[r][col] != 0
                    && best.map_or(true, |b| rows[r][col].abs() < rows[b][col].abs())
                {
                    best = Some(r);
                }
            }
            let Some(b) = best else { break };
            rows.swap(pivot_row, b);
            let mut done = true;
            for r in pivot_row + 1..rows.len() {
                if rows[r][col] != 0 {
                    let q = rows[r][col].div_euclid(rows[pivot_row][col]);
                    for c in 0..ncols {
                        rows[r][c] = checked_addmul(rows[r][c], -q, rows[pivot_row][c]);
                    }
                    if rows[r][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if pivot_row < rows.len() && rows[pivot_row][col] != 0 {
            if rows[pivot_row][col] < 0 {
                for c in 0..ncols {
                    rows[pivot_row][c] = -rows[pivot_row][c];
                }
            }
            let piv = rows[pivot_row][col];
            for r in 0..pivot_row {
                let q = rows[r][col].div_euclid(piv);
                if q != 0 {
                    for c in 0..ncols {
                        rows[r][c] = checked_addmul(rows[r][c], -q, rows[pivot_row][c]);
                    }
                }
            }
            pivot_row += 1;
        }
    }
    rows.retain(|r| r.iter().any(|&x| x != 0));
}
