//! Weighted normal equations for designs with one large fixed-effect factor.
//!
//! The columns of the largest factor are disjoint indicators, so their block
//! of `X'WX` is diagonal. Everything else (the dense terms and the dummies of
//! the remaining factors) is solved through the Schur complement
//! `S = A - C D^-1 C'`, whose inverse is also the dense block of `(X'WX)^-1`.

use ndarray::{Array1, Array2};

use super::design::Design;

/// Cholesky factor of a symmetric positive definite matrix, or `None`.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

pub fn chol_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

pub fn chol_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::zeros((n, n));
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    // symmetrize away rounding
    let t = inv.t().to_owned();
    (inv + t) * 0.5
}

/// Greedy selection of linearly independent columns of a Gram matrix in the
/// given order. A column is kept when its squared residual against the kept
/// ones exceeds `tol` times `reference[j]`.
pub fn independent_columns(
    gram: &Array2<f64>,
    reference: &[f64],
    order: &[usize],
    tol: f64,
) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    // rows of the growing Cholesky factor of gram[kept, kept]
    let mut l_rows: Vec<Vec<f64>> = Vec::new();
    for &j in order {
        if reference[j].is_nan() || reference[j] <= 0.0 {
            continue;
        }
        let mut v = Vec::with_capacity(kept.len());
        for (a, &ka) in kept.iter().enumerate() {
            let mut s = gram[(ka, j)];
            for (b, vb) in v.iter().enumerate() {
                s -= l_rows[a][b] * vb;
            }
            v.push(s / l_rows[a][a]);
        }
        let d = gram[(j, j)] - v.iter().map(|x| x * x).sum::<f64>();
        if d > tol * reference[j] {
            v.push(d.sqrt());
            l_rows.push(v);
            kept.push(j);
        }
    }
    kept
}

const ALIAS_TOL: f64 = 1e-9;

/// Column structure of a design after alias removal.
#[derive(Debug, Clone)]
pub struct BlockModel {
    pub n: usize,
    /// Number of dense term columns.
    pub q: usize,
    /// Factor absorbed into the diagonal block, if any.
    pub absorbed_factor: Option<usize>,
    /// Per row: index among the absorbed factor's non-reference levels.
    pub absorbed: Vec<Option<u32>>,
    pub n_absorbed: usize,
    /// Block columns beyond the dense terms: (factor, level).
    pub block_fe: Vec<(usize, u32)>,
    /// Active block columns, in block order.
    pub active: Vec<usize>,
    /// Block column -> active position.
    pub pos: Vec<Option<usize>>,
    indptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

/// Weighted cross products on the active columns.
#[derive(Debug, Clone)]
pub struct Normal {
    pub d: Vec<f64>,
    pub c: Array2<f64>,
    pub a: Array2<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

impl BlockModel {
    pub fn new(design: &Design) -> Self {
        let n = design.n();
        let q = design.terms.len();
        let absorbed_factor = design
            .fe
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.levels.len().cmp(&b.1.levels.len()).then(b.0.cmp(&a.0)))
            .map(|(f, _)| f);
        let (absorbed, n_absorbed) = match absorbed_factor {
            Some(f) => {
                let fac = &design.fe[f];
                (
                    fac.codes
                        .iter()
                        .map(|&c| (c > 0).then(|| c - 1))
                        .collect(),
                    fac.levels.len() - 1,
                )
            }
            None => (vec![None; n], 0),
        };
        let mut block_fe = Vec::new();
        let mut first_col = vec![0usize; design.fe.len()];
        for (f, fac) in design.fe.iter().enumerate() {
            if Some(f) == absorbed_factor {
                continue;
            }
            first_col[f] = q + block_fe.len();
            for level in 1..fac.levels.len() as u32 {
                block_fe.push((f, level));
            }
        }
        let p = q + block_fe.len();
        let mut model = BlockModel {
            n,
            q,
            absorbed_factor,
            absorbed,
            n_absorbed,
            block_fe,
            active: (0..p).collect(),
            pos: (0..p).map(Some).collect(),
            indptr: vec![],
            idx: vec![],
            val: vec![],
        };
        // sparse rows over all block columns
        let mut indptr = vec![0];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for r in 0..n {
            for j in 0..q {
                let v = design.x[(r, j)];
                if v != 0.0 {
                    idx.push(j as u32);
                    val.push(v);
                }
            }
            for (f, fac) in design.fe.iter().enumerate() {
                if Some(f) == absorbed_factor || fac.codes[r] == 0 {
                    continue;
                }
                idx.push((first_col[f] + fac.codes[r] as usize - 1) as u32);
                val.push(1.0);
            }
            indptr.push(idx.len());
        }
        model.indptr = indptr;
        model.idx = idx;
        model.val = val;

        // alias detection on unit weights: intercept, then dummies, then terms
        let ones = vec![1.0; n];
        let zeros = vec![0.0; n];
        let normal = model.normal(&ones, &zeros);
        let s = model.schur(&normal);
        let reference: Vec<f64> = (0..p).map(|j| normal.a[(j, j)]).collect();
        let mut order: Vec<usize> = vec![0];
        order.extend(q..p);
        order.extend(1..q);
        let mut kept = independent_columns(&s, &reference, &order, ALIAS_TOL);
        kept.sort_unstable();
        model.set_active(kept);
        model
    }

    fn set_active(&mut self, active: Vec<usize>) {
        let p_all = self.pos.len();
        let mut pos = vec![None; p_all];
        for (a, &j) in active.iter().enumerate() {
            pos[j] = Some(a);
        }
        let mut indptr = vec![0];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for r in 0..self.n {
            for e in self.indptr[r]..self.indptr[r + 1] {
                if let Some(a) = pos[self.idx[e] as usize] {
                    idx.push(a as u32);
                    val.push(self.val[e]);
                }
            }
            indptr.push(idx.len());
        }
        self.active = active;
        self.pos = pos;
        self.indptr = indptr;
        self.idx = idx;
        self.val = val;
    }

    pub fn p(&self) -> usize {
        self.active.len()
    }

    /// Active (position, value) pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |e| (self.idx[e] as usize, self.val[e]))
    }

    pub fn eta(&self, beta2: &[f64], beta1: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let mut e: f64 = self.row(r).map(|(a, v)| beta2[a] * v).sum();
                if let Some(l) = self.absorbed[r] {
                    e += beta1[l as usize];
                }
                e
            })
            .collect()
    }

    pub fn normal(&self, w: &[f64], u: &[f64]) -> Normal {
        let p = self.p();
        let mut d = vec![0.0; self.n_absorbed];
        let mut c = Array2::zeros((p, self.n_absorbed));
        let mut a = Array2::zeros((p, p));
        let mut g1 = vec![0.0; self.n_absorbed];
        let mut g2 = vec![0.0; p];
        for r in 0..self.n {
            let wr = w[r];
            let ur = u[r];
            let range = self.indptr[r]..self.indptr[r + 1];
            for e in range.clone() {
                let (i, vi) = (self.idx[e] as usize, self.val[e]);
                g2[i] += vi * ur;
                let wv = wr * vi;
                for f in range.clone() {
                    a[(i, self.idx[f] as usize)] += wv * self.val[f];
                }
            }
            if let Some(l) = self.absorbed[r] {
                let l = l as usize;
                d[l] += wr;
                g1[l] += ur;
                for e in range {
                    c[(self.idx[e] as usize, l)] += wr * self.val[e];
                }
            }
        }
        Normal { d, c, a, g1, g2 }
    }

    pub fn schur(&self, nm: &Normal) -> Array2<f64> {
        let mut s = nm.a.clone();
        let p = self.p();
        let mut nz = Vec::with_capacity(p);
        for l in 0..self.n_absorbed {
            if nm.d[l].is_nan() || nm.d[l] <= 0.0 {
                continue;
            }
            nz.clear();
            nz.extend((0..p).filter(|&i| nm.c[(i, l)] != 0.0));
            let inv = 1.0 / nm.d[l];
            for &i in &nz {
                let ci = nm.c[(i, l)] * inv;
                for &j in &nz {
                    s[(i, j)] -= ci * nm.c[(j, l)];
                }
            }
        }
        s
    }

    /// Newton direction `(X'WX)^-1 X'u`, returned as (dense block, absorbed
    /// levels), together with the Cholesky factor of the Schur complement.
    pub fn solve(&self, nm: &Normal) -> Option<(Vec<f64>, Vec<f64>, Array2<f64>)> {
        let s = self.schur(nm);
        let l = cholesky(&s)?;
        let p = self.p();
        let mut rhs = nm.g2.clone();
        for lv in 0..self.n_absorbed {
            if nm.d[lv] > 0.0 {
                let f = nm.g1[lv] / nm.d[lv];
                for (i, v) in rhs.iter_mut().enumerate().take(p) {
                    *v -= nm.c[(i, lv)] * f;
                }
            }
        }
        let d2 = chol_solve(&l, &rhs);
        let d1 = (0..self.n_absorbed)
            .map(|lv| {
                if nm.d[lv] > 0.0 {
                    let cd: f64 = (0..p).map(|i| nm.c[(i, lv)] * d2[i]).sum();
                    (nm.g1[lv] - cd) / nm.d[lv]
                } else {
                    0.0
                }
            })
            .collect();
        Some((d2, d1, l))
    }

    /// Row `r` with the absorbed level partialled out: `x_r - C[:, l] / D[l]`.
    pub fn partialled_row(&self, nm: &Normal, r: usize) -> Array1<f64> {
        let mut x = Array1::zeros(self.p());
        for (a, v) in self.row(r) {
            x[a] += v;
        }
        if let Some(l) = self.absorbed[r] {
            let l = l as usize;
            if nm.d[l] > 0.0 {
                for i in 0..self.p() {
                    x[i] -= nm.c[(i, l)] / nm.d[l];
                }
            }
        }
        x
    }
}
