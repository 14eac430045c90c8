//! Sparse LU factorisation of a simplex basis with product-form updates.
//!
//! Pivots are chosen column by column with a Markowitz-style rule: the
//! sparsest remaining column, then within it the sparsest row among entries
//! that pass a threshold test. Slack columns are unit vectors and drop out
//! immediately, so only the structural kernel does real elimination.

const PIVOT_THRESHOLD: f64 = 0.1;
const PIVOT_ABS_MIN: f64 = 1e-11;
const DROP: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Eta {
    position: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct SparseLu {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    /// Multipliers of step `k` as `(row, l)`.
    lower: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal entries of pivot row `k` as `(position, u)`.
    upper: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    etas: Vec<Eta>,
}

/// Positions whose columns could not be pivoted, paired with rows left
/// without a pivot. Both lists have the same length.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

impl SparseLu {
    /// Factor the `m × m` matrix whose columns are given as sparse `(row, value)` lists.
    pub(crate) fn factor(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut cols: Vec<Vec<(usize, f64)>> = columns
            .iter()
            .map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut row_count = vec![0usize; m];
        for (c, col) in cols.iter().enumerate() {
            for &(r, _) in col {
                row_cols[r].push(c);
                row_count[r] += 1;
            }
        }
        let mut col_active = vec![true; m];
        let mut row_done = vec![false; m];
        let mut lu = SparseLu {
            m,
            piv_row: Vec::with_capacity(m),
            piv_col: Vec::with_capacity(m),
            lower: Vec::with_capacity(m),
            upper: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            etas: Vec::new(),
        };
        let mut bad_positions = Vec::new();
        let mut slot = vec![usize::MAX; m];

        loop {
            // Sparsest active column.
            let mut best: Option<(usize, usize)> = None;
            for c in 0..m {
                if !col_active[c] {
                    continue;
                }
                let len = cols[c].len();
                if best.is_none_or(|(_, l)| len < l) {
                    best = Some((c, len));
                    if len <= 1 {
                        break;
                    }
                }
            }
            let Some((c, _)) = best else { break };
            let col_max = cols[c].iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            if col_max <= PIVOT_ABS_MIN {
                col_active[c] = false;
                bad_positions.push(c);
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for &(r, v) in &cols[c] {
                if v.abs() < PIVOT_THRESHOLD * col_max {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some((pr, pv)) => {
                        row_count[r] < row_count[pr] || (row_count[r] == row_count[pr] && v.abs() > pv.abs())
                    }
                };
                if better {
                    pick = Some((r, v));
                }
            }
            let (r, piv) = pick.expect("column maximum passes the threshold");
            col_active[c] = false;
            row_done[r] = true;

            let pivot_col = std::mem::take(&mut cols[c]);
            let mults: Vec<(usize, f64)> = pivot_col
                .iter()
                .filter(|&&(i, _)| i != r)
                .map(|&(i, v)| (i, v / piv))
                .collect();
            for &(i, _) in &pivot_col {
                row_count[i] -= 1;
            }

            let mut urow = Vec::new();
            let others = std::mem::take(&mut row_cols[r]);
            for &c2 in &others {
                if !col_active[c2] {
                    continue;
                }
                let Some(idx) = cols[c2].iter().position(|&(i, _)| i == r) else {
                    continue;
                };
                let (_, u) = cols[c2].swap_remove(idx);
                row_count[r] -= 1;
                urow.push((c2, u));
                if mults.is_empty() {
                    continue;
                }
                let col = &mut cols[c2];
                for (k, &(i, _)) in col.iter().enumerate() {
                    slot[i] = k;
                }
                for &(i, l) in &mults {
                    if slot[i] != usize::MAX {
                        col[slot[i]].1 -= l * u;
                    } else {
                        slot[i] = col.len();
                        col.push((i, -l * u));
                        row_cols[i].push(c2);
                        row_count[i] += 1;
                    }
                }
                for &(i, _) in col.iter() {
                    slot[i] = usize::MAX;
                }
                col.retain(|&(i, v)| {
                    let keep = v.abs() > DROP;
                    if !keep {
                        row_count[i] -= 1;
                    }
                    keep
                });
            }
            lu.piv_row.push(r);
            lu.piv_col.push(c);
            lu.lower.push(mults);
            lu.upper.push(urow);
            lu.diag.push(piv);
        }

        if lu.piv_row.len() < m {
            let mut positions = bad_positions;
            positions.extend((0..m).filter(|&c| col_active[c]));
            positions.sort_unstable();
            positions.dedup();
            let rows: Vec<usize> = (0..m).filter(|&r| !row_done[r]).collect();
            debug_assert_eq!(positions.len(), rows.len());
            return Err(Singular { positions, rows });
        }
        Ok(lu)
    }

    pub(crate) fn updates(&self) -> usize {
        self.etas.len()
    }

    /// Solve `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub(crate) fn ftran(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = rhs.to_vec();
        for k in 0..self.m {
            let br = b[self.piv_row[k]];
            if br != 0.0 {
                for &(i, l) in &self.lower[k] {
                    b[i] -= l * br;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for k in (0..self.m).rev() {
            let mut s = b[self.piv_row[k]];
            for &(c, u) in &self.upper[k] {
                s -= u * x[c];
            }
            x[self.piv_col[k]] = s / self.diag[k];
        }
        for eta in &self.etas {
            let xp = x[eta.position] / eta.pivot;
            x[eta.position] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    x[i] -= a * xp;
                }
            }
        }
        x
    }

    /// Solve `Bᵀ y = c`; `c` is indexed by basis position, the result by row.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut t = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = t[eta.position];
            for &(i, a) in &eta.entries {
                s -= a * t[i];
            }
            t[eta.position] = s / eta.pivot;
        }
        let mut z = vec![0.0; self.m];
        for k in 0..self.m {
            let w = t[self.piv_col[k]] / self.diag[k];
            if w != 0.0 {
                for &(c2, u) in &self.upper[k] {
                    t[c2] -= u * w;
                }
            }
            z[self.piv_row[k]] = w;
        }
        for k in (0..self.m).rev() {
            let mut s = 0.0;
            for &(i, l) in &self.lower[k] {
                s += l * z[i];
            }
            z[self.piv_row[k]] -= s;
        }
        z
    }

    /// Replace the column at `position` given `alpha = B⁻¹ a_new`.
    pub(crate) fn update(&mut self, position: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != position && a.abs() > DROP)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            position,
            pivot: alpha[position],
            entries,
        });
    }
}
