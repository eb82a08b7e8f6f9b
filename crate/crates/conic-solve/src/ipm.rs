//! Infeasible-start primal-dual path-following method for block-diagonal
//! semidefinite programs in inequality form:
//!
//! ```text
//! minimize cᵀz   s.t.  F_b(z) = F_b0 + Σ_i z_i F_bi ⪰ 0  for every block b
//! ```
//!
//! The conjugate program is `maximize -⟨F_0, X⟩  s.t. ⟨F_i, X⟩ = c_i, X ⪰ 0`.
//! Search directions are HKM with a Mehrotra predictor-corrector; the
//! iteration schedule is fixed, so identical data gives identical iterates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

#[derive(Clone, Debug)]
pub(crate) enum Block {
    Dense {
        constant: DMatrix<f64>,
        terms: Vec<(usize, DMatrix<f64>)>,
    },
    /// Diagonal block; `entries[l]` lists `(var, coeff)` for position `l`.
    Diag {
        constant: Vec<f64>,
        entries: Vec<Vec<(usize, f64)>>,
    },
}

impl Block {
    pub(crate) fn dim(&self) -> usize {
        match self {
            Block::Dense { constant, .. } => constant.nrows(),
            Block::Diag { constant, .. } => constant.len(),
        }
    }

    pub(crate) fn trace_constant(&self) -> f64 {
        match self {
            Block::Dense { constant, .. } => constant.trace(),
            Block::Diag { constant, .. } => constant.iter().sum(),
        }
    }

    /// `tr(F_i)` accumulated into `out[i]`.
    pub(crate) fn accumulate_term_traces(&self, out: &mut [f64]) {
        match self {
            Block::Dense { terms, .. } => {
                for (v, f) in terms {
                    out[*v] += f.trace();
                }
            }
            Block::Diag { entries, .. } => {
                for e in entries {
                    for (v, a) in e {
                        out[*v] += a;
                    }
                }
            }
        }
    }

    pub(crate) fn constant_norm_sq(&self) -> f64 {
        match self {
            Block::Dense { constant, .. } => constant.norm_squared(),
            Block::Diag { constant, .. } => constant.iter().map(|v| v * v).sum(),
        }
    }
}

/// Block-diagonal matrix value, one entry per [`Block`].
#[derive(Clone, Debug)]
pub(crate) enum BlockValue {
    Dense(DMatrix<f64>),
    Diag(Vec<f64>),
}

impl BlockValue {
    fn inner(&self, other: &BlockValue) -> f64 {
        match (self, other) {
            (BlockValue::Dense(a), BlockValue::Dense(b)) => a.dot(b),
            (BlockValue::Diag(a), BlockValue::Diag(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => unreachable!("block kind mismatch"),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &BlockValue) {
        match (self, other) {
            (BlockValue::Dense(a), BlockValue::Dense(b)) => *a += b * alpha,
            (BlockValue::Diag(a), BlockValue::Diag(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += alpha * y)
            }
            _ => unreachable!("block kind mismatch"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            BlockValue::Dense(a) => a.norm_squared(),
            BlockValue::Diag(a) => a.iter().map(|v| v * v).sum(),
        }
    }

    fn scaled_identity(block: &Block, s: f64) -> BlockValue {
        match block {
            Block::Dense { constant, .. } => {
                let n = constant.nrows();
                BlockValue::Dense(DMatrix::identity(n, n) * s)
            }
            Block::Diag { constant, .. } => BlockValue::Diag(vec![s; constant.len()]),
        }
    }
}

pub(crate) fn evaluate(blocks: &[Block], z: &[f64]) -> Vec<BlockValue> {
    blocks
        .iter()
        .map(|b| match b {
            Block::Dense { constant, terms } => {
                let mut m = constant.clone();
                for (v, f) in terms {
                    if z[*v] != 0.0 {
                        m += f * z[*v];
                    }
                }
                BlockValue::Dense(m)
            }
            Block::Diag { constant, entries } => BlockValue::Diag(
                constant
                    .iter()
                    .zip(entries)
                    .map(|(c, e)| c + e.iter().map(|(v, a)| a * z[*v]).sum::<f64>())
                    .collect(),
            ),
        })
        .collect()
}

/// Smallest eigenvalue over all blocks (solver-side routine).
pub(crate) fn min_eigenvalue(values: &[BlockValue]) -> f64 {
    values
        .iter()
        .map(|v| match v {
            BlockValue::Dense(m) => {
                if m.nrows() == 0 {
                    f64::INFINITY
                } else {
                    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
                }
            }
            BlockValue::Diag(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
        })
        .fold(f64::INFINITY, f64::min)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct IpmSettings {
    pub max_iters: usize,
    pub gap_tol: f64,
    pub feas_tol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { max_iters: 150, gap_tol: 1e-10, feas_tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub z: Vec<f64>,
    pub status: IpmStatus,
    pub iterations: usize,
}

/// Step to the boundary of the PSD cone from `x` along `dx`.
fn max_step(x: &BlockValue, dx: &BlockValue) -> f64 {
    match (x, dx) {
        (BlockValue::Dense(x), BlockValue::Dense(dx)) => {
            let n = x.nrows();
            if n == 0 {
                return f64::INFINITY;
            }
            let Some(chol) = Cholesky::new(symmetrize(x)) else {
                return 0.0;
            };
            let l = chol.l();
            let Some(linv) = l.clone().try_inverse() else {
                return 0.0;
            };
            let w = &linv * dx * linv.transpose();
            let lmin = SymmetricEigen::new(symmetrize(&w)).eigenvalues.min();
            if !lmin.is_finite() {
                0.0
            } else if lmin >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lmin
            }
        }
        (BlockValue::Diag(x), BlockValue::Diag(dx)) => x
            .iter()
            .zip(dx)
            .filter(|(_, d)| **d < 0.0)
            .map(|(x, d)| -x / d)
            .fold(f64::INFINITY, f64::min),
        _ => unreachable!("block kind mismatch"),
    }
}

fn inverse_pd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = Cholesky::new(symmetrize(m))?;
    Some(symmetrize(&chol.inverse()))
}

/// Runs the method from a dual start `z0` (need not be feasible).
pub(crate) fn solve(blocks: &[Block], c: &[f64], z0: &[f64], settings: IpmSettings) -> IpmResult {
    let m = c.len();
    let total_dim: usize = blocks.iter().map(Block::dim).sum();
    let total_dim_f = total_dim.max(1) as f64;
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f0_norm = blocks.iter().map(Block::constant_norm_sq).sum::<f64>().sqrt();

    let mut z = z0.to_vec();
    let fz = evaluate(blocks, &z);
    let mut zs: Vec<BlockValue> = Vec::with_capacity(blocks.len());
    let mut xs: Vec<BlockValue> = Vec::with_capacity(blocks.len());
    for (b, f) in blocks.iter().zip(&fz) {
        let n = b.dim().max(1) as f64;
        let fmin = min_eigenvalue(std::slice::from_ref(f));
        let eta = 10f64.max(n.sqrt());
        // keep a feasible start when one is offered
        if fmin > 1e-8 {
            zs.push(f.clone());
        } else {
            zs.push(BlockValue::scaled_identity(b, eta.max(-fmin + 1.0)));
        }
        let xi = 10f64.max(n.sqrt()).max(n * (1.0 + c_norm) / (1.0 + f0_norm.sqrt()));
        xs.push(BlockValue::scaled_identity(b, xi));
    }

    let mut best_z = z.clone();
    let mut iterations = 0;
    let mut status = IpmStatus::MaxIterations;
    let mut stall = 0usize;

    for iter in 0..settings.max_iters {
        iterations = iter + 1;
        let fz = evaluate(blocks, &z);
        // Rd = F(z) - Z
        let rd: Vec<BlockValue> = fz
            .iter()
            .zip(&zs)
            .map(|(f, s)| {
                let mut r = f.clone();
                r.axpy(-1.0, s);
                r
            })
            .collect();
        // rp_i = c_i - <F_i, X>
        let mut rp = c.to_vec();
        for (b, x) in blocks.iter().zip(&xs) {
            match (b, x) {
                (Block::Dense { terms, .. }, BlockValue::Dense(x)) => {
                    for (v, f) in terms {
                        rp[*v] -= f.dot(x);
                    }
                }
                (Block::Diag { entries, .. }, BlockValue::Diag(x)) => {
                    for (e, xl) in entries.iter().zip(x) {
                        for (v, a) in e {
                            rp[*v] -= a * xl;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        let xz: f64 = xs.iter().zip(&zs).map(|(x, s)| x.inner(s)).sum();
        let mu = xz / total_dim_f;
        let pobj: f64 = c.iter().zip(&z).map(|(a, b)| a * b).sum();
        let dobj: f64 = -blocks
            .iter()
            .zip(&xs)
            .map(|(b, x)| match (b, x) {
                (Block::Dense { constant, .. }, BlockValue::Dense(x)) => constant.dot(x),
                (Block::Diag { constant, .. }, BlockValue::Diag(x)) => {
                    constant.iter().zip(x).map(|(a, b)| a * b).sum()
                }
                _ => unreachable!(),
            })
            .sum::<f64>();
        let rp_rel = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + c_norm);
        let rd_rel = rd.iter().map(BlockValue::norm_sq).sum::<f64>().sqrt() / (1.0 + f0_norm);
        let gap_rel = xz.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());

        if rd_rel <= settings.feas_tol * 10.0 {
            best_z = z.clone();
        }
        if gap_rel <= settings.gap_tol && rp_rel <= settings.feas_tol && rd_rel <= settings.feas_tol {
            status = IpmStatus::Converged;
            best_z = z.clone();
            break;
        }

        // inverses of Z
        let mut zinv: Vec<BlockValue> = Vec::with_capacity(blocks.len());
        let mut ok = true;
        for s in &zs {
            match s {
                BlockValue::Dense(s) => match inverse_pd(s) {
                    Some(inv) => zinv.push(BlockValue::Dense(inv)),
                    None => {
                        ok = false;
                        break;
                    }
                },
                BlockValue::Diag(s) => zinv.push(BlockValue::Diag(s.iter().map(|v| 1.0 / v).collect())),
            }
        }
        if !ok {
            status = IpmStatus::Stalled;
            break;
        }

        // Schur complement M_ij = <F_i, X F_j Z^-1>
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for ((b, x), zi) in blocks.iter().zip(&xs).zip(&zinv) {
            match (b, x, zi) {
                (Block::Dense { terms, .. }, BlockValue::Dense(x), BlockValue::Dense(zi)) => {
                    for (vj, fj) in terms {
                        let g = x * fj * zi;
                        for (vi, fi) in terms {
                            schur[(*vi, *vj)] += fi.dot(&g);
                        }
                    }
                }
                (Block::Diag { entries, .. }, BlockValue::Diag(x), BlockValue::Diag(zi)) => {
                    for ((e, xl), zl) in entries.iter().zip(x).zip(zi) {
                        let w = xl * zl;
                        for (vi, ai) in e {
                            for (vj, aj) in e {
                                schur[(*vi, *vj)] += ai * aj * w;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        let schur = symmetrize(&schur);
        let max_diag = (0..m).map(|i| schur[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut factor = None;
        let mut reg = 0.0;
        for _ in 0..8 {
            let mut trial = schur.clone();
            if reg > 0.0 {
                for i in 0..m {
                    trial[(i, i)] += reg;
                }
            }
            if let Some(ch) = Cholesky::<f64, Dyn>::new(trial) {
                factor = Some(ch);
                break;
            }
            reg = if reg == 0.0 { 1e-14 * max_diag } else { reg * 100.0 };
        }
        let Some(factor) = factor else {
            status = IpmStatus::Stalled;
            break;
        };

        // direction for a given complementarity target K (per block)
        let direction = |k: &[BlockValue]| -> (Vec<f64>, Vec<BlockValue>, Vec<BlockValue>) {
            // rhs_i = <F_i, K Zinv - X Rd Zinv> - rp_i
            let mut rhs: Vec<f64> = rp.iter().map(|v| -v).collect();
            let mut t_blocks: Vec<BlockValue> = Vec::with_capacity(blocks.len());
            for ((((b, x), zi), r), kb) in blocks.iter().zip(&xs).zip(&zinv).zip(&rd).zip(k) {
                match (b, x, zi, r, kb) {
                    (
                        Block::Dense { terms, .. },
                        BlockValue::Dense(x),
                        BlockValue::Dense(zi),
                        BlockValue::Dense(r),
                        BlockValue::Dense(kb),
                    ) => {
                        let t = (kb - x * r) * zi;
                        for (v, f) in terms {
                            rhs[*v] += f.dot(&t);
                        }
                        t_blocks.push(BlockValue::Dense(t));
                    }
                    (
                        Block::Diag { entries, .. },
                        BlockValue::Diag(x),
                        BlockValue::Diag(zi),
                        BlockValue::Diag(r),
                        BlockValue::Diag(kb),
                    ) => {
                        let t: Vec<f64> = (0..x.len()).map(|l| (kb[l] - x[l] * r[l]) * zi[l]).collect();
                        for (e, tl) in entries.iter().zip(&t) {
                            for (v, a) in e {
                                rhs[*v] += a * tl;
                            }
                        }
                        t_blocks.push(BlockValue::Diag(t));
                    }
                    _ => unreachable!(),
                }
            }
            let dz = factor.solve(&DVector::from_vec(rhs));
            let dz: Vec<f64> = dz.iter().copied().collect();
            // dZ = Rd + Σ dz_i F_i
            let mut dzs = evaluate_linear(blocks, &dz);
            for (d, r) in dzs.iter_mut().zip(&rd) {
                d.axpy(1.0, r);
            }
            // dX = (K - X dZ) Zinv, symmetrized
            let dxs: Vec<BlockValue> = xs
                .iter()
                .zip(&zinv)
                .zip(&dzs)
                .zip(k)
                .map(|(((x, zi), dzb), kb)| match (x, zi, dzb, kb) {
                    (BlockValue::Dense(x), BlockValue::Dense(zi), BlockValue::Dense(dzb), BlockValue::Dense(kb)) => {
                        BlockValue::Dense(symmetrize(&((kb - x * dzb) * zi)))
                    }
                    (BlockValue::Diag(x), BlockValue::Diag(zi), BlockValue::Diag(dzb), BlockValue::Diag(kb)) => {
                        BlockValue::Diag((0..x.len()).map(|l| (kb[l] - x[l] * dzb[l]) * zi[l]).collect())
                    }
                    _ => unreachable!(),
                })
                .collect();
            (dz, dxs, dzs)
        };

        // predictor: K = -XZ
        let k_aff: Vec<BlockValue> = xs
            .iter()
            .zip(&zs)
            .map(|(x, s)| match (x, s) {
                (BlockValue::Dense(x), BlockValue::Dense(s)) => BlockValue::Dense(-(x * s)),
                (BlockValue::Diag(x), BlockValue::Diag(s)) => {
                    BlockValue::Diag(x.iter().zip(s).map(|(a, b)| -a * b).collect())
                }
                _ => unreachable!(),
            })
            .collect();
        let (_, dx_aff, dz_aff) = direction(&k_aff);
        let ap_aff = step_length(&xs, &dx_aff, 1.0);
        let ad_aff = step_length(&zs, &dz_aff, 1.0);
        let mut mu_aff = 0.0;
        for i in 0..blocks.len() {
            let mut xa = xs[i].clone();
            xa.axpy(ap_aff, &dx_aff[i]);
            let mut za = zs[i].clone();
            za.axpy(ad_aff, &dz_aff[i]);
            mu_aff += xa.inner(&za);
        }
        mu_aff /= total_dim_f;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector: K = sigma mu I - XZ - dXa dZa
        let k_corr: Vec<BlockValue> = (0..blocks.len())
            .map(|i| match (&xs[i], &zs[i], &dx_aff[i], &dz_aff[i]) {
                (BlockValue::Dense(x), BlockValue::Dense(s), BlockValue::Dense(dx), BlockValue::Dense(dzb)) => {
                    let n = x.nrows();
                    BlockValue::Dense(DMatrix::identity(n, n) * (sigma * mu) - x * s - dx * dzb)
                }
                (BlockValue::Diag(x), BlockValue::Diag(s), BlockValue::Diag(dx), BlockValue::Diag(dzb)) => {
                    BlockValue::Diag((0..x.len()).map(|l| sigma * mu - x[l] * s[l] - dx[l] * dzb[l]).collect())
                }
                _ => unreachable!(),
            })
            .collect();
        let (dz, dxs, dzs) = direction(&k_corr);
        let gamma = 0.95;
        let ap = step_length(&xs, &dxs, gamma);
        let ad = step_length(&zs, &dzs, gamma);
        if !(ap.is_finite() && ad.is_finite()) || dz.iter().any(|v| !v.is_finite()) {
            status = IpmStatus::Stalled;
            break;
        }
        for (x, d) in xs.iter_mut().zip(&dxs) {
            x.axpy(ap, d);
        }
        for (s, d) in zs.iter_mut().zip(&dzs) {
            s.axpy(ad, d);
        }
        for (zi, d) in z.iter_mut().zip(&dz) {
            *zi += ad * d;
        }
        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
            if stall >= 3 {
                status = IpmStatus::Stalled;
                break;
            }
        } else {
            stall = 0;
        }
    }
    if status != IpmStatus::Converged {
        // prefer the last iterate if it is at least as feasible as the stored one
        let last_min = min_eigenvalue(&evaluate(blocks, &z));
        let best_min = min_eigenvalue(&evaluate(blocks, &best_z));
        if last_min >= best_min.min(0.0) {
            best_z = z.clone();
        }
    }
    IpmResult { z: best_z, status, iterations }
}

fn step_length(vals: &[BlockValue], dirs: &[BlockValue], gamma: f64) -> f64 {
    let mut alpha = f64::INFINITY;
    for (v, d) in vals.iter().zip(dirs) {
        alpha = alpha.min(max_step(v, d));
    }
    (gamma * alpha).min(1.0)
}

/// `Σ dz_i F_i` without the constant.
fn evaluate_linear(blocks: &[Block], dz: &[f64]) -> Vec<BlockValue> {
    blocks
        .iter()
        .map(|b| match b {
            Block::Dense { constant, terms } => {
                let n = constant.nrows();
                let mut m = DMatrix::zeros(n, n);
                for (v, f) in terms {
                    m += f * dz[*v];
                }
                BlockValue::Dense(m)
            }
            Block::Diag { entries, .. } => BlockValue::Diag(
                entries.iter().map(|e| e.iter().map(|(v, a)| a * dz[*v]).sum()).collect(),
            ),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_block(constant: Vec<f64>, entries: Vec<Vec<(usize, f64)>>) -> Block {
        Block::Diag { constant, entries }
    }

    #[test]
    fn linear_program_in_diagonal_form() {
        // minimize z0 + z1  s.t. z0 >= 1, z1 >= 2
        let b = diag_block(vec![-1.0, -2.0], vec![vec![(0, 1.0)], vec![(1, 1.0)]]);
        let r = solve(&[b], &[1.0, 1.0], &[0.0, 0.0], IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Converged);
        assert!((r.z[0] - 1.0).abs() < 1e-7, "{:?}", r.z);
        assert!((r.z[1] - 2.0).abs() < 1e-7, "{:?}", r.z);
    }

    #[test]
    fn largest_eigenvalue_by_minimizing_t() {
        // minimize t s.t. t I - diag(1, 3) ⪰ 0
        let constant = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]));
        let b = Block::Dense { constant, terms: vec![(0, DMatrix::identity(2, 2))] };
        let r = solve(&[b], &[1.0], &[10.0], IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Converged);
        assert!((r.z[0] - 3.0).abs() < 1e-7, "{:?}", r.z);
    }
}
