//! Block-diagonal spectral decomposition for generators with (nearly)
//! defective eigenvalue clusters.
//!
//! `L = V diag(T_1, ..., T_m) V^{-1}` where every `T_b` is upper triangular.
//! Well-conditioned modes are `1 x 1` blocks holding an eigenvalue, with the
//! eigenvector as their column of `V`. A cluster of close eigenvalues whose
//! eigenvectors are nearly parallel is replaced by an orthonormal basis of
//! its invariant subspace (shift-invert subspace iteration on the Hessenberg
//! form) in Schur coordinates.

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::evd::hessenberg;
use faer::linalg::householder;
use std::collections::HashMap;

use faer::{Conj, Mat};
use log::debug;
use num_complex::Complex64 as C64;

use super::eigen::{bordered_null_state, SpectralDecomposition, ZERO_TOLERANCE};
use super::{hermitian_part, inverse, trace, unvectorize, vectorize, ComplexMatrix, SuperOperator};
use crate::error::{Error, Result};

/// Eigenvalues closer than this (times `max |lambda|`) are linked into one cluster.
pub const CLUSTER_RADIUS: f64 = 1e-6;
/// A cluster whose normalized eigenvectors have a smallest singular value
/// below this is treated as one block.
pub const PARALLEL_EIGENVECTORS: f64 = 1e-3;
/// Largest accepted `max_b |W_b|_F |V_b|_F`.
pub const MAX_BLOCK_CONDITION: f64 = 1e8;
/// Largest accepted `max |V^{-1} L V - T|` relative to `max |lambda|`.
pub const DECOUPLING_TOLERANCE: f64 = 1e-6;
/// Subspace residual `|H X - X B|_F / |H|_F` at which iteration stops early.
const SUBSPACE_TARGET: f64 = 1e-14;
/// Largest accepted subspace residual. Jordan chains with strong coupling
/// put a rounding floor well above the target; the decoupling check on the
/// assembled decomposition is the real gate.
const SUBSPACE_ACCEPT: f64 = DECOUPLING_TOLERANCE;
const SUBSPACE_ITERATIONS: usize = 80;
const SUBSPACE_PATIENCE: usize = 8;
const STEADY_STATE_POLISH: f64 = 1e-12;
/// Blocks with `|W_b|_F |V_b|_F` above this are merged with their nearest
/// neighbour.
const MERGE_CONDITION: f64 = 1e4;
const MERGE_ROUNDS: usize = 8;

/// One diagonal block: columns `start..start + len` of `V`, with its upper
/// triangular matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeBlock {
    start: usize,
    len: usize,
    t: Vec<C64>,
}

impl ModeBlock {
    fn scalar(start: usize, lambda: C64) -> Self {
        Self {
            start,
            len: 1,
            t: vec![lambda],
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.len == 1
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    /// Entry `(i, j)` of the block matrix (zero below the diagonal).
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.t[i * self.len + j]
    }

    pub fn entries(&self) -> &[C64] {
        &self.t
    }

    pub fn diagonal(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.len).map(|i| self.at(i, i))
    }
}

#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    dim: usize,
    eigenvalues: Vec<C64>,
    blocks: Vec<ModeBlock>,
    right: ComplexMatrix,
    left_adj: ComplexMatrix,
    null_index: usize,
    zero_tolerance: f64,
    condition: f64,
    decoupling_defect: f64,
    steady_state: ComplexMatrix,
}

impl BlockDecomposition {
    /// Hilbert-space dimension `N` (the superoperator is `N^2 x N^2`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagonals of the blocks in column order.
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn blocks(&self) -> &[ModeBlock] {
        &self.blocks
    }

    /// Size of the largest block (1 for a diagonalizable generator).
    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.len).max().unwrap_or(0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.largest_block() <= 1
    }

    /// `V`.
    pub fn right(&self) -> &ComplexMatrix {
        &self.right
    }

    /// `V^{-1}`; the null row is the trace functional.
    pub fn left_adjoint(&self) -> &ComplexMatrix {
        &self.left_adj
    }

    /// Column of the steady state; always a scalar block.
    pub fn null_index(&self) -> usize {
        self.null_index
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tolerance
    }

    /// `max_b |W_b|_F |V_b|_F` over blocks other than the null mode.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `max |V^{-1} L V - diag(T)|` relative to `max |lambda|`.
    pub fn decoupling_defect(&self) -> f64 {
        self.decoupling_defect
    }

    pub fn steady_state(&self) -> &ComplexMatrix {
        &self.steady_state
    }

    /// The block-diagonal matrix `diag(T_1, ..., T_m)`.
    pub fn block_matrix(&self) -> ComplexMatrix {
        let k = self.eigenvalues.len();
        let mut t = Mat::<C64>::zeros(k, k);
        for b in &self.blocks {
            for i in 0..b.len {
                for j in i..b.len {
                    t[(b.start + i, b.start + j)] = b.at(i, j);
                }
            }
        }
        t
    }

    /// `V T V^{-1}`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        &self.right * &self.block_matrix() * &self.left_adj
    }

    /// Largest `|(V^{-1} V - 1)_ij|`.
    pub fn biorthonormality_defect(&self) -> f64 {
        let p = &self.left_adj * &self.right;
        let mut worst = 0.0f64;
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                let target = if i == j { C64::ONE } else { C64::ZERO };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }
}

impl From<SpectralDecomposition> for BlockDecomposition {
    fn from(d: SpectralDecomposition) -> Self {
        let blocks = d
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(j, &l)| ModeBlock::scalar(j, l))
            .collect();
        Self {
            dim: d.dim(),
            eigenvalues: d.eigenvalues().to_vec(),
            blocks,
            right: d.right().clone(),
            left_adj: d.left_adjoint().clone(),
            null_index: d.null_index(),
            zero_tolerance: d.zero_tolerance(),
            condition: d.condition(),
            decoupling_defect: 0.0,
            steady_state: d.steady_state().clone(),
        }
    }
}

/// Block-diagonal decomposition of a Liouvillian with a unique steady state.
///
/// Equivalent to the biorthonormal eigendecomposition when every eigenvalue
/// cluster has well-conditioned eigenvectors, and stays accurate when the
/// generator has Jordan blocks.
pub fn block_decompose(l: &SuperOperator) -> Result<BlockDecomposition> {
    let m = l.matrix();
    let k = m.nrows();
    let evd = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<C64> = (0..k).map(|i| evd.S()[i]).collect();
    let mut u = evd.U().to_owned();
    for j in 0..k {
        let n = u.col(j).norm_l2();
        if n > 0.0 {
            for i in 0..k {
                u[(i, j)] /= n;
            }
        }
    }

    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::NonUniqueSteadyState {
            count: k,
            tolerance: 0.0,
        });
    }
    let tol = ZERO_TOLERANCE * scale;
    let zeros: Vec<usize> = (0..k).filter(|&j| values[j].norm() < tol).collect();
    let null = match zeros.len() {
        1 => zeros[0],
        0 => {
            let smallest = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            return Err(Error::NoSteadyState(smallest));
        }
        count => return Err(Error::NonUniqueSteadyState { count, tolerance: tol }),
    };
    if let Some(bad) = values.iter().find(|v| v.re > tol) {
        return Err(Error::Eigensolver(format!(
            "eigenvalue {bad} has positive real part; generator is not stable"
        )));
    }

    let mut groups: Vec<Group> = cluster(&values, null, CLUSTER_RADIUS * scale)
        .into_iter()
        .map(|members| {
            let block = members.len() > 1 && smallest_singular_value(&u, &members) < PARALLEL_EIGENVECTORS;
            Group { members, block }
        })
        .collect();
    let mut ctx = Assembler {
        l,
        values: &values,
        u: &u,
        scale,
        null,
        hess: None,
        solved: HashMap::new(),
    };
    let mut round = 0;
    let asm = loop {
        let asm = ctx.assemble(&groups)?;
        // Strongly coupled neighbours cannot be decoupled accurately; merge
        // them and recompute the joint invariant subspace.
        let offenders: Vec<usize> = asm
            .block_condition
            .iter()
            .enumerate()
            .filter(|&(g, &kappa)| !groups[g].members.contains(&null) && kappa > MERGE_CONDITION)
            .map(|(g, _)| g)
            .collect();
        if offenders.is_empty() || round == MERGE_ROUNDS {
            break asm;
        }
        round += 1;
        debug!("merging {} ill-conditioned blocks with their nearest neighbours", offenders.len());
        groups = merge_nearest(groups, &offenders, &values, null);
    };
    let Assembly {
        right,
        left_adj,
        blocks,
        eigenvalues,
        null_index,
        rho0,
        block_condition,
    } = asm;
    let condition = block_condition
        .iter()
        .enumerate()
        .filter(|&(g, _)| !groups[g].members.contains(&null))
        .map(|(_, &c)| c)
        .fold(0.0, f64::max);
    if !condition.is_finite() || condition > MAX_BLOCK_CONDITION {
        return Err(Error::NotDiagonalizable(format!(
            "block basis condition number {condition:e} exceeds {MAX_BLOCK_CONDITION:e}"
        )));
    }
    let dim = l.dim();

    let mut decomp = BlockDecomposition {
        dim,
        eigenvalues,
        blocks,
        right,
        left_adj,
        null_index,
        zero_tolerance: tol,
        condition,
        decoupling_defect: 0.0,
        steady_state: rho0,
    };
    let projected = &decomp.left_adj * m * &decomp.right - decomp.block_matrix();
    decomp.decoupling_defect = super::max_abs(&projected) / scale;
    if decomp.decoupling_defect > DECOUPLING_TOLERANCE {
        return Err(Error::NotDiagonalizable(format!(
            "block decoupling defect {:e} exceeds {DECOUPLING_TOLERANCE:e}",
            decomp.decoupling_defect
        )));
    }
    debug!(
        "block decomposition: {k} modes, {} blocks (largest {}), condition {:.3e}, defect {:.1e}",
        decomp.blocks.len(),
        decomp.largest_block(),
        decomp.condition,
        decomp.decoupling_defect
    );
    Ok(decomp)
}

struct Group {
    members: Vec<usize>,
    block: bool,
}

struct Assembly {
    right: ComplexMatrix,
    left_adj: ComplexMatrix,
    blocks: Vec<ModeBlock>,
    eigenvalues: Vec<C64>,
    null_index: usize,
    rho0: ComplexMatrix,
    /// `|W_g|_F |V_g|_F` per group.
    block_condition: Vec<f64>,
}

struct Assembler<'a> {
    l: &'a SuperOperator,
    values: &'a [C64],
    u: &'a ComplexMatrix,
    scale: f64,
    null: usize,
    hess: Option<Hessenberg>,
    solved: HashMap<Vec<usize>, (ComplexMatrix, ComplexMatrix)>,
}

impl Assembler<'_> {
    fn assemble(&mut self, groups: &[Group]) -> Result<Assembly> {
        let m = self.l.matrix();
        let k = m.nrows();
        let mut right = Mat::<C64>::zeros(k, k);
        let mut blocks = Vec::new();
        let mut eigenvalues = Vec::with_capacity(k);
        let mut null_index = 0;
        let mut spans = Vec::with_capacity(groups.len());
        let mut col = 0;
        for g in groups {
            let first = col;
            if !g.block {
                for &j in &g.members {
                    if j == self.null {
                        null_index = col;
                    }
                    for i in 0..k {
                        right[(i, col)] = self.u[(i, j)];
                    }
                    blocks.push(ModeBlock::scalar(col, self.values[j]));
                    eigenvalues.push(self.values[j]);
                    col += 1;
                }
                spans.push((first, col - first));
                continue;
            }
            if !self.solved.contains_key(&g.members) {
                let h = self.hess.get_or_insert_with(|| Hessenberg::new(m));
                let solution = h.cluster_block(self.values, &g.members, self.u, self.scale)?;
                self.solved.insert(g.members.clone(), solution);
            }
            let (basis, t) = &self.solved[&g.members];
            let p = g.members.len();
            for c in 0..p {
                for i in 0..k {
                    right[(i, col + c)] = basis[(i, c)];
                }
            }
            let mut entries = vec![C64::ZERO; p * p];
            for i in 0..p {
                eigenvalues.push(t[(i, i)]);
                for j in i..p {
                    entries[i * p + j] = t[(i, j)];
                }
            }
            blocks.push(ModeBlock {
                start: col,
                len: p,
                t: entries,
            });
            col += p;
            spans.push((first, p));
        }

        let dim = self.l.dim();
        let mut rho0 = unvectorize(&right.col(null_index).to_owned())?;
        let tr = trace(&rho0);
        rho0 = hermitian_part(&(&rho0 * faer::Scale(tr.inv())));
        let residual = self.l.apply_vec(&vectorize(&rho0)?).norm_l2();
        if residual > STEADY_STATE_POLISH * m.norm_l2() {
            debug!("polishing steady state (residual {residual:e})");
            rho0 = bordered_null_state(self.l, 0)?;
        }
        let v0 = vectorize(&rho0)?;
        for i in 0..k {
            right[(i, null_index)] = v0[i];
        }
        eigenvalues[null_index] = C64::ZERO;
        blocks.iter_mut().find(|b| b.start == null_index).expect("null block").t[0] = C64::ZERO;

        let mut left_adj = inverse(&right);
        for c in 0..k {
            left_adj[(null_index, c)] = if c % (dim + 1) == 0 { C64::ONE } else { C64::ZERO };
        }
        let block_condition = spans
            .iter()
            .map(|&(start, len)| right.subcols(start, len).norm_l2() * left_adj.subrows(start, len).norm_l2())
            .collect();
        Ok(Assembly {
            right,
            left_adj,
            blocks,
            eigenvalues,
            null_index,
            rho0,
            block_condition,
        })
    }
}

/// Unites every offending group with the group holding its nearest
/// eigenvalue (never the null mode); united groups become blocks.
fn merge_nearest(groups: Vec<Group>, offenders: &[usize], values: &[C64], null: usize) -> Vec<Group> {
    let n = groups.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &g in offenders {
        let nearest = (0..n)
            .filter(|&h| h != g && !groups[h].members.contains(&null))
            .map(|h| {
                let d = groups[g]
                    .members
                    .iter()
                    .flat_map(|&i| groups[h].members.iter().map(move |&j| (values[i] - values[j]).norm()))
                    .fold(f64::INFINITY, f64::min);
                (d, h)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, h)) = nearest {
            let (a, b) = (root(&mut parent, g), root(&mut parent, h));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut merged: Vec<Option<Group>> = (0..n).map(|_| None).collect();
    let mut order = Vec::new();
    for (g, group) in groups.into_iter().enumerate() {
        let r = root(&mut parent, g);
        match &mut merged[r] {
            Some(target) => {
                target.members.extend(group.members);
                target.block = true;
            }
            slot @ None => {
                order.push(r);
                *slot = Some(group);
            }
        }
    }
    order
        .into_iter()
        .map(|r| {
            let mut g = merged[r].take().expect("root group");
            g.members.sort_unstable();
            g
        })
        .collect()
}

/// Single-linkage clusters of eigenvalues closer than `radius`; the null
/// mode always stays alone. Clusters are ordered by their first member.
fn cluster(values: &[C64], null: usize, radius: f64) -> Vec<Vec<usize>> {
    let k = values.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..k).filter(|&j| j != null).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    // Sweep in order of real part; only pairs within `radius` in Re can link.
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if values[j].re - values[i].re >= radius {
                break;
            }
            if (values[i] - values[j]).norm() < radius {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; k];
    for j in 0..k {
        let r = root(&mut parent, j);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(j);
    }
    groups
}

fn smallest_singular_value(u: &ComplexMatrix, members: &[usize]) -> f64 {
    let sub = Mat::from_fn(u.nrows(), members.len(), |i, j| u[(i, members[j])]);
    sub.singular_values()
        .map(|s| s.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(0.0)
}

/// `L = Q H Q^dagger` with `H` upper Hessenberg.
struct Hessenberg {
    h: ComplexMatrix,
    q: ComplexMatrix,
    norm: f64,
}

impl Hessenberg {
    fn new(m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut h = m.clone();
        let mut q = Mat::<C64>::identity(n, n);
        if n > 2 {
            let bs = faer::linalg::qr::no_pivoting::factor::recommended_block_size::<C64>(n - 1, n - 1);
            let par = faer::get_global_parallelism();
            let mut hh = Mat::<C64>::zeros(bs, n - 1);
            let req = StackReq::any_of(&[
                hessenberg::hessenberg_in_place_scratch::<C64>(n, bs, par, Default::default()),
                householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<C64>(n - 1, bs, n - 1),
            ]);
            let mut mem = MemBuffer::new(req);
            hessenberg::hessenberg_in_place(h.as_mut(), hh.as_mut(), par, MemStack::new(&mut mem), Default::default());
            householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
                h.as_ref().submatrix(1, 0, n - 1, n - 1),
                hh.as_ref(),
                Conj::No,
                q.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
                par,
                MemStack::new(&mut mem),
            );
            for j in 0..n {
                for i in j + 2..n {
                    h[(i, j)] = C64::ZERO;
                }
            }
        }
        let norm = h.norm_l2();
        Self { h, q, norm }
    }

    /// Orthonormal basis (in original coordinates) of the invariant subspace
    /// of the cluster, rotated to Schur form, and the triangular block.
    fn cluster_block(
        &self,
        values: &[C64],
        members: &[usize],
        u: &ComplexMatrix,
        scale: f64,
    ) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let p = members.len();
        let center: C64 = members.iter().map(|&j| values[j]).sum::<C64>() / p as f64;
        let radius = members.iter().map(|&j| (values[j] - center).norm()).fold(0.0, f64::max);
        let gap = (0..values.len())
            .filter(|j| !members.contains(j))
            .map(|j| (values[j] - center).norm())
            .fold(f64::INFINITY, f64::min);
        // Far enough from the cluster that its directions are amplified
        // evenly, close enough that the rest decays by ~7 per step.
        let offset = (gap / 8.0).min(scale).max(2.0 * radius).max(1e-10 * scale);
        let shift = center + C64::from_polar(offset, std::f64::consts::FRAC_PI_3);
        let lu = HessenbergLu::new(&self.h, shift);

        let start = Mat::from_fn(u.nrows(), p, |i, c| u[(i, members[c])]);
        let mut x = orthonormal(&(self.q.adjoint() * &start));
        let mut best: Option<(f64, ComplexMatrix, ComplexMatrix)> = None;
        let mut stale = 0;
        for _ in 0..SUBSPACE_ITERATIONS {
            let mut y = x.clone();
            for c in 0..p {
                lu.solve_in_place(y.col_mut(c).try_as_col_major_mut().expect("contiguous").as_slice_mut());
            }
            x = orthonormal(&y);
            let hx = &self.h * &x;
            let b = x.adjoint() * &hx;
            let residual = (&hx - &x * &b).norm_l2() / self.norm;
            if best.as_ref().is_none_or(|(r, _, _)| residual < 0.5 * r) {
                stale = 0;
            } else {
                stale += 1;
            }
            if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
                best = Some((residual, x.clone(), b));
            }
            if residual <= SUBSPACE_TARGET || stale >= SUBSPACE_PATIENCE {
                break;
            }
        }
        let (residual, x, b) = best.expect("at least one iteration");
        if residual <= SUBSPACE_ACCEPT {
            debug!("cluster of {p} near {center}: subspace residual {residual:.1e}");
            let (z, t) = small_schur(&b)?;
            return Ok((&self.q * (&x * &z), t));
        }
        Err(Error::NotDiagonalizable(format!(
            "invariant subspace of the cluster near {center} did not converge (relative residual {residual:e})"
        )))
    }
}

fn orthonormal(y: &ComplexMatrix) -> ComplexMatrix {
    y.qr().compute_thin_Q()
}

/// Complex Schur form `b = z t z^dagger` of a small dense matrix.
///
/// Cluster blocks are close to a multiple of the identity, where QR shifts
/// stall; the iteration runs on `(b - c) / s` with `c` the mean eigenvalue,
/// which has the same Schur vectors.
fn small_schur(b: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let p = b.nrows();
    let c = (0..p).map(|i| b[(i, i)]).sum::<C64>() / p as f64;
    let centered = Mat::from_fn(p, p, |i, j| b[(i, j)] - if i == j { c } else { C64::ZERO });
    let s = centered.norm_l2();
    if s == 0.0 {
        return Ok((Mat::identity(p, p), b.clone()));
    }
    let nb = nalgebra::DMatrix::<C64>::from_fn(p, p, |i, j| centered[(i, j)] / s);
    let schur = [f64::EPSILON, 1e-13]
        .into_iter()
        .find_map(|eps| nalgebra::Schur::try_new(nb.clone(), eps, 10_000))
        .ok_or_else(|| Error::Eigensolver(format!("Schur iteration of a {p}x{p} cluster block did not converge")))?;
    let (z, t) = schur.unpack();
    let z = Mat::from_fn(p, p, |i, j| z[(i, j)]);
    let t = Mat::from_fn(p, p, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => C64::ZERO,
        std::cmp::Ordering::Equal => t[(i, j)] * s + c,
        std::cmp::Ordering::Less => t[(i, j)] * s,
    });
    Ok((z, t))
}

/// LU with partial pivoting of `H - shift` for upper Hessenberg `H`.
struct HessenbergLu {
    u: ComplexMatrix,
    multipliers: Vec<C64>,
    swapped: Vec<bool>,
}

impl HessenbergLu {
    fn new(h: &ComplexMatrix, shift: C64) -> Self {
        let n = h.nrows();
        let mut u = h.clone();
        for i in 0..n {
            u[(i, i)] -= shift;
        }
        let mut multipliers = vec![C64::ZERO; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            if u[(k + 1, k)].norm() > u[(k, k)].norm() {
                swapped[k] = true;
                for j in k..n {
                    let t = u[(k, j)];
                    u[(k, j)] = u[(k + 1, j)];
                    u[(k + 1, j)] = t;
                }
            }
            let pivot = u[(k, k)];
            let m = if pivot == C64::ZERO { C64::ZERO } else { u[(k + 1, k)] / pivot };
            multipliers[k] = m;
            u[(k + 1, k)] = C64::ZERO;
            if m != C64::ZERO {
                for j in k + 1..n {
                    let t = u[(k, j)];
                    u[(k + 1, j)] -= m * t;
                }
            }
        }
        Self {
            u,
            multipliers,
            swapped,
        }
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        let n = b.len();
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            let t = b[k];
            b[k + 1] -= self.multipliers[k] * t;
        }
        let tiny = f64::MIN_POSITIVE.sqrt();
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.u[(i, j)] * b[j];
            }
            let d = self.u[(i, i)];
            b[i] = if d.norm() > tiny { s / d } else { s / tiny };
        }
    }
}
