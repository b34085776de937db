//! Closed-form polyspectra from the block-diagonal decomposition of the
//! Liouvillian.
//!
//! With `L = V diag(T_b) V^{-1}`, the null mode `0` (right `vec(rho0)`, left
//! the trace functional) and `a = V^{-1} A' V`, the propagator is
//! `G'(w) = V diag(G_b(w)) V^{-1}` with `G_b(w) = -(T_b + i w)^{-1}` and zero
//! on the null mode. Every trace in the spectra is a short chain of
//! contractions of `a` with block-diagonal `G`s; for `1 x 1` blocks this is
//! the familiar eigenbasis sum with `g_j(w) = -1 / (lambda_j + i w)`.
//!
//! The fourth-order convolution integrals close by residues:
//! `(1/2pi) int G_b(W - w) f(w) dw = f(W - i T_b)` for any `f` analytic in
//! the upper half plane. With `s(w) = Tr[A' G'(w) A' rho0]` this gives
//! `Z_b(W) = s(W - i T_b)`, which for scalar blocks is
//! `-sum_k c_k / (lambda_b + lambda_k + i W)`, and the resolvent identity
//! turns the other integral into `G_b(W - w') (s(w') - Z_b(W))`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use faer::Mat;
use log::{debug, warn};
use num_complex::Complex64 as C64;

use super::spectrum::PolySpectrum;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{block_decompose, trace, BlockDecomposition, ComplexMatrix, I};
use crate::model::{measurement_superop, LiouvillianModel};

/// Pole separations `|lambda_b + i(W - w')|` below this (relative to
/// `max |lambda|`) are summed directly instead of by partial fractions.
pub const PARTIAL_FRACTION_TOLERANCE: f64 = 1e-6;

/// Un-prefactored pieces of one fourth-order cut value:
/// `S4 = beta^8 (triple - first_integral - second_integral)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct S4Terms {
    pub triple: C64,
    pub first_integral: C64,
    pub second_integral: C64,
}

impl S4Terms {
    pub fn total(&self) -> C64 {
        self.triple - self.first_integral - self.second_integral
    }
}

/// A diagonal block of `T` with the offset of its `p x p` slot in a flat
/// block-diagonal resolvent.
#[derive(Clone, Debug)]
struct Block {
    start: usize,
    len: usize,
    slot: usize,
    t: Vec<C64>,
    null: bool,
}

impl Block {
    fn at(&self, i: usize, j: usize) -> C64 {
        self.t[i * self.len + j]
    }

    fn lambda(&self) -> C64 {
        self.t[0]
    }

    /// `x = (T + shift)^{-1} rhs` by back substitution.
    fn solve(&self, shift: C64, rhs: &[C64]) -> Vec<C64> {
        let p = self.len;
        let mut x = rhs.to_vec();
        for i in (0..p).rev() {
            let mut s = x[i];
            for j in i + 1..p {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / (self.at(i, i) + shift);
        }
        x
    }

    /// Smallest `|T_ii + shift|`.
    fn min_pivot(&self, shift: C64) -> f64 {
        (0..self.len).map(|i| (self.at(i, i) + shift).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// `f(T_c) v` for `f(mu) = a (T_d + shift + mu)^{-1} b`, i.e.
/// `(a kron 1)(T_d kron 1 + 1 kron T_c + shift)^{-1}(b kron v)`.
fn kron_apply(a: &[C64], b: &[C64], td: &Block, tc: &Block, shift: C64, v: &[C64]) -> Vec<C64> {
    let (q, p) = (td.len, tc.len);
    let mut z = vec![C64::ZERO; q * p];
    for i in (0..q).rev() {
        for k in (0..p).rev() {
            let mut s = b[i] * v[k];
            for i2 in i + 1..q {
                s -= td.at(i, i2) * z[i2 * p + k];
            }
            for k2 in k + 1..p {
                s -= tc.at(k, k2) * z[i * p + k2];
            }
            z[i * p + k] = s / (td.at(i, i) + tc.at(k, k) + shift);
        }
    }
    (0..p).map(|k| (0..q).map(|i| a[i] * z[i * p + k]).sum()).collect()
}

pub struct SpectralEngine {
    beta2: f64,
    decomp: BlockDecomposition,
    a: ComplexMatrix,
    a_row0: Vec<C64>,
    a_col0: Vec<C64>,
    blocks: Vec<Block>,
    slots: usize,
    /// `(lambda_d, c_d = a_0d a_d0)` of the scalar non-null blocks.
    scalar_poles: Vec<(C64, C64)>,
    /// Indices of blocks larger than `1 x 1`.
    dense: Vec<usize>,
    mean: f64,
    scale: f64,
    exec: Execution,
    fallbacks: AtomicUsize,
    label: String,
}

fn key(w: f64) -> u64 {
    if w == 0.0 {
        0
    } else {
        w.to_bits()
    }
}

#[derive(Default)]
struct FreqIndex {
    map: HashMap<u64, usize>,
    freqs: Vec<f64>,
}

impl FreqIndex {
    fn add(&mut self, w: f64) {
        let n = self.freqs.len();
        if let std::collections::hash_map::Entry::Vacant(e) = self.map.entry(key(w)) {
            e.insert(n);
            self.freqs.push(w);
        }
    }

    fn get(&self, w: f64) -> usize {
        self.map[&key(w)]
    }
}

impl SpectralEngine {
    pub fn new(model: &LiouvillianModel) -> Result<Self> {
        let decomp = block_decompose(model.liouvillian())?;
        Self::from_decomposition(model, decomp)
    }

    pub fn from_decomposition(model: &LiouvillianModel, decomp: BlockDecomposition) -> Result<Self> {
        let n = decomp.dim();
        if n != model.dim() {
            return Err(Error::DimensionMismatch {
                what: "spectral decomposition".into(),
                expected: model.dim(),
                got: n,
            });
        }
        let op = model.measurement_op();
        let rho0 = decomp.steady_state();
        let mean_a = trace(&measurement_superop(op)?.apply(rho0)?);
        // A' applied column by column in operator form: (A X + X A^dagger)/2 - <A> X.
        let r = decomp.right();
        let k = n * n;
        let adj = op.adjoint().to_owned();
        let mut ar = Mat::<C64>::zeros(k, k);
        for col in 0..k {
            let x = Mat::from_fn(n, n, |i, j| r[(j * n + i, col)]);
            let y = (op * &x + &x * &adj) * faer::Scale(C64::new(0.5, 0.0));
            for j in 0..n {
                for i in 0..n {
                    ar[(j * n + i, col)] = y[(i, j)] - mean_a * x[(i, j)];
                }
            }
        }
        let a = decomp.left_adjoint() * &ar;
        let null = decomp.null_index();
        let a_row0: Vec<C64> = (0..k).map(|j| a[(null, j)]).collect();
        let a_col0: Vec<C64> = (0..k).map(|j| a[(j, null)]).collect();

        let mut slots = 0;
        let blocks: Vec<Block> = decomp
            .blocks()
            .iter()
            .map(|b| {
                let blk = Block {
                    start: b.start(),
                    len: b.len(),
                    slot: slots,
                    t: b.entries().to_vec(),
                    null: b.start() == null,
                };
                slots += b.len() * b.len();
                blk
            })
            .collect();
        let scalar_poles = blocks
            .iter()
            .filter(|b| b.len == 1 && !b.null)
            .map(|b| (b.lambda(), a_row0[b.start] * a_col0[b.start]))
            .collect();
        let dense = (0..blocks.len()).filter(|&i| blocks[i].len > 1).collect();
        let scale = decomp.eigenvalues().iter().map(|v| v.norm()).fold(0.0, f64::max);
        debug!(
            "spectral engine: {k} modes in {} blocks (largest {}), <A> = {mean_a}",
            blocks.len(),
            decomp.largest_block()
        );
        Ok(Self {
            beta2: model.beta2(),
            decomp,
            a,
            a_row0,
            a_col0,
            blocks,
            slots,
            scalar_poles,
            dense,
            mean: model.beta2() * mean_a.re,
            scale,
            exec: Execution::default(),
            fallbacks: AtomicUsize::new(0),
            label: model.fingerprint(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn decomposition(&self) -> &BlockDecomposition {
        &self.decomp
    }

    /// Stationary mean detector output `<z> = beta^2 Tr(A rho0)`.
    pub fn mean_output(&self) -> f64 {
        self.mean
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// Number of partial-fraction terms that fell back to direct summation.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    fn modes(&self) -> usize {
        self.a_row0.len()
    }

    fn tagged(&self, mut s: PolySpectrum) -> PolySpectrum {
        s.meta.insert("model".into(), self.label.clone());
        s.meta.insert("method".into(), "block spectral closed form".into());
        s
    }

    /// Flat block-diagonal `G'(w)`: slot of block `b` holds `G_b(w)` row-major.
    fn resolvent(&self, w: f64) -> Vec<C64> {
        let mut out = vec![C64::ZERO; self.slots];
        let shift = I * w;
        for b in &self.blocks {
            if b.null {
                continue;
            }
            if b.len == 1 {
                out[b.slot] = -1.0 / (b.lambda() + shift);
                continue;
            }
            let p = b.len;
            for j in 0..p {
                let mut e = vec![C64::ZERO; p];
                e[j] = -C64::ONE;
                let x = b.solve(shift, &e);
                for i in 0..p {
                    out[b.slot + i * p + j] = x[i];
                }
            }
        }
        out
    }

    /// `u G` for a row vector `u`.
    fn left(&self, u: &[C64], r: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::ZERO; u.len()];
        for b in &self.blocks {
            let p = b.len;
            for j in 0..p {
                out[b.start + j] = (0..p).map(|i| u[b.start + i] * r[b.slot + i * p + j]).sum();
            }
        }
        out
    }

    /// `G v` for a column vector `v`.
    fn right(&self, r: &[C64], v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::ZERO; v.len()];
        for b in &self.blocks {
            let p = b.len;
            for i in 0..p {
                out[b.start + i] = (0..p).map(|j| r[b.slot + i * p + j] * v[b.start + j]).sum();
            }
        }
        out
    }

    fn block_bilinear<F: Fn(usize) -> C64>(b: &Block, u: &[C64], r: &[C64], v: F) -> C64 {
        if b.len == 1 {
            return u[b.start] * r[b.slot] * v(b.start);
        }
        let p = b.len;
        let mut s = C64::ZERO;
        for i in 0..p {
            let mut row = C64::ZERO;
            for j in 0..p {
                row += r[b.slot + i * p + j] * v(b.start + j);
            }
            s += u[b.start + i] * row;
        }
        s
    }

    /// `u G v`.
    fn bilinear(&self, u: &[C64], r: &[C64], v: &[C64]) -> C64 {
        self.blocks.iter().map(|b| Self::block_bilinear(b, u, r, |i| v[i])).sum()
    }

    /// `Tr[A' G'(w) A' rho0]`.
    pub fn two_point(&self, w: f64) -> C64 {
        self.bilinear(&self.a_row0, &self.resolvent(w), &self.a_col0)
    }

    /// Power spectrum with the noise floor included.
    pub fn s2(&self, omegas: &[f64]) -> PolySpectrum {
        let b4 = self.beta2 * self.beta2;
        let values = self
            .exec
            .map(omegas, |&w| (self.two_point(w) + self.two_point(-w)) * b4);
        self.tagged(PolySpectrum::new_1d(omegas.to_vec(), values, self.beta2).with_noise_floor())
    }

    /// `x_f = (a_{0,:} G(w_f)) a`, one output row per frequency.
    fn rows_times_a(&self, rows: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let k = self.modes();
        let m = Mat::from_fn(rows.len(), k, |f, j| rows[f][j]);
        let x = &m * &self.a;
        (0..rows.len()).map(|f| (0..k).map(|j| x[(f, j)]).collect()).collect()
    }

    /// `w_f = a (G(w_f) a_{:,0})`.
    fn a_times_columns(&self, freqs: &[f64]) -> Vec<Vec<C64>> {
        let k = self.modes();
        let cols = self.exec.map(freqs, |&w| self.right(&self.resolvent(w), &self.a_col0));
        let v = Mat::from_fn(k, freqs.len(), |j, f| cols[f][j]);
        let w = &self.a * &v;
        (0..freqs.len()).map(|f| (0..k).map(|j| w[(j, f)]).collect()).collect()
    }

    /// Bispectrum on `omega1 x omega2`.
    pub fn s3(&self, omega1: &[f64], omega2: &[f64]) -> PolySpectrum {
        let triples = |w1: f64, w2: f64| [w1, w2, -(w1 + w2)];
        let mut rows = FreqIndex::default();
        let mut cols = FreqIndex::default();
        for &w1 in omega1 {
            for &w2 in omega2 {
                for w in triples(w1, w2) {
                    rows.add(w);
                    cols.add(-w);
                }
            }
        }
        let row_vecs: Vec<Vec<C64>> = self
            .exec
            .map(&rows.freqs, |&w| self.left(&self.a_row0, &self.resolvent(w)));
        let col_vecs = self.a_times_columns(&cols.freqs);
        let b6 = self.beta2.powi(3);
        let n2 = omega2.len();
        let values = self.exec.map_range(omega1.len() * n2, |p| {
            let ws = triples(omega1[p / n2], omega2[p % n2]);
            let mut total = C64::ZERO;
            for m in 0..3 {
                let r = &row_vecs[rows.get(ws[m])];
                for k in 0..3 {
                    if k != m {
                        let w = &col_vecs[cols.get(-ws[k])];
                        total += r.iter().zip(w).map(|(x, y)| x * y).sum::<C64>();
                    }
                }
            }
            total * b6
        });
        self.tagged(PolySpectrum::new_2d(3, omega1.to_vec(), omega2.to_vec(), values, self.beta2))
    }

    /// Trispectrum cut `(w1, w2, -w1, -w2)` on `omega1 x omega2`.
    pub fn s4(&self, omega1: &[f64], omega2: &[f64]) -> PolySpectrum {
        let b8 = self.beta2.powi(4);
        let terms = self.s4_terms_grid(omega1, omega2);
        let values = terms.iter().map(|t| t.total() * b8).collect();
        self.tagged(PolySpectrum::new_2d(4, omega1.to_vec(), omega2.to_vec(), values, self.beta2))
    }

    /// Permutation-summed triple term and the two integral terms at every
    /// cut point, without the `beta^8` prefactor.
    pub fn s4_terms_grid(&self, omega1: &[f64], omega2: &[f64]) -> Vec<S4Terms> {
        let quads = |w1: f64, w2: f64| [w1, w2, -w1, -w2];
        let perms = permutations4();
        let mut outer = FreqIndex::default();
        let mut inner = FreqIndex::default();
        let mut last = FreqIndex::default();
        let mut diff = FreqIndex::default();
        for &w1 in omega1 {
            for &w2 in omega2 {
                let ws = quads(w1, w2);
                for &[k, _, m, n] in &perms {
                    outer.add(ws[n]);
                    inner.add(ws[m] + ws[n]);
                    last.add(-ws[k]);
                    diff.add(ws[m] + ws[n] + ws[k]);
                }
            }
        }
        let u_outer: Vec<Vec<C64>> = self
            .exec
            .map(&outer.freqs, |&w| self.left(&self.a_row0, &self.resolvent(w)));
        let x_outer = self.rows_times_a(&u_outer);
        let g_inner: Vec<Vec<C64>> = self.exec.map(&inner.freqs, |&w| self.resolvent(w));
        let z_inner: Vec<Vec<C64>> = self.exec.map(&inner.freqs, |&w| self.z_times_col0(w));
        let g_last: Vec<Vec<C64>> = self.exec.map(&last.freqs, |&w| self.resolvent(w));
        let w_last = self.a_times_columns(&last.freqs);
        let s_last: Vec<C64> = g_last
            .iter()
            .map(|g| self.bilinear(&self.a_row0, g, &self.a_col0))
            .collect();
        let g_diff: Vec<Vec<C64>> = self.exec.map(&diff.freqs, |&w| self.resolvent(w));
        let tol = PARTIAL_FRACTION_TOLERANCE * self.scale;
        let near_pole: Vec<Vec<bool>> = diff
            .freqs
            .iter()
            .map(|&w| self.blocks.iter().map(|b| !b.null && b.min_pivot(I * w) <= tol).collect())
            .collect();

        let n2 = omega2.len();
        self.exec.map_range(omega1.len() * n2, |p| {
            let ws = quads(omega1[p / n2], omega2[p % n2]);
            let mut t = S4Terms::default();
            for &[k, _, m, n] in &perms {
                let io = outer.get(ws[n]);
                let ii = inner.get(ws[m] + ws[n]);
                let il = last.get(-ws[k]);
                let id = diff.get(ws[m] + ws[n] + ws[k]);
                let (u, x) = (&u_outer[io], &x_outer[io]);
                let (gi, zi) = (&g_inner[ii], &z_inner[ii]);
                let (gl, wl, sl) = (&g_last[il], &w_last[il], s_last[il]);
                let gd = &g_diff[id];
                t.triple += self.bilinear(x, gi, wl);
                t.second_integral += self.bilinear(u, gl, zi);
                for (b, &skip) in self.blocks.iter().zip(&near_pole[id]) {
                    if b.null {
                        continue;
                    }
                    t.first_integral += if skip {
                        if self.fallbacks.fetch_add(1, Ordering::Relaxed) == 0 {
                            warn!("near-coincident poles in fourth-order integral; summing directly");
                        }
                        self.direct_first(b, u, inner.freqs[ii], gl)
                    } else {
                        Self::block_bilinear(b, u, gd, |i| sl * self.a_col0[i] - zi[i])
                    };
                }
            }
            t
        })
    }

    /// `Z_b(W) a_{b,0}` for every block, `Z_b(W) = s(W - i T_b)`.
    fn z_times_col0(&self, big_w: f64) -> Vec<C64> {
        let mut out = vec![C64::ZERO; self.modes()];
        let shift = I * big_w;
        for c in &self.blocks {
            if c.null {
                continue;
            }
            let v = &self.a_col0[c.start..c.start + c.len];
            let z = if c.len == 1 {
                let base = c.lambda() + shift;
                let mut s: C64 = self.scalar_poles.iter().map(|&(l, cd)| -cd / (base + l)).sum();
                for &d in &self.dense {
                    let d = &self.blocks[d];
                    let r = d.solve(base, &self.a_col0[d.start..d.start + d.len]);
                    s -= (0..d.len).map(|i| self.a_row0[d.start + i] * r[i]).sum::<C64>();
                }
                vec![s * v[0]]
            } else {
                let mut acc = vec![C64::ZERO; c.len];
                for d in &self.blocks {
                    if d.null {
                        continue;
                    }
                    let r = kron_apply(
                        &self.a_row0[d.start..d.start + d.len],
                        &self.a_col0[d.start..d.start + d.len],
                        d,
                        c,
                        shift,
                        v,
                    );
                    for (a, x) in acc.iter_mut().zip(r) {
                        *a -= x;
                    }
                }
                acc
            };
            out[c.start..c.start + c.len].copy_from_slice(&z);
        }
        out
    }

    /// `u_b t(W - i T_b) a_{b,0}` with `t(w) = Tr[A' G'(w) G'(w') A' rho0]`,
    /// summed over all blocks without partial fractions.
    fn direct_first(&self, c: &Block, u: &[C64], big_w: f64, g_last: &[C64]) -> C64 {
        let shift = I * big_w;
        let v = &self.a_col0[c.start..c.start + c.len];
        let glv = self.right(g_last, &self.a_col0);
        let mut y = vec![C64::ZERO; c.len];
        for d in &self.blocks {
            if d.null {
                continue;
            }
            let r = kron_apply(
                &self.a_row0[d.start..d.start + d.len],
                &glv[d.start..d.start + d.len],
                d,
                c,
                shift,
                v,
            );
            for (a, x) in y.iter_mut().zip(r) {
                *a -= x;
            }
        }
        (0..c.len).map(|i| u[c.start + i] * y[i]).sum()
    }
}

/// All 24 orderings `[k, l, m, n]` of `0..4`.
pub(crate) fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let distinct = (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j]));
                    if distinct {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}
