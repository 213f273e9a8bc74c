//! Dense symmetric indefinite factorization `P A Pᵀ = L D Lᵀ` with
//! Bunch–Kaufman pivoting and inertia counting.

/// Eigenvalue sign counts of `D` (equal to those of `A`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    /// Row-major; strict lower part holds `L`, diagonal and first
    /// subdiagonal of 2x2 blocks hold `D`.
    a: Vec<f64>,
    /// `perm[i]` is the original index of factored row `i`.
    perm: Vec<usize>,
    /// Block size (1 or 2) starting at each pivot; 0 inside a 2x2 block.
    block: Vec<u8>,
    inertia: Inertia,
}

const ALPHA: f64 = 0.640_388_203_202_208_0; // (1 + sqrt 17) / 8

impl Ldl {
    /// Factors the symmetric matrix whose lower triangle is stored
    /// row-major in `lower` (`n * n`, upper part ignored). Pivots with
    /// magnitude at most `tiny` count as zero.
    pub fn factor(n: usize, mut lower: Vec<f64>, tiny: f64) -> Ldl {
        assert_eq!(lower.len(), n * n);
        let a = &mut lower;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut block = vec![0u8; n];
        let mut inertia = Inertia::default();
        let mut col = vec![0.0; n];
        let mut col2 = vec![0.0; n];
        let mut k = 0;
        while k < n {
            let absakk = a[k * n + k].abs();
            let (mut imax, mut colmax) = (k, 0.0);
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > colmax {
                    imax = i;
                    colmax = v;
                }
            }
            let mut kstep = 1;
            let kp;
            if absakk.max(colmax) <= tiny {
                // zero column: record a zero pivot and move on
                a[k * n + k] = 0.0;
                for i in k + 1..n {
                    a[i * n + k] = 0.0;
                }
                block[k] = 1;
                inertia.zero += 1;
                k += 1;
                continue;
            } else if absakk >= ALPHA * colmax {
                kp = k;
            } else {
                let mut rowmax: f64 = 0.0;
                for j in k..imax {
                    rowmax = rowmax.max(a[imax * n + j].abs());
                }
                for i in imax + 1..n {
                    rowmax = rowmax.max(a[i * n + imax].abs());
                }
                if absakk >= ALPHA * colmax * (colmax / rowmax) {
                    kp = k;
                } else if a[imax * n + imax].abs() >= ALPHA * rowmax {
                    kp = imax;
                } else {
                    kp = imax;
                    kstep = 2;
                }
            }
            let kk = k + kstep - 1;
            if kp != kk {
                swap_sym(a, n, kk, kp);
                perm.swap(kk, kp);
            }

            if kstep == 1 {
                let d = a[k * n + k];
                if d.abs() <= tiny {
                    inertia.zero += 1;
                    a[k * n + k] = 0.0;
                    for i in k + 1..n {
                        a[i * n + k] = 0.0;
                    }
                } else {
                    if d > 0.0 {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                    for i in k + 1..n {
                        col[i] = a[i * n + k];
                    }
                    for i in k + 1..n {
                        let f = col[i] / d;
                        if f != 0.0 {
                            let row = &mut a[i * n + k + 1..i * n + i + 1];
                            for (r, c) in row.iter_mut().zip(&col[k + 1..=i]) {
                                *r -= f * c;
                            }
                        }
                        a[i * n + k] = f;
                    }
                }
                block[k] = 1;
            } else {
                let d11 = a[k * n + k];
                let d21 = a[(k + 1) * n + k];
                let d22 = a[(k + 1) * n + k + 1];
                let det = d11 * d22 - d21 * d21;
                if det < 0.0 {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if det > 0.0 {
                    if d11 + d22 > 0.0 {
                        inertia.positive += 2;
                    } else {
                        inertia.negative += 2;
                    }
                } else {
                    inertia.zero += 2;
                }
                for i in k + 2..n {
                    col[i] = a[i * n + k];
                    col2[i] = a[i * n + k + 1];
                }
                // rows of L: [l1 l2] = [a_ik a_ik1] D^{-1}
                let (i11, i12, i22) = (d22 / det, -d21 / det, d11 / det);
                for i in k + 2..n {
                    let (u, v) = (col[i], col2[i]);
                    let l1 = u * i11 + v * i12;
                    let l2 = u * i12 + v * i22;
                    if l1 != 0.0 || l2 != 0.0 {
                        let row = &mut a[i * n + k + 2..i * n + i + 1];
                        for ((r, c1), c2) in row.iter_mut().zip(&col[k + 2..=i]).zip(&col2[k + 2..=i]) {
                            *r -= l1 * c1 + l2 * c2;
                        }
                    }
                    a[i * n + k] = l1;
                    a[i * n + k + 1] = l2;
                }
                block[k] = 2;
                block[k + 1] = 0;
            }
            k += kstep;
        }
        Ldl { n, a: lower, perm, block, inertia }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place. Zero pivots act as zero rows of `D⁺`.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let a = &self.a;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // forward: L y = P b, skipping the 2x2 coupling stored in L's slot
        let mut k = 0;
        while k < n {
            let s = self.block[k] as usize;
            for j in k..k + s {
                let yj = y[j];
                if yj != 0.0 {
                    for i in k + s..n {
                        y[i] -= a[i * n + j] * yj;
                    }
                }
            }
            k += s;
        }
        // block diagonal
        let mut k = 0;
        while k < n {
            if self.block[k] == 1 {
                let d = a[k * n + k];
                y[k] = if d == 0.0 { 0.0 } else { y[k] / d };
                k += 1;
            } else {
                let (d11, d21, d22) = (a[k * n + k], a[(k + 1) * n + k], a[(k + 1) * n + k + 1]);
                let det = d11 * d22 - d21 * d21;
                let (u, v) = (y[k], y[k + 1]);
                y[k] = (d22 * u - d21 * v) / det;
                y[k + 1] = (d11 * v - d21 * u) / det;
                k += 2;
            }
        }
        // backward: Lᵀ x = z
        let starts: Vec<usize> = (0..n).filter(|&k| self.block[k] != 0).collect();
        for &k in starts.iter().rev() {
            let s = self.block[k] as usize;
            for j in k..k + s {
                let mut acc = y[j];
                for i in k + s..n {
                    acc -= a[i * n + j] * y[i];
                }
                y[j] = acc;
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = y[i];
        }
    }
}

/// Symmetric interchange of rows/columns `p < q` in lower storage,
/// including the already factored columns `0..p`.
fn swap_sym(a: &mut [f64], n: usize, p: usize, q: usize) {
    debug_assert!(p < q);
    for j in 0..p {
        a.swap(p * n + j, q * n + j);
    }
    for j in p + 1..q {
        a.swap(j * n + p, q * n + j);
    }
    for i in q + 1..n {
        a.swap(i * n + p, i * n + q);
    }
    a.swap(p * n + p, q * n + q);
}

/// `y = A x` for a symmetric matrix in lower storage.
pub fn sym_matvec(n: usize, lower: &[f64], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let row = &lower[i * n..i * n + i];
        let mut acc = lower[i * n + i] * x[i];
        for (j, &aij) in row.iter().enumerate() {
            acc += aij * x[j];
            y[j] += aij * x[i];
        }
        y[i] += acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lower_of(full: &[f64], n: usize) -> Vec<f64> {
        let mut l = full.to_vec();
        for i in 0..n {
            for j in i + 1..n {
                l[i * n + j] = 0.0;
            }
        }
        l
    }

    fn check_solve(full: &[f64], n: usize) -> Inertia {
        let f = Ldl::factor(n, lower_of(full, n), 1e-14);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = (0..n).map(|j| full[i * n + j] * x[j]).sum();
        }
        f.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-9, "{i}: {} vs {}", b[i], x[i]);
        }
        f.inertia()
    }

    #[test]
    fn saddle_point_inertia() {
        // [[2, 1], [1, 0]] has one positive, one negative eigenvalue
        let i = check_solve(&[2.0, 1.0, 1.0, 0.0], 2);
        assert_eq!((i.positive, i.negative, i.zero), (1, 1, 0));
        // zero diagonal forces a 2x2 pivot
        let i = check_solve(&[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 3.0], 3);
        assert_eq!(i.positive + i.negative, 3);
    }

    #[test]
    fn random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 3, 8, 25] {
            for _ in 0..5 {
                let mut full = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        let v = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-1.0..1.0) };
                        full[i * n + j] = v;
                        full[j * n + i] = v;
                    }
                    full[i * n + i] += if i % 2 == 0 { n as f64 + 1.0 } else { -(n as f64) - 1.0 };
                }
                // diagonal dominance fixes the eigenvalue signs
                let inertia = check_solve(&full, n);
                assert_eq!(inertia.zero, 0);
                assert_eq!(inertia.positive, n.div_ceil(2));
            }
        }
    }

    #[test]
    fn singular_matrix_reports_zero() {
        let f = Ldl::factor(2, vec![1.0, 0.0, 1.0, 1.0], 1e-14);
        assert_eq!(f.inertia(), Inertia { positive: 1, negative: 0, zero: 1 });
    }

    #[test]
    fn matvec_uses_both_triangles() {
        let lower = vec![1.0, 0.0, 2.0, 3.0];
        let mut y = vec![0.0; 2];
        sym_matvec(2, &lower, &[1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, 5.0]);
    }
}
