//! Householder QR with column-norm pivoting for small dense least squares.

/// Relative size below which a pivot counts as zero, after unit-norm column scaling.
const RANK_TOL: f64 = 1e-10;

pub(crate) enum LstsqOutcome {
    Solved(Vec<f64>),
    /// Input column indices that are linear combinations of the others.
    RankDeficient(Vec<usize>),
}

/// Minimizes ‖A x − b‖₂. `cols` holds the columns of A, each of length n.
pub(crate) fn lstsq(cols: &[Vec<f64>], b: &[f64]) -> LstsqOutcome {
    let p = cols.len();
    let n = b.len();
    let scale: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let zero: Vec<usize> = (0..p).filter(|&j| !(scale[j] > 0.0)).collect();
    if !zero.is_empty() {
        return LstsqOutcome::RankDeficient(zero);
    }
    let mut a: Vec<Vec<f64>> = cols.iter().zip(&scale).map(|(c, s)| c.iter().map(|v| v / s).collect()).collect();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut rdiag = vec![0.0; p];
    let mut first_pivot = 0.0;

    for k in 0..p.min(n) {
        let tail_norm = |c: &Vec<f64>| c[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let (j, norm) = (k..p)
            .map(|j| (j, tail_norm(&a[j])))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if k == 0 {
            first_pivot = norm;
        }
        if norm <= RANK_TOL * first_pivot {
            return LstsqOutcome::RankDeficient(perm[k..].to_vec());
        }
        a.swap(k, j);
        perm.swap(k, j);

        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        rdiag[k] = alpha;
        if vnorm2 > 0.0 {
            let reflect = |col: &mut [f64]| {
                let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in col.iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            };
            for col in a.iter_mut().skip(k + 1) {
                reflect(&mut col[k..]);
            }
            reflect(&mut qtb[k..]);
        }
        a[k][k] = alpha;
    }
    if p > n {
        return LstsqOutcome::RankDeficient(perm[n..].to_vec());
    }

    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[j][k] * x[j]).sum();
        x[k] = (qtb[k] - s) / rdiag[k];
    }
    let mut out = vec![0.0; p];
    for (k, &orig) in perm.iter().enumerate() {
        out[orig] = x[k] / scale[orig];
    }
    LstsqOutcome::Solved(out)
}
