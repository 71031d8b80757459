#![allow(dead_code)]

use std::f64::consts::PI;

use canopyfuse::cloud::VoxelSignal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real, non-negative, band-limited periodic signal on an `n³` grid, built
/// from random Fourier coefficients with |k_a| <= `band`, evaluated at
/// positions displaced by `shift` cells: returns `s(x - shift)`.
pub fn band_limited(seed: u64, n: usize, band: i64, shift: [f64; 3]) -> VoxelSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for kz in -band..=band {
        for ky in -band..=band {
            for kx in 0..=band {
                let upper = kx > 0 || (kx == 0 && ky > 0) || (kx == 0 && ky == 0 && kz > 0);
                if !upper {
                    continue;
                }
                let amp = rng.random_range(0.2..1.0) / (1.0 + (kx * kx + ky * ky + kz * kz) as f64);
                let ph = rng.random_range(0.0..2.0 * PI);
                terms.push(([kx as f64, ky as f64, kz as f64], amp, ph));
            }
        }
    }
    let total_amp: f64 = terms.iter().map(|t| 2.0 * t.1).sum();
    let nf = n as f64;
    let mut values = vec![0.0; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let x = [i as f64 - shift[0], j as f64 - shift[1], k as f64 - shift[2]];
                let mut v = total_amp;
                for (kk, amp, ph) in &terms {
                    let arg = 2.0 * PI * (kk[0] * x[0] + kk[1] * x[1] + kk[2] * x[2]) / nf + ph;
                    v += 2.0 * amp * arg.cos();
                }
                values[i + n * (j + n * k)] = v.max(0.0);
            }
        }
    }
    VoxelSignal::from_values([0.0; 3], 1.0, [n, n, n], values).unwrap()
}

/// Random sparse blob content confined to `[lo, hi)` per axis inside an `n³` grid.
pub fn blobs(seed: u64, n: usize, lo: usize, hi: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; n * n * n];
    for _ in 0..(hi - lo).pow(3) / 3 {
        let i = rng.random_range(lo..hi);
        let j = rng.random_range(lo..hi);
        let k = rng.random_range(lo..hi);
        v[i + n * (j + n * k)] += rng.random_range(1.0..5.0);
    }
    v
}

/// Circularly shifts an `n³` x-fastest grid by integer cells.
pub fn roll(v: &[f64], n: usize, s: [i64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let ni = n as i64;
    for k in 0..ni {
        for j in 0..ni {
            for i in 0..ni {
                let d = [(i + s[0]).rem_euclid(ni), (j + s[1]).rem_euclid(ni), (k + s[2]).rem_euclid(ni)];
                out[(d[0] + ni * (d[1] + ni * d[2])) as usize] = v[(i + ni * (j + ni * k)) as usize];
            }
        }
    }
    out
}

/// Brute-force circular cross-correlation c(t) = sum_x f(x) g(x - t) of the
/// mean-removed signals, at every integer lag.
pub fn xcorr_lags(f: &VoxelSignal, g: &VoxelSignal) -> Vec<f64> {
    let n = f.dims()[0];
    let fm = f.total_mass() / f.values().len() as f64;
    let gm = g.total_mass() / g.values().len() as f64;
    let fv: Vec<f64> = f.values().iter().map(|v| v - fm).collect();
    let gv: Vec<f64> = g.values().iter().map(|v| v - gm).collect();
    let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let mut c = vec![0.0; n * n * n];
    for tz in 0..n {
        for ty in 0..n {
            for tx in 0..n {
                let mut acc = 0.0;
                for z in 0..n {
                    let gz = (z + n - tz) % n;
                    for y in 0..n {
                        let gy = (y + n - ty) % n;
                        let frow = &fv[idx(0, y, z)..idx(0, y, z) + n];
                        let grow = &gv[idx(0, gy, gz)..idx(0, gy, gz) + n];
                        for x in 0..n {
                            acc += frow[x] * grow[(x + n - tx) % n];
                        }
                    }
                }
                c[idx(tx, ty, tz)] = acc;
            }
        }
    }
    c
}

fn wrap_lag(t: f64, n: usize) -> f64 {
    if t >= n as f64 / 2.0 {
        t - n as f64
    } else {
        t
    }
}

/// Integer lag of the largest correlation.
fn peak_index(c: &[f64], n: usize) -> [usize; 3] {
    let mut best = 0;
    for i in 0..c.len() {
        if c[i] > c[best] {
            best = i;
        }
    }
    [best % n, (best / n) % n, best / (n * n)]
}

/// Periodic sinc (Dirichlet) kernel for an even period `n`, exact for
/// samples without Nyquist content.
fn dirichlet(u: f64, n: usize) -> f64 {
    let nf = n as f64;
    let s = (std::f64::consts::PI * u / nf).tan();
    if s.abs() < 1e-12 {
        return if (u / nf).round() as i64 % 2 == 0 { 1.0 } else { -1.0 };
    }
    (std::f64::consts::PI * u).sin() / (nf * s)
}

/// Cross-correlation peak located on the band-limited interpolant of the
/// integer-lag correlation, which is exact when both signals are
/// band-limited below the Nyquist frequency. Returns the lag (cells) that
/// best carries `g` onto `f`.
pub fn xcorr_peak_bandlimited(f: &VoxelSignal, g: &VoxelSignal) -> [f64; 3] {
    let n = f.dims()[0];
    let c = xcorr_lags(f, g);
    let p = peak_index(&c, n);
    let eval = |t: [f64; 3]| {
        let w: Vec<[f64; 3]> = (0..n)
            .map(|i| [dirichlet(t[0] - i as f64, n), dirichlet(t[1] - i as f64, n), dirichlet(t[2] - i as f64, n)])
            .collect();
        let mut acc = 0.0;
        for k in 0..n {
            for j in 0..n {
                let wjk = w[j][1] * w[k][2];
                let row = &c[n * (j + n * k)..n * (j + n * k) + n];
                for i in 0..n {
                    acc += row[i] * w[i][0] * wjk;
                }
            }
        }
        acc
    };
    // Coordinate-wise golden-section search within half a cell of the integer peak.
    let mut t = [p[0] as f64, p[1] as f64, p[2] as f64];
    let g_ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..6 {
        for a in 0..3 {
            let (mut lo, mut hi) = (p[a] as f64 - 0.5, p[a] as f64 + 0.5);
            let at = |x: f64, t: [f64; 3]| {
                let mut q = t;
                q[a] = x;
                eval(q)
            };
            let mut x1 = hi - g_ratio * (hi - lo);
            let mut x2 = lo + g_ratio * (hi - lo);
            let (mut f1, mut f2) = (at(x1, t), at(x2, t));
            while hi - lo > 1e-6 {
                if f1 > f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g_ratio * (hi - lo);
                    f1 = at(x1, t);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g_ratio * (hi - lo);
                    f2 = at(x2, t);
                }
            }
            t[a] = 0.5 * (lo + hi);
        }
    }
    [wrap_lag(t[0].rem_euclid(n as f64), n), wrap_lag(t[1].rem_euclid(n as f64), n), wrap_lag(t[2].rem_euclid(n as f64), n)]
}
