//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerics.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain SplitMix64 (Steele, Lea, Flood), written out from its definition.
pub struct RefSplitMix(pub u64);

impl RefSplitMix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, range: f64) -> f64 {
        let unit = (self.next() >> 11) as f64 / 9_007_199_254_740_992.0;
        range * (2.0 * unit - 1.0)
    }
}

/// Dense row-major square matrix for oracle arithmetic.
#[derive(Clone, Debug)]
pub struct Sq {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Sq {
    pub fn zeros(n: usize) -> Self {
        Sq { n, a: vec![0.0; n * n] }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn mul(&self, o: &Sq) -> Sq {
        let n = self.n;
        let mut c = Sq::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let v = self.a[i * n + k];
                if v == 0.0 {
                    continue;
                }
                for j in 0..n {
                    c.a[i * n + j] += v * o.a[k * n + j];
                }
            }
        }
        c
    }

    pub fn t(&self) -> Sq {
        let n = self.n;
        let mut c = Sq::zeros(n);
        for i in 0..n {
            for j in 0..n {
                c.a[j * n + i] = self.a[i * n + j];
            }
        }
        c
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i * self.n + j] * v[j]).sum())
            .collect()
    }

    pub fn fro(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Kronecker product written from the block definition.
pub fn kron_ref(a: &Sq, b: &Sq) -> Sq {
    let n = a.n * b.n;
    let mut c = Sq::zeros(n);
    for i in 0..a.n {
        for j in 0..a.n {
            for p in 0..b.n {
                for q in 0..b.n {
                    c.a[(i * b.n + p) * n + j * b.n + q] = a.at(i, j) * b.at(p, q);
                }
            }
        }
    }
    c
}

/// Double-integrator plant matrix for agent dimension 1.
pub fn plant() -> Sq {
    Sq { n: 2, a: vec![1.0, 1.0, 0.0, 1.0] }
}

/// `P = Σ_k (Mᵏ)ᵀ Q Mᵏ` with `Q = q·I`, summed until a term is negligible.
pub fn lyapunov_series_oracle(m: &Sq, q: f64) -> Sq {
    let n = m.n;
    let mut t = Sq::eye(n);
    let mut p = Sq::zeros(n);
    for _ in 0..100_000 {
        let term = t.t().mul(&t);
        let mut tn = 0.0;
        for (pv, tv) in p.a.iter_mut().zip(&term.a) {
            *pv += q * tv;
            tn += (q * tv).powi(2);
        }
        if tn.sqrt() < 1e-17 * p.fro() {
            return p;
        }
        t = t.mul(m);
    }
    panic!("series oracle did not converge");
}

/// `D̄ = I − (I + diag(bounds))⁻¹ L̂` for the root `theta` (0-based),
/// built straight from the weight table `w[i][j] = a_ij`.
pub fn dbar_ref(w: &[Vec<f64>], theta: usize, bounds: &[f64]) -> Sq {
    let n = w.len();
    let keep: Vec<usize> = (0..n).filter(|&i| i != theta).collect();
    let m = keep.len();
    let mut d = Sq::zeros(m);
    for (r, &i) in keep.iter().enumerate() {
        let deg: f64 = w[i].iter().sum();
        for (c, &j) in keep.iter().enumerate() {
            let l = if i == j { deg } else { -w[i][j] };
            d.a[r * m + c] = f64::from(u8::from(r == c)) - l / (1.0 + bounds[i]);
        }
    }
    d
}

/// Nodes from which every node is reachable, found by repeated squaring
/// of the boolean reachability matrix.
pub fn roots_by_closure(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    // reach[j][i]: information flows from j to i (a_ij > 0 means j → i)
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if w[i][j] > 0.0 {
                reach[j][i] = true;
            }
        }
    }
    for k in 0..n {
        for a in 0..n {
            if reach[a][k] {
                for b in 0..n {
                    if reach[k][b] {
                        reach[a][b] = true;
                    }
                }
            }
        }
    }
    (0..n).filter(|&r| reach[r].iter().all(|&x| x)).collect()
}

/// Random weighted digraph on `n` nodes with edge probability `p`,
/// as a weight table `w[to][from]`.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j && rng.gen_bool(p) {
                *v = rng.gen_range(0.1..3.0);
            }
        }
    }
    w
}

/// Random digraph guaranteed to contain a directed spanning tree: a random
/// arborescence from a random root plus extra random edges.
pub fn random_rooted_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let p = rng.gen_range(0.0..0.4);
    let mut w = random_weights(rng, n, p);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let child = order[k];
        if w[child][parent] == 0.0 {
            w[child][parent] = rng.gen_range(0.1..3.0);
        }
    }
    w
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weight table of the library graph, for handing to oracles.
pub fn weights_of(g: &satsync::WeightedDigraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    (0..n).map(|i| (0..n).map(|j| g.weight(i, j)).collect()).collect()
}

pub fn to_sq(m: &satsync::Matrix) -> Sq {
    assert!(m.is_square());
    Sq { n: m.rows(), a: m.as_slice().to_vec() }
}

/// `‖Mᵏ‖_F^(1/k)` by binary powering with explicit log-scale tracking,
/// an upper estimate that converges to ρ(M) as `k` grows.
pub fn growth_rate(m: &Sq, k: u32) -> f64 {
    // p = P̃·exp(lp), base = B̃·exp(lb)
    let mut p = Sq::eye(m.n);
    let mut lp = 0.0;
    let mut base = m.clone();
    let mut lb = 0.0;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            p = p.mul(&base);
            lp += lb;
            let f = p.fro();
            if f == 0.0 {
                return 0.0;
            }
            p.a.iter_mut().for_each(|x| *x /= f);
            lp += f.ln();
        }
        e >>= 1;
        if e > 0 {
            base = base.mul(&base);
            lb *= 2.0;
            let f = base.fro();
            if f == 0.0 {
                return 0.0;
            }
            base.a.iter_mut().for_each(|x| *x /= f);
            lb += f.ln();
        }
    }
    (lp / k as f64).exp()
}
