//! Variable-speed random walk among i.i.d. random conductances on `Z^d`.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{hash_words, mix64, unit_f64};
use crate::tensor_path::JumpPath;

/// Largest lattice dimension supported by the site encoding.
pub const MAX_LATTICE_DIM: usize = 4;

/// Lattice site; coordinates beyond the walk's dimension stay zero.
pub type Site = [i64; MAX_LATTICE_DIM];

/// Law of a single conductance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConductanceLaw {
    Constant {
        kappa: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    /// `a` with probability `q`, `b` with probability `1 − q`.
    TwoPoint {
        a: f64,
        b: f64,
        q: f64,
    },
}

impl ConductanceLaw {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("conductance must be positive and finite, got {v}")))
            }
        };
        match *self {
            ConductanceLaw::Constant { kappa } => positive("kappa", kappa),
            ConductanceLaw::Uniform { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
                if a > b {
                    return Err(Error::param("b", format!("upper bound {b} below lower bound {a}")));
                }
                Ok(())
            }
            ConductanceLaw::TwoPoint { a, b, q } => {
                positive("a", a)?;
                positive("b", b)?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::param("q", format!("probability must lie in [0, 1], got {q}")));
                }
                Ok(())
            }
        }
    }

    /// `E[η]`.
    pub fn mean(&self) -> f64 {
        match *self {
            ConductanceLaw::Constant { kappa } => kappa,
            ConductanceLaw::Uniform { a, b } => 0.5 * (a + b),
            ConductanceLaw::TwoPoint { a, b, q } => q * a + (1.0 - q) * b,
        }
    }

    /// Support bounds `(c, C)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ConductanceLaw::Constant { kappa } => (kappa, kappa),
            ConductanceLaw::Uniform { a, b } => (a, b),
            ConductanceLaw::TwoPoint { a, b, .. } => (a.min(b), a.max(b)),
        }
    }

    /// True when the law is a point mass.
    pub fn is_degenerate(&self) -> bool {
        match *self {
            ConductanceLaw::Constant { .. } => true,
            ConductanceLaw::Uniform { a, b } => a == b,
            ConductanceLaw::TwoPoint { a, b, q } => a == b || q == 0.0 || q == 1.0,
        }
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            ConductanceLaw::Constant { kappa } => kappa,
            ConductanceLaw::Uniform { a, b } => a + (b - a) * u,
            ConductanceLaw::TwoPoint { a, b, q } => {
                if u < q {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// Hasher for bond keys, which are already well mixed integers.
#[derive(Default)]
pub struct BondHasher(u64);

impl Hasher for BondHasher {
    fn finish(&self) -> u64 {
        mix64(self.0)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }
    fn write_u64(&mut self, i: u64) {
        self.0 = mix64(self.0 ^ i);
    }
    fn write_i64(&mut self, i: i64) {
        self.write_u64(i as u64);
    }
    fn write_u8(&mut self, i: u8) {
        self.write_u64(u64::from(i));
    }
}

/// Undirected bond `{x, x + e_axis}`.
type BondKey = (Site, u8);

/// Environment realized lazily: each bond weight is a deterministic function
/// of `(seed, bond)`, drawn on first touch and cached.
#[derive(Clone, Debug)]
pub struct ConductanceEnvironment {
    law: ConductanceLaw,
    dim: usize,
    seed: u64,
    realized: HashMap<BondKey, f64, BuildHasherDefault<BondHasher>>,
    frozen: bool,
}

impl ConductanceEnvironment {
    pub fn new(law: ConductanceLaw, dim: usize, seed: u64) -> Result<Self> {
        law.validate()?;
        if dim == 0 || dim > MAX_LATTICE_DIM {
            return Err(Error::param("dim", format!("lattice dimension must be in 1..={MAX_LATTICE_DIM}, got {dim}")));
        }
        Ok(ConductanceEnvironment { law, dim, seed, realized: HashMap::default(), frozen: false })
    }

    pub fn law(&self) -> &ConductanceLaw {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of bonds realized so far.
    pub fn realized_bonds(&self) -> usize {
        self.realized.len()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    fn draw(&self, key: &BondKey) -> f64 {
        let (x, axis) = key;
        let words = [self.seed, x[0] as u64, x[1] as u64, x[2] as u64, x[3] as u64, u64::from(*axis)];
        self.law.quantile(unit_f64(hash_words(&words)))
    }

    /// Weight of the bond `{x, x + e_axis}`.
    pub fn weight(&mut self, x: &Site, axis: usize) -> f64 {
        let key = (*x, axis as u8);
        if let Some(&w) = self.realized.get(&key) {
            return w;
        }
        let w = self.draw(&key);
        if !self.frozen {
            self.realized.insert(key, w);
        }
        w
    }

    /// Weight lookup without caching; agrees with [`Self::weight`].
    pub fn peek(&self, x: &Site, axis: usize) -> f64 {
        let key = (*x, axis as u8);
        self.realized.get(&key).copied().unwrap_or_else(|| self.draw(&key))
    }

    /// Weight of the bond `{x, y}` for nearest neighbours `x`, `y`.
    pub fn bond(&mut self, x: &Site, y: &Site) -> Result<f64> {
        let mut axis = None;
        for i in 0..MAX_LATTICE_DIM {
            match (y[i] - x[i]).abs() {
                0 => {}
                1 if axis.is_none() && i < self.dim => axis = Some(i),
                _ => return Err(Error::InvalidPath(format!("{x:?} and {y:?} are not nearest neighbours"))),
            }
        }
        let axis = axis.ok_or_else(|| Error::InvalidPath("a bond needs two distinct sites".into()))?;
        let lower = if y[axis] < x[axis] { y } else { x };
        Ok(self.weight(lower, axis))
    }

    /// Realizes every bond with an endpoint in `[−radius, radius]^d` and
    /// freezes the map, for sharing one environment across replicas.
    pub fn pregenerate(&mut self, radius: i64) {
        let d = self.dim;
        let side = 2 * radius + 1;
        let count = side.pow(d as u32);
        for idx in 0..count {
            let mut x: Site = [0; MAX_LATTICE_DIM];
            let mut r = idx;
            for c in x.iter_mut().take(d) {
                *c = r % side - radius;
                r /= side;
            }
            for axis in 0..d {
                self.weight(&x, axis);
                let mut lower = x;
                lower[axis] -= 1;
                self.weight(&lower, axis);
            }
        }
        self.frozen = true;
    }

    /// Jump rates `(to x + e_i, to x − e_i)` for every axis.
    fn rates(&mut self, x: &Site, up: &mut [f64], down: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for axis in 0..self.dim {
            up[axis] = self.weight(x, axis);
            let mut lower = *x;
            lower[axis] -= 1;
            down[axis] = self.weight(&lower, axis);
            total += up[axis] + down[axis];
        }
        total
    }

    /// Local drift `F(x) = Σ_y (y − x) η(x, y)`.
    pub fn local_drift(&mut self, x: &Site) -> Vec<f64> {
        let mut up = [0.0; MAX_LATTICE_DIM];
        let mut down = [0.0; MAX_LATTICE_DIM];
        self.rates(x, &mut up, &mut down);
        (0..self.dim).map(|i| up[i] - down[i]).collect()
    }
}

/// Continuous-time walk from the origin on `[0, horizon]`: exponential
/// holding times with rate `Σ_y η(x, y)`, then a jump to `y` with
/// probability proportional to `η(x, y)`.
pub fn simulate_conductance_walk<R: Rng + ?Sized>(
    env: &mut ConductanceEnvironment,
    horizon: f64,
    rng: &mut R,
) -> Result<JumpPath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::param("horizon", format!("must be positive and finite, got {horizon}")));
    }
    let d = env.dim;
    let mut x: Site = [0; MAX_LATTICE_DIM];
    let mut up = [0.0; MAX_LATTICE_DIM];
    let mut down = [0.0; MAX_LATTICE_DIM];
    let mut times = Vec::new();
    let mut increments = Vec::new();
    let mut t = 0.0;
    loop {
        let total = env.rates(&x, &mut up, &mut down);
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t > horizon {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut choice = (d - 1, -1i64);
        'pick: for axis in 0..d {
            for (w, sign) in [(up[axis], 1i64), (down[axis], -1i64)] {
                if u < w {
                    choice = (axis, sign);
                    break 'pick;
                }
                u -= w;
            }
        }
        let (axis, sign) = choice;
        x[axis] += sign;
        times.push(t);
        increments.extend((0..d).map(|i| if i == axis { sign as f64 } else { 0.0 }));
    }
    JumpPath::from_flat(vec![0.0; d], times, increments, horizon)
}

/// Martingale part `N = X − ∫ F(X_s) ds` of a walk, as the vertex sequence on
/// which its p-variation is attained (values and left limits at jumps).
#[derive(Clone, Debug, PartialEq)]
pub struct MartingalePart {
    pub dim: usize,
    pub vertices: Vec<f64>,
    /// `[N]_T = Σ |ΔX|²`, the number of jumps for a nearest-neighbour walk.
    pub quadratic_variation: f64,
}

/// Splits a walk simulated in `env` into its martingale part; the drift part
/// is `X − N`.
pub fn walk_martingale(env: &mut ConductanceEnvironment, path: &JumpPath) -> Result<MartingalePart> {
    let d = path.dim();
    if d != env.dim {
        return Err(Error::Dimension(format!("walk of dimension {d} in a {}-dimensional environment", env.dim)));
    }
    let mut x: Site = [0; MAX_LATTICE_DIM];
    for (c, v) in x.iter_mut().zip(path.start()) {
        *c = v.round() as i64;
    }
    let mut n: Vec<f64> = path.start().to_vec();
    let mut vertices = n.clone();
    let mut qv = 0.0;
    let mut prev = 0.0;
    let advance = |env: &mut ConductanceEnvironment, x: &Site, n: &mut Vec<f64>, dt: f64| {
        let f = env.local_drift(x);
        for (ni, fi) in n.iter_mut().zip(f) {
            *ni -= fi * dt;
        }
    };
    for (k, &t) in path.jump_times().iter().enumerate() {
        advance(env, &x, &mut n, t - prev);
        vertices.extend_from_slice(&n);
        let inc = path.increment(k);
        for i in 0..d {
            n[i] += inc[i];
            x[i] += inc[i].round() as i64;
            qv += inc[i] * inc[i];
        }
        vertices.extend_from_slice(&n);
        prev = t;
    }
    if path.horizon() > prev {
        advance(env, &x, &mut n, path.horizon() - prev);
        vertices.extend_from_slice(&n);
    }
    Ok(MartingalePart { dim: d, vertices, quadratic_variation: qv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{replica_rng, Purpose};

    #[test]
    fn law_summaries() {
        let u = ConductanceLaw::Uniform { a: 1.0, b: 2.0 };
        assert_eq!(u.mean(), 1.5);
        assert_eq!(u.bounds(), (1.0, 2.0));
        let tp = ConductanceLaw::TwoPoint { a: 1.0, b: 4.0, q: 0.5 };
        assert_eq!(tp.quantile(0.49), 1.0);
        assert_eq!(tp.quantile(0.5), 4.0);
        assert!(ConductanceLaw::Constant { kappa: 0.0 }.validate().is_err());
        assert!(ConductanceLaw::Uniform { a: 2.0, b: 1.0 }.validate().is_err());
        assert!(ConductanceLaw::TwoPoint { a: 1.0, b: 2.0, q: 1.5 }.validate().is_err());
    }

    #[test]
    fn bonds_are_symmetric_and_order_independent() {
        let law = ConductanceLaw::Uniform { a: 1.0, b: 2.0 };
        let mut e1 = ConductanceEnvironment::new(law, 2, 9).unwrap();
        let mut e2 = ConductanceEnvironment::new(law, 2, 9).unwrap();
        let x = [3, -1, 0, 0];
        let y = [3, 0, 0, 0];
        let w = e1.bond(&x, &y).unwrap();
        assert_eq!(w, e1.bond(&y, &x).unwrap());
        e2.weight(&[5, 5, 0, 0], 0);
        assert_eq!(e2.bond(&y, &x).unwrap(), w);
        assert!((1.0..=2.0).contains(&w));
        assert!(e1.bond(&x, &[4, 0, 0, 0]).is_err());
    }

    #[test]
    fn frozen_environment_agrees_with_lazy_one() {
        let law = ConductanceLaw::TwoPoint { a: 1.0, b: 3.0, q: 0.3 };
        let mut lazy = ConductanceEnvironment::new(law, 2, 4).unwrap();
        let mut frozen = ConductanceEnvironment::new(law, 2, 4).unwrap();
        frozen.pregenerate(3);
        let before = frozen.realized_bonds();
        assert_eq!(before, 2 * 7 * 8);
        for x in [[0, 0, 0, 0], [10, -2, 0, 0], [-3, 3, 0, 0]] {
            assert_eq!(frozen.weight(&x, 1), lazy.weight(&x, 1));
        }
        assert_eq!(frozen.realized_bonds(), before);
    }

    #[test]
    fn walk_increments_are_unit_steps() {
        let mut env = ConductanceEnvironment::new(ConductanceLaw::Uniform { a: 1.0, b: 2.0 }, 3, 1).unwrap();
        let mut rng = replica_rng(1, Purpose::Dynamics, 0);
        let path = simulate_conductance_walk(&mut env, 50.0, &mut rng).unwrap();
        assert!(path.num_jumps() > 100);
        for k in 0..path.num_jumps() {
            let inc = path.increment(k);
            assert_eq!(inc.iter().map(|x| x.abs()).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn constant_environment_has_zero_drift() {
        let mut env = ConductanceEnvironment::new(ConductanceLaw::Constant { kappa: 2.0 }, 2, 0).unwrap();
        let mut rng = replica_rng(3, Purpose::Dynamics, 0);
        let path = simulate_conductance_walk(&mut env, 5.0, &mut rng).unwrap();
        let m = walk_martingale(&mut env, &path).unwrap();
        assert_eq!(m.quadratic_variation, path.num_jumps() as f64);
        let n = m.vertices.len();
        assert_eq!(&m.vertices[n - 2..], path.value_at(5.0).as_slice());
    }

    #[test]
    fn martingale_part_subtracts_integrated_drift() {
        let law = ConductanceLaw::Uniform { a: 1.0, b: 2.0 };
        let mut env = ConductanceEnvironment::new(law, 1, 5).unwrap();
        let path = JumpPath::new(vec![0.0], vec![1.0], vec![vec![1.0]], 3.0).unwrap();
        let f0 = env.local_drift(&[0, 0, 0, 0])[0];
        let f1 = env.local_drift(&[1, 0, 0, 0])[0];
        let m = walk_martingale(&mut env, &path).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert!((m.vertices[1] + f0).abs() < 1e-15);
        assert!((m.vertices[2] - (1.0 - f0)).abs() < 1e-15);
        assert!((m.vertices[3] - (1.0 - f0 - 2.0 * f1)).abs() < 1e-14);
    }
}
