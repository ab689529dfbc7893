//! Linear program for one branch-and-bound node.
//!
//! Variables, all nonnegative:
//! - `y_i = x_i - lo_i` for each input, bounded above by the box width;
//! - `t_i >= |x_i - c_i|`, with `sum t_i <= r` (exact L1 ball);
//! - one post-activation variable per unstable ReLU, constrained by the
//!   triangle relaxation over its pre-activation interval.
//!
//! Stable and phase-fixed ReLUs need no variable: an active neuron forwards
//! its affine pre-activation expression (with `z >= 0`), an inactive one
//! contributes zero (with `z <= 0`). With no unstable ReLUs left the program
//! is exact.

use super::bounds::{LayerBounds, NeuronState};
use super::simplex::{LinearProgram, LpScalar, Relation};
use crate::network::{Interval, Network};

/// Affine expression `coeffs · v + constant` over the LP variables.
#[derive(Debug, Clone)]
struct Affine<T> {
    coeffs: Vec<T>,
    constant: T,
}

impl<T: LpScalar> Affine<T> {
    fn constant(n: usize, c: T) -> Self {
        Self {
            coeffs: vec![T::zero(); n],
            constant: c,
        }
    }

    fn var(n: usize, j: usize, offset: T) -> Self {
        let mut e = Self::constant(n, offset);
        e.coeffs[j] = T::one();
        e
    }

    fn add_scaled(&mut self, other: &Affine<T>, w: &T) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = a.clone() + w.clone() * b.clone();
        }
        self.constant = self.constant.clone() + w.clone() * other.constant.clone();
    }
}

/// Ball geometry shared by every node of one query.
pub struct BallSpec<'a> {
    pub center: &'a [f64],
    pub radius: f64,
    pub input_box: &'a [Interval],
}

pub struct NodeProgram<T> {
    pub lp: LinearProgram<T>,
    /// Add to the LP optimum to get `max score(target) - score(label)`.
    pub objective_offset: T,
    input_dim: usize,
}

impl<T: LpScalar> NodeProgram<T> {
    /// Input point from an LP solution, clamped into the box.
    pub fn input_point(&self, point: &[T], input_box: &[Interval]) -> Vec<f64> {
        (0..self.input_dim)
            .map(|i| {
                let iv = input_box[i];
                let x = iv.lo + point[i].to_f64();
                x.clamp(iv.lo, iv.hi)
            })
            .collect()
    }
}

pub fn encode<T: LpScalar>(
    net: &Network,
    bounds: &LayerBounds,
    ball: &BallSpec<'_>,
    label: usize,
    target: usize,
) -> NodeProgram<T> {
    let n = net.input_dim();
    let unstable = bounds.unstable_count();
    let num_vars = 2 * n + unstable;
    let mut lp = LinearProgram::<T>::new(num_vars);
    let row = |entries: &[(usize, T)]| {
        let mut c = vec![T::zero(); num_vars];
        for (j, v) in entries {
            c[*j] = v.clone();
        }
        c
    };

    let mut slack_sum = vec![T::zero(); num_vars];
    for i in 0..n {
        let iv = ball.input_box[i];
        let lo = T::from_f64(iv.lo);
        let c = T::from_f64(ball.center[i]);
        let (y, t) = (i, n + i);
        lp.add_row(
            row(&[(y, T::one())]),
            Relation::Le,
            T::from_f64(iv.hi) - lo.clone(),
        );
        // t >= x - c  and  t >= c - x, with x = lo + y
        lp.add_row(
            row(&[(t, T::one()), (y, -T::one())]),
            Relation::Ge,
            lo.clone() - c.clone(),
        );
        lp.add_row(row(&[(t, T::one()), (y, T::one())]), Relation::Ge, c - lo);
        slack_sum[t] = T::one();
    }
    lp.add_row(slack_sum, Relation::Le, T::from_f64(ball.radius));

    let mut current: Vec<Affine<T>> = ball
        .input_box
        .iter()
        .enumerate()
        .map(|(i, iv)| Affine::var(num_vars, i, T::from_f64(iv.lo)))
        .collect();
    let mut next_var = 2 * n;
    for (li, layer) in net.layers().iter().enumerate() {
        let mut outputs = Vec::with_capacity(layer.out_dim());
        for (ni, (weights, &b)) in layer.rows().zip(layer.bias()).enumerate() {
            let mut z = Affine::constant(num_vars, T::from_f64(b));
            for (w, input) in weights.iter().zip(&current) {
                if *w != 0.0 {
                    z.add_scaled(input, &T::from_f64(*w));
                }
            }
            let out = match bounds.state[li][ni] {
                NeuronState::Linear => z,
                NeuronState::Active => {
                    lp.add_row(z.coeffs.clone(), Relation::Ge, -z.constant.clone());
                    z
                }
                NeuronState::Inactive => {
                    lp.add_row(z.coeffs.clone(), Relation::Le, -z.constant.clone());
                    Affine::constant(num_vars, T::zero())
                }
                NeuronState::Unstable => {
                    let iv = bounds.pre[li][ni];
                    let p = next_var;
                    next_var += 1;
                    // p >= z
                    let mut c: Vec<T> = z.coeffs.iter().map(|v| -v.clone()).collect();
                    c[p] = c[p].clone() + T::one();
                    lp.add_row(c, Relation::Ge, z.constant.clone());
                    // p <= u (z - l) / (u - l)
                    let (l, u) = (T::from_f64(iv.lo), T::from_f64(iv.hi));
                    let k = u.clone() / (u - l.clone());
                    let mut c: Vec<T> = z.coeffs.iter().map(|v| -(k.clone() * v.clone())).collect();
                    c[p] = c[p].clone() + T::one();
                    lp.add_row(c, Relation::Le, k * (z.constant.clone() - l));
                    Affine::var(num_vars, p, T::zero())
                }
            };
            outputs.push(out);
        }
        current = outputs;
    }

    let mut diff = current[target].clone();
    diff.add_scaled(&current[label], &-T::one());
    lp.objective = diff.coeffs;
    NodeProgram {
        lp,
        objective_offset: diff.constant,
        input_dim: n,
    }
}
