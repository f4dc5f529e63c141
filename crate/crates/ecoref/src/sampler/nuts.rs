//! One chain of dynamic Hamiltonian Monte Carlo.
//!
//! Leapfrog integration with a diagonal metric; trajectories grow by
//! doubling until a U-turn or the depth cap, with multinomial sampling of
//! the proposal across the trajectory; step size adapts by dual averaging
//! toward the target acceptance statistic.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::LogDensity;
use crate::numeric::log_add_exp;

/// Energy error beyond which a transition is declared divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Clone)]
pub(crate) struct Phase {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl Phase {
    fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        -self.logp + kinetic(&self.p, inv_metric)
    }
}

fn kinetic(p: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(inv_metric)
        .map(|(&pd, &m)| m * pd * pd)
        .sum::<f64>()
}

/// One leapfrog step of size `eps` (sign carries direction).
pub(crate) fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    from: &Phase,
    eps: f64,
    inv_metric: &[f64],
) -> Phase {
    let dim = from.q.len();
    let mut p: Vec<f64> = from
        .p
        .iter()
        .zip(&from.grad)
        .map(|(&pd, &gd)| pd + 0.5 * eps * gd)
        .collect();
    let q: Vec<f64> = from
        .q
        .iter()
        .zip(p.iter().zip(inv_metric))
        .map(|(&qd, (&pd, &m))| qd + eps * m * pd)
        .collect();
    let mut grad = vec![0.0; dim];
    let logp = target.log_density_gradient(&q, &mut grad);
    for (pd, &gd) in p.iter_mut().zip(&grad) {
        *pd += 0.5 * eps * gd;
    }
    Phase { q, p, grad, logp }
}

/// Velocities at both ends still point away from each other.
fn no_u_turn(minus: &Phase, plus: &Phase, inv_metric: &[f64]) -> bool {
    let mut dot_minus = 0.0;
    let mut dot_plus = 0.0;
    for d in 0..minus.q.len() {
        let span = plus.q[d] - minus.q[d];
        dot_minus += span * inv_metric[d] * minus.p[d];
        dot_plus += span * inv_metric[d] * plus.p[d];
    }
    dot_minus >= 0.0 && dot_plus >= 0.0
}

struct Subtree {
    near: Phase,
    far: Phase,
    proposal: Phase,
    log_sum_weight: f64,
    sum_accept: f64,
    n_states: usize,
    divergent: bool,
    turning: bool,
}

#[allow(clippy::too_many_arguments)]
fn build_tree<T: LogDensity + ?Sized>(
    target: &T,
    depth: usize,
    from: &Phase,
    direction: f64,
    h0: f64,
    eps: f64,
    inv_metric: &[f64],
    rng: &mut ChaCha12Rng,
) -> Subtree {
    if depth == 0 {
        let state = leapfrog(target, from, direction * eps, inv_metric);
        let h = state.hamiltonian(inv_metric);
        let delta = h - h0;
        let divergent = !delta.is_finite() || delta > DIVERGENCE_THRESHOLD;
        let log_weight = if divergent { f64::NEG_INFINITY } else { -delta };
        let accept = if delta.is_finite() {
            (-delta).min(0.0).exp()
        } else {
            0.0
        };
        return Subtree {
            near: state.clone(),
            far: state.clone(),
            proposal: state,
            log_sum_weight: log_weight,
            sum_accept: accept,
            n_states: 1,
            divergent,
            turning: false,
        };
    }

    let first = build_tree(target, depth - 1, from, direction, h0, eps, inv_metric, rng);
    if first.divergent || first.turning {
        return first;
    }
    let second = build_tree(
        target,
        depth - 1,
        &first.far,
        direction,
        h0,
        eps,
        inv_metric,
        rng,
    );

    let log_sum_weight = log_add_exp(first.log_sum_weight, second.log_sum_weight);
    // Multinomial sampling within the subtree.
    let take_second = if log_sum_weight == f64::NEG_INFINITY {
        false
    } else {
        rng.gen::<f64>().ln() < second.log_sum_weight - log_sum_weight
    };
    let proposal = if take_second {
        second.proposal.clone()
    } else {
        first.proposal.clone()
    };
    // The criterion takes the subtree ends in trajectory-time order, which
    // is reversed when integrating backward.
    let still_open = if direction > 0.0 {
        no_u_turn(&first.near, &second.far, inv_metric)
    } else {
        no_u_turn(&second.far, &first.near, inv_metric)
    };
    let turning = second.turning || second.divergent || !still_open;
    Subtree {
        near: first.near,
        far: second.far,
        proposal,
        log_sum_weight,
        sum_accept: first.sum_accept + second.sum_accept,
        n_states: first.n_states + second.n_states,
        divergent: second.divergent,
        turning: turning && !second.divergent,
    }
}

pub(crate) struct Transition {
    pub state: Phase,
    pub accept_stat: f64,
    pub divergent: bool,
}

/// One draw: sample a momentum, grow the trajectory by doubling, take the
/// multinomially sampled proposal.
pub(crate) fn transition<T: LogDensity + ?Sized>(
    target: &T,
    current: &Phase,
    eps: f64,
    max_depth: usize,
    inv_metric: &[f64],
    rng: &mut ChaCha12Rng,
) -> Transition {
    let dim = current.q.len();
    let mut start = current.clone();
    for d in 0..dim {
        let z: f64 = rng.sample(StandardNormal);
        start.p[d] = z / inv_metric[d].sqrt();
    }
    let h0 = start.hamiltonian(inv_metric);

    let mut minus = start.clone();
    let mut plus = start.clone();
    let mut proposal = start.clone();
    let mut log_sum_weight = 0.0f64;
    let mut sum_accept = 0.0;
    let mut n_states = 1usize;
    let mut divergent = false;
    let mut depth = 0usize;

    while depth < max_depth {
        let direction: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let from = if direction > 0.0 { &plus } else { &minus };
        let sub = build_tree(target, depth, from, direction, h0, eps, inv_metric, rng);
        sum_accept += sub.sum_accept;
        n_states += sub.n_states;
        if sub.divergent {
            divergent = true;
            break;
        }
        if sub.turning {
            break;
        }
        // Biased progressive sampling favors the fresh half.
        if rng.gen::<f64>().ln() < sub.log_sum_weight - log_sum_weight {
            proposal = sub.proposal.clone();
        }
        log_sum_weight = log_add_exp(log_sum_weight, sub.log_sum_weight);
        if direction > 0.0 {
            plus = sub.far;
        } else {
            minus = sub.far;
        }
        depth += 1;
        if !no_u_turn(&minus, &plus, inv_metric) {
            break;
        }
    }

    Transition {
        state: proposal,
        accept_stat: if n_states > 1 {
            sum_accept / (n_states - 1) as f64
        } else {
            0.0
        },
        divergent,
    }
}

/// Dual-averaging step-size adaptation toward a target acceptance
/// statistic.
pub(crate) struct DualAverage {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    t: f64,
    target: f64,
}

impl DualAverage {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * initial_eps).ln(),
            log_eps: initial_eps.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            t: 0.0,
            target,
        }
    }

    pub fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    pub fn update(&mut self, accept_stat: f64) {
        self.t += 1.0;
        let eta = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }

    pub fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Doubling/halving search for a step size whose one-step acceptance is
/// near 1/2.
pub(crate) fn find_reasonable_epsilon<T: LogDensity + ?Sized>(
    target: &T,
    state: &Phase,
    inv_metric: &[f64],
    rng: &mut ChaCha12Rng,
) -> f64 {
    let mut probe = state.clone();
    for pd in probe.p.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *pd = z;
    }
    for (pd, &m) in probe.p.iter_mut().zip(inv_metric) {
        *pd /= m.sqrt();
    }
    let h0 = probe.hamiltonian(inv_metric);
    let mut eps = 1.0f64;
    let accept = |eps: f64| -> f64 {
        let next = leapfrog(target, &probe, eps, inv_metric);
        let delta = next.hamiltonian(inv_metric) - h0;
        if delta.is_finite() {
            (-delta).exp()
        } else {
            0.0
        }
    };
    let mut a = accept(eps);
    while !a.is_finite() || a == 0.0 {
        eps *= 0.5;
        if eps < 1e-10 {
            return 1e-10;
        }
        a = accept(eps);
    }
    let dir: f64 = if a > 0.5 { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if (dir > 0.0 && a <= 0.5) || (dir < 0.0 && a >= 0.5) {
            break;
        }
        eps *= 2.0f64.powf(dir);
        if !(1e-10..=1e7).contains(&eps) {
            break;
        }
        a = accept(eps);
    }
    eps.clamp(1e-10, 1e7)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl LogDensity for Quadratic {
        fn dim(&self) -> usize {
            3
        }
        fn log_density_gradient(&self, position: &[f64], grad: &mut [f64]) -> f64 {
            let mut logp = 0.0;
            for d in 0..3 {
                logp -= 0.5 * position[d] * position[d];
                grad[d] = -position[d];
            }
            logp
        }
    }

    /// Leapfrog Hamiltonian error shrinks as O(eps²) on a quadratic
    /// target: halving the step cuts the error by about four.
    #[test]
    fn leapfrog_energy_error_is_second_order() {
        let target = Quadratic;
        let inv_metric = vec![1.0; 3];
        let q = vec![1.0, -0.5, 0.25];
        let p = vec![0.3, 0.7, -0.2];
        let mut grad = vec![0.0; 3];
        let logp = target.log_density_gradient(&q, &mut grad);
        let start = Phase { q, p, grad, logp };
        let h0 = start.hamiltonian(&inv_metric);

        let integrate = |eps: f64| -> f64 {
            let steps = (2.0 / eps).round() as usize;
            let mut state = start.clone();
            for _ in 0..steps {
                state = leapfrog(&target, &state, eps, &inv_metric);
            }
            (state.hamiltonian(&inv_metric) - h0).abs()
        };

        let mut errors = Vec::new();
        for &eps in &[0.2, 0.1, 0.05, 0.025] {
            errors.push(integrate(eps));
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (2.5..6.0).contains(&ratio),
                "expected ~4x error reduction per halving, got {ratio} ({errors:?})"
            );
        }
    }

    #[test]
    fn dual_averaging_seeks_target() {
        // Feed a synthetic accept probability that decreases in eps; the
        // adapted value should settle where accept ≈ target.
        let mut da = DualAverage::new(1.0, 0.8);
        for _ in 0..2000 {
            let accept = (-da.current()).exp(); // accept = e^-eps
            da.update(accept);
        }
        let eps = da.adapted();
        let achieved = (-eps).exp();
        assert!(
            (achieved - 0.8).abs() < 0.05,
            "settled at accept {achieved} (eps {eps})"
        );
    }
}
