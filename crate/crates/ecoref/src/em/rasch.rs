//! Logistic journal-effects model fitted by iteratively reweighted least
//! squares.
//!
//! The linear predictor is `logit Pr(success | i, j) = μ + α z_i + β_j`,
//! where z marks a fictitious pseudo-institution that submits an equal
//! number of successful and unsuccessful articles in every journal. The
//! pseudo-data regularize the journal effects; its own intercept α keeps
//! that shrinkage from distorting the grand mean. Identifiability pins the
//! reference column ("Other journals") at β = 0.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::EmError;
use crate::ingest::CountsMatrix;
use crate::numeric::{log_sigmoid, sigmoid};

/// Fitted journal-effects model.
#[derive(Debug, Clone)]
pub struct RaschFit {
    /// Grand-mean intercept on the logit scale.
    pub mu_hat: f64,
    /// Pseudo-institution coefficient (0 when no pseudo-data was used).
    pub alpha_hat: f64,
    /// Journal effects, one per counts column; the reference entry is
    /// exactly 0.
    pub beta_hat: Vec<f64>,
    /// Index of the reference column.
    pub reference: usize,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

impl RaschFit {
    /// logit of the fitted success probability for column j (real data,
    /// z = 0).
    pub fn journal_logit(&self, j: usize) -> f64 {
        self.mu_hat + self.beta_hat[j]
    }

    pub fn journal_prob(&self, j: usize) -> f64 {
        sigmoid(self.journal_logit(j))
    }
}

struct Row {
    successes: f64,
    trials: f64,
    pseudo: bool,
    column: usize,
}

const IRLS_MAX_ITERS: usize = 200;
const IRLS_GRAD_TOL: f64 = 1e-8;

/// Maximizes the weighted binomial log-likelihood with fractional success
/// counts, augmented by `pseudo_strength` half-successful articles per
/// journal from the pseudo-institution. Newton steps with step-halving,
/// so the objective never decreases; converges when the gradient norm
/// drops below 1e-8.
pub fn fit_rasch(
    imputed: &[f64],
    trials: &CountsMatrix,
    pseudo_strength: f64,
) -> Result<RaschFit, EmError> {
    let n_inst = trials.n_institutions();
    let n_cols = trials.n_columns();
    if imputed.len() != n_inst * n_cols {
        return Err(EmError::DimensionMismatch {
            reason: format!(
                "{} imputed cells for {} x {} counts",
                imputed.len(),
                n_inst,
                n_cols
            ),
        });
    }
    if !(pseudo_strength >= 0.0) || !pseudo_strength.is_finite() {
        return Err(EmError::InvalidConfig {
            reason: format!("pseudo_strength {pseudo_strength} out of range"),
        });
    }
    let reference = trials.reference_column();

    let mut rows = Vec::new();
    for i in 0..n_inst {
        for j in 0..n_cols {
            let t = f64::from(trials.count(i, j));
            if t == 0.0 {
                continue;
            }
            let s = imputed[i * n_cols + j];
            if !(0.0..=t + 1e-9).contains(&s) {
                return Err(EmError::InvalidImputation {
                    institution: trials.institutions()[i].clone(),
                    column: trials.columns()[j].name.clone(),
                    successes: s,
                    trials: t,
                });
            }
            rows.push(Row {
                successes: s.min(t),
                trials: t,
                pseudo: false,
                column: j,
            });
        }
    }
    let use_pseudo = pseudo_strength > 0.0;
    if use_pseudo {
        for j in 0..n_cols {
            rows.push(Row {
                successes: pseudo_strength / 2.0,
                trials: pseudo_strength,
                pseudo: true,
                column: j,
            });
        }
    }

    // Parameter layout: [mu, alpha?, beta_j for active non-reference j].
    // Columns with no rows at all stay tied to the reference at beta = 0.
    let mut active = vec![false; n_cols];
    for row in &rows {
        active[row.column] = true;
    }
    let mut beta_index = vec![None; n_cols];
    let mut p = if use_pseudo { 2 } else { 1 };
    for (j, idx) in beta_index.iter_mut().enumerate() {
        if j != reference && active[j] {
            *idx = Some(p);
            p += 1;
        }
    }

    let predictor = |theta: &DVector<f64>, row: &Row| -> f64 {
        let mut eta = theta[0];
        if row.pseudo {
            eta += theta[1];
        }
        if let Some(k) = beta_index[row.column] {
            eta += theta[k];
        }
        eta
    };
    let log_lik = |theta: &DVector<f64>| -> f64 {
        rows.iter()
            .map(|row| {
                let eta = predictor(theta, row);
                row.successes * log_sigmoid(eta) + (row.trials - row.successes) * log_sigmoid(-eta)
            })
            .sum()
    };

    let mut theta = DVector::zeros(p);
    let mut ll = log_lik(&theta);
    let mut grad_norm = f64::INFINITY;
    for iteration in 1..=IRLS_MAX_ITERS {
        let mut grad = DVector::zeros(p);
        let mut hessian = DMatrix::zeros(p, p);
        for row in &rows {
            let eta = predictor(&theta, row);
            let fitted = sigmoid(eta);
            let residual = row.successes - row.trials * fitted;
            let weight = row.trials * fitted * (1.0 - fitted);
            let mut idxs = [0usize; 3];
            let mut k = 0;
            idxs[k] = 0;
            k += 1;
            if row.pseudo {
                idxs[k] = 1;
                k += 1;
            }
            if let Some(b) = beta_index[row.column] {
                idxs[k] = b;
                k += 1;
            }
            for &a in &idxs[..k] {
                grad[a] += residual;
                for &b in &idxs[..k] {
                    hessian[(a, b)] += weight;
                }
            }
        }
        grad_norm = grad.norm();
        if grad_norm < IRLS_GRAD_TOL {
            return Ok(assemble(theta, &beta_index, reference, iteration, grad_norm, n_cols, use_pseudo));
        }

        // Newton direction, with a ridge fallback for flat weights.
        let mut ridge = 0.0f64;
        let step = loop {
            let mut h = hessian.clone();
            for d in 0..p {
                h[(d, d)] += ridge;
            }
            match Cholesky::new(h) {
                Some(chol) => break chol.solve(&grad),
                None if ridge < 1.0 => ridge = (ridge * 10.0).max(1e-10),
                None => {
                    return Err(EmError::Singular {
                        context: "rasch fit normal equations".to_string(),
                    })
                }
            }
        };

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &theta + &step * scale;
            let candidate_ll = log_lik(&candidate);
            if candidate_ll >= ll - 1e-12 {
                theta = candidate;
                ll = candidate_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(EmError::NonConvergence {
                iterations: iteration,
                grad_norm,
            });
        }
    }
    Err(EmError::NonConvergence {
        iterations: IRLS_MAX_ITERS,
        grad_norm,
    })
}

fn assemble(
    theta: DVector<f64>,
    beta_index: &[Option<usize>],
    reference: usize,
    iterations: usize,
    final_grad_norm: f64,
    n_cols: usize,
    use_pseudo: bool,
) -> RaschFit {
    let mut beta_hat = vec![0.0; n_cols];
    for (j, idx) in beta_index.iter().enumerate() {
        if let Some(k) = idx {
            beta_hat[j] = theta[*k];
        }
    }
    RaschFit {
        mu_hat: theta[0],
        alpha_hat: if use_pseudo { theta[1] } else { 0.0 },
        beta_hat,
        reference,
        iterations,
        final_grad_norm,
    }
}
