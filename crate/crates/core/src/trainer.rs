//! Training of the perceptron weights against the separation loss: a
//! global-best particle swarm (the workhorse) and a finite-difference Adam
//! descent (time-efficient but prone to stalling in local minima, kept as an
//! experimental alternative).
//!
//! Loss evaluators take `(position, eval_seed)` so every evaluation sees a
//! fresh, reproducible noise realization. All randomness derives from the
//! master seed; particle evaluations within an iteration run in parallel
//! without affecting the result.

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-dimension search box.
pub type Bounds = Vec<[f64; 2]>;

/// Global-best PSO settings. Hyperparameters follow standard Clerc-style
/// practice; the paper does not specify them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    /// Inertia weight w, 0 < w < 1.
    pub inertia: f64,
    /// Cognitive acceleration c1.
    pub cognitive: f64,
    /// Social acceleration c2.
    pub social: f64,
    /// Per-dimension position bounds.
    pub bounds: Bounds,
    /// Velocity clamp as a fraction of the box width per dimension.
    pub velocity_clamp_frac: f64,
    /// Re-score the incumbent best each iteration so a lucky noise draw
    /// cannot pin the swarm to a phantom optimum.
    pub reevaluate_incumbent: bool,
    /// Known-good starting candidates (e.g. the solution for the previous
    /// fiber length); they replace the first initial positions and let a
    /// sweep track one solution branch across a parameter scan.
    pub initial_candidates: Vec<Vec<f64>>,
    pub master_seed: u64,
}

impl SwarmConfig {
    pub fn new(bounds: Bounds, master_seed: u64) -> Self {
        Self {
            n_particles: 20,
            n_iterations: 100,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            bounds,
            velocity_clamp_frac: 0.2,
            reevaluate_incumbent: true,
            initial_candidates: Vec::new(),
            master_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::param("need at least two particles"));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(Error::param("inertia must lie in (0, 1)"));
        }
        if self.bounds.is_empty() {
            return Err(Error::param("bounds must be non-empty"));
        }
        for b in &self.bounds {
            if !b[0].is_finite() || !b[1].is_finite() || b[1] <= b[0] {
                return Err(Error::param("bounds must be finite with hi > lo"));
            }
        }
        Ok(())
    }
}

/// Adam descent settings; gradients come from central finite differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamConfig {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Central-difference step per dimension (same units as the position).
    pub fd_step: f64,
    pub bounds: Bounds,
    /// Stop after this many iterations without improvement.
    pub plateau_patience: usize,
    /// Improvement below this counts as a plateau.
    pub plateau_tol: f64,
    /// Start point; the box center when absent.
    pub start: Option<Vec<f64>>,
    pub master_seed: u64,
}

impl AdamConfig {
    pub fn new(bounds: Bounds, master_seed: u64) -> Self {
        Self {
            n_iterations: 100,
            learning_rate: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            fd_step: 0.5,
            bounds,
            plateau_patience: 20,
            plateau_tol: 1e-6,
            start: None,
            master_seed,
        }
    }
}

/// Snapshot of the incumbent at the end of one iteration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Best-so-far loss (running minimum; monotone non-increasing).
    pub best_loss: f64,
    /// Incumbent position at this iteration.
    pub best_position: Vec<f64>,
}

/// Full training outcome.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainingRecord {
    pub iterations: Vec<IterationRecord>,
    pub best_position: Vec<f64>,
    pub best_loss: f64,
    /// Recombination phases of the trained device; filled by the link-level
    /// wrapper that knows the current-to-phase map.
    pub final_phases: Vec<f64>,
    pub evaluation_count: usize,
    /// Learning-rate halvings triggered by divergent steps (Adam only).
    pub step_halvings: usize,
}

fn eval_or_attach<F>(eval: &F, position: &[f64], seed: u64) -> Result<f64>
where
    F: Fn(&[f64], u64) -> Result<f64> + Sync,
{
    match eval(position, seed) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::Evaluation {
            position: position.to_vec(),
            reason: format!("non-finite loss {v}"),
        }),
        Err(Error::Evaluation { position, reason }) => Err(Error::Evaluation { position, reason }),
        Err(e) => Err(Error::Evaluation { position: position.to_vec(), reason: e.to_string() }),
    }
}

/// Global-best particle swarm over the bounded box. Deterministic in
/// `config.master_seed`; the recorded best-so-far trace is monotone
/// non-increasing even with incumbent re-evaluation enabled.
pub fn train_pso<F>(eval: &F, config: &SwarmConfig) -> Result<TrainingRecord>
where
    F: Fn(&[f64], u64) -> Result<f64> + Sync,
{
    config.validate()?;
    let dim = config.bounds.len();
    let n = config.n_particles;
    let mut swarm_rng = rng::stream(config.master_seed, Domain::Swarm, 0);

    let vmax: Vec<f64> =
        config.bounds.iter().map(|b| config.velocity_clamp_frac * (b[1] - b[0])).collect();
    let mut positions: Vec<Vec<f64>> = (0..n)
        .map(|_| config.bounds.iter().map(|b| swarm_rng.random_range(b[0]..=b[1])).collect())
        .collect();
    for (slot, candidate) in positions.iter_mut().zip(&config.initial_candidates) {
        if candidate.len() != dim {
            return Err(Error::param("initial candidate dimension mismatch"));
        }
        *slot = candidate
            .iter()
            .zip(&config.bounds)
            .map(|(&v, b)| v.clamp(b[0], b[1]))
            .collect();
    }
    let mut velocities: Vec<Vec<f64>> = (0..n)
        .map(|_| vmax.iter().map(|&v| swarm_rng.random_range(-v..=v)).collect())
        .collect();

    let mut pbest_pos = positions.clone();
    let mut pbest_loss = vec![f64::INFINITY; n];
    let mut gbest_pos: Vec<f64> = positions[0].clone();
    let mut gbest_loss = f64::INFINITY;
    let mut best_so_far = f64::INFINITY;
    let mut evaluation_count = 0usize;
    let mut iterations = Vec::with_capacity(config.n_iterations);

    for iter in 0..config.n_iterations {
        // Particle index n is reserved for the incumbent re-evaluation.
        let reeval = config.reevaluate_incumbent && iter > 0;
        let mut jobs: Vec<(usize, Vec<f64>)> =
            positions.iter().cloned().enumerate().collect();
        if reeval {
            jobs.push((n, gbest_pos.clone()));
        }
        let results: Vec<(usize, Result<f64>)> = jobs
            .par_iter()
            .map(|(p, x)| {
                let seed = rng::stream2(config.master_seed, Domain::TrainingEval, iter as u64, *p as u64)
                    .random::<u64>();
                (*p, eval_or_attach(eval, x, seed))
            })
            .collect();
        evaluation_count += results.len();

        let mut losses = vec![f64::INFINITY; n];
        for (p, res) in results {
            let loss = res?;
            if p == n {
                // Fresh score for the incumbent.
                gbest_loss = loss;
            } else {
                losses[p] = loss;
            }
        }

        for p in 0..n {
            if losses[p] < pbest_loss[p] {
                pbest_loss[p] = losses[p];
                pbest_pos[p] = positions[p].clone();
            }
            if losses[p] < gbest_loss {
                gbest_loss = losses[p];
                gbest_pos = positions[p].clone();
            }
        }
        best_so_far = best_so_far.min(gbest_loss);
        iterations.push(IterationRecord {
            iteration: iter,
            best_loss: best_so_far,
            best_position: gbest_pos.clone(),
        });

        for p in 0..n {
            for d in 0..dim {
                let r1: f64 = swarm_rng.random();
                let r2: f64 = swarm_rng.random();
                let v = config.inertia * velocities[p][d]
                    + config.cognitive * r1 * (pbest_pos[p][d] - positions[p][d])
                    + config.social * r2 * (gbest_pos[d] - positions[p][d]);
                velocities[p][d] = v.clamp(-vmax[d], vmax[d]);
                positions[p][d] = (positions[p][d] + velocities[p][d])
                    .clamp(config.bounds[d][0], config.bounds[d][1]);
            }
        }
    }

    Ok(TrainingRecord {
        iterations,
        best_position: gbest_pos,
        best_loss: best_so_far,
        final_phases: Vec::new(),
        evaluation_count,
        step_halvings: 0,
    })
}

/// Adam-style moment-averaged descent on central-difference gradients.
/// Divergent (non-finite) evaluations halve the learning rate and skip the
/// step; stalls end the run after `plateau_patience` flat iterations.
pub fn train_adam<F>(eval: &F, config: &AdamConfig) -> Result<TrainingRecord>
where
    F: Fn(&[f64], u64) -> Result<f64> + Sync,
{
    if config.bounds.is_empty() {
        return Err(Error::param("bounds must be non-empty"));
    }
    let dim = config.bounds.len();
    let mut x: Vec<f64> = match &config.start {
        Some(s) if s.len() == dim => s.clone(),
        Some(_) => return Err(Error::param("start point dimension mismatch")),
        None => config.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect(),
    };

    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut lr = config.learning_rate;
    let mut best_so_far = f64::INFINITY;
    let mut best_pos = x.clone();
    let mut evaluation_count = 0usize;
    let mut step_halvings = 0usize;
    let mut stale = 0usize;
    let mut iterations = Vec::new();

    for iter in 0..config.n_iterations {
        let center_seed =
            rng::stream2(config.master_seed, Domain::TrainingEval, iter as u64, u64::MAX).random::<u64>();
        let center = eval_or_attach(eval, &x, center_seed)?;
        evaluation_count += 1;

        let improved = center < best_so_far - config.plateau_tol;
        if center < best_so_far {
            best_so_far = center;
            best_pos = x.clone();
        }
        stale = if improved { 0 } else { stale + 1 };
        iterations.push(IterationRecord {
            iteration: iter,
            best_loss: best_so_far,
            best_position: best_pos.clone(),
        });
        if stale > config.plateau_patience {
            break;
        }

        // Central differences; the +h/-h pair shares one noise seed so the
        // common noise cancels in the difference.
        let grads: Vec<Result<f64>> = (0..dim)
            .into_par_iter()
            .map(|d| {
                let seed = rng::stream2(config.master_seed, Domain::Gradient, iter as u64, d as u64)
                    .random::<u64>();
                let mut hi = x.clone();
                let mut lo = x.clone();
                hi[d] = (hi[d] + config.fd_step).clamp(config.bounds[d][0], config.bounds[d][1]);
                lo[d] = (lo[d] - config.fd_step).clamp(config.bounds[d][0], config.bounds[d][1]);
                let span = hi[d] - lo[d];
                if span <= 0.0 {
                    return Ok(0.0);
                }
                let fp = eval_or_attach(eval, &hi, seed)?;
                let fm = eval_or_attach(eval, &lo, seed)?;
                Ok((fp - fm) / span)
            })
            .collect();
        evaluation_count += 2 * dim;

        let mut grad = Vec::with_capacity(dim);
        let mut diverged = false;
        for g in grads {
            match g {
                Ok(v) if v.is_finite() => grad.push(v),
                _ => {
                    diverged = true;
                    break;
                }
            }
        }
        if diverged {
            lr *= 0.5;
            step_halvings += 1;
            continue;
        }

        let t = (iter + 1) as f64;
        for d in 0..dim {
            m[d] = config.beta1 * m[d] + (1.0 - config.beta1) * grad[d];
            v[d] = config.beta2 * v[d] + (1.0 - config.beta2) * grad[d] * grad[d];
            let m_hat = m[d] / (1.0 - config.beta1.powf(t));
            let v_hat = v[d] / (1.0 - config.beta2.powf(t));
            x[d] = (x[d] - lr * m_hat / (v_hat.sqrt() + config.epsilon))
                .clamp(config.bounds[d][0], config.bounds[d][1]);
        }
    }

    Ok(TrainingRecord {
        iterations,
        best_position: best_pos,
        best_loss: best_so_far,
        final_phases: Vec::new(),
        evaluation_count,
        step_halvings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn quadratic(target: Vec<f64>) -> impl Fn(&[f64], u64) -> Result<f64> + Sync {
        move |x: &[f64], _seed: u64| {
            Ok(x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum())
        }
    }

    #[test]
    fn pso_finds_quadratic_optimum() {
        let bounds = vec![[0.0, 30.0]; 3];
        let target = vec![11.0, 3.5, 22.0];
        let mut config = SwarmConfig::new(bounds, 4);
        config.n_iterations = 50;
        let record = train_pso(&quadratic(target.clone()), &config).unwrap();
        for (got, want) in record.best_position.iter().zip(&target) {
            assert!((got - want).abs() < 0.3, "position {got} vs {want}");
        }
        assert!(record.best_loss < 0.1);
    }

    #[test]
    fn pso_is_seed_reproducible() {
        let config = SwarmConfig::new(vec![[0.0, 30.0]; 3], 99);
        let eval = quadratic(vec![5.0, 5.0, 5.0]);
        let a = train_pso(&eval, &config).unwrap();
        let b = train_pso(&eval, &config).unwrap();
        assert_eq!(a, b);
        let mut other = config.clone();
        other.master_seed = 100;
        let c = train_pso(&eval, &other).unwrap();
        assert_ne!(a.iterations[0].best_position, c.iterations[0].best_position);
    }

    #[test]
    fn pso_best_trace_is_monotone_under_noise() {
        // Noisy evaluator: the recorded best-so-far must still be monotone.
        let eval = |x: &[f64], seed: u64| {
            let noise = ((seed % 1000) as f64 / 1000.0 - 0.5) * 0.2;
            Ok(x.iter().map(|v| v * v).sum::<f64>() + noise)
        };
        let mut config = SwarmConfig::new(vec![[-5.0, 5.0]; 2], 17);
        config.n_iterations = 40;
        let record = train_pso(&eval, &config).unwrap();
        for w in record.iterations.windows(2) {
            assert!(w[1].best_loss <= w[0].best_loss + 1e-15);
        }
    }

    #[test]
    fn pso_respects_bounds() {
        let hits = AtomicUsize::new(0);
        let eval = |x: &[f64], _seed: u64| {
            for &v in x {
                assert!((-1.0..=2.0).contains(&v), "position {v} escaped the box");
            }
            hits.fetch_add(1, Ordering::Relaxed);
            Ok(x.iter().map(|v| (v - 10.0) * (v - 10.0)).sum())
        };
        let mut config = SwarmConfig::new(vec![[-1.0, 2.0]; 2], 3);
        config.n_iterations = 30;
        let record = train_pso(&eval, &config).unwrap();
        assert_eq!(record.evaluation_count, hits.load(Ordering::Relaxed));
        // Optimum outside the box: the swarm must pin the wall.
        assert!(record.best_position.iter().all(|&v| (v - 2.0).abs() < 1e-6));
    }

    #[test]
    fn pso_propagates_evaluator_failure_with_position() {
        let eval = |x: &[f64], _seed: u64| {
            if x[0] > 0.5 {
                Err(Error::degenerate("synthetic failure"))
            } else {
                Ok(x[0])
            }
        };
        let config = SwarmConfig::new(vec![[0.0, 1.0]], 1);
        match train_pso(&eval, &config) {
            Err(Error::Evaluation { position, .. }) => assert!(position[0] > 0.5),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    /// Toy echo channel: input s plus one echo a*s(t-d). A 2-tap device with
    /// matching delay cancels the echo at phi = pi.
    fn echo_loss(phi: f64) -> f64 {
        let n = 64usize;
        let d = 4usize;
        let a = 0.35f64;
        let s: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
        let x: Vec<f64> = (0..n).map(|i| s[i] + a * s[(i + n - d) % n]).collect();
        // out = (x[n] + a e^{i phi} x[n-d]) / 2, target s / 2
        let (cos, sin) = (phi.cos(), phi.sin());
        let mut err = 0.0;
        for i in 0..n {
            let re = x[i] + a * cos * x[(i + n - d) % n];
            let im = a * sin * x[(i + n - d) % n];
            let tre = s[i];
            err += (re - tre) * (re - tre) + im * im;
        }
        err / n as f64
    }

    #[test]
    fn pso_matches_grid_search_on_echo_phase() {
        let eval = |x: &[f64], _seed: u64| Ok(echo_loss(x[0]));
        let mut config = SwarmConfig::new(vec![[0.0, 2.0 * PI]], 12);
        config.n_iterations = 60;
        let record = train_pso(&eval, &config).unwrap();

        // Brute-force 1-D sweep at 0.01 rad resolution.
        let steps = 629;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..steps {
            let phi = 2.0 * PI * i as f64 / steps as f64;
            let l = echo_loss(phi);
            if l < best.0 {
                best = (l, phi);
            }
        }
        let grid_step = 2.0 * PI / steps as f64;
        assert!(
            (record.best_position[0] - best.1).abs() <= grid_step,
            "pso {} vs grid {}",
            record.best_position[0],
            best.1
        );
        assert!((best.1 - PI).abs() < 0.4, "grid optimum {} not near pi", best.1);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut config = AdamConfig::new(vec![[0.0, 30.0]; 3], 8);
        config.learning_rate = 1.0;
        config.fd_step = 0.05;
        config.n_iterations = 400;
        config.plateau_patience = 400;
        let record = train_adam(&quadratic(vec![11.0, 3.5, 22.0]), &config).unwrap();
        assert!(record.best_loss < 0.05, "final loss {}", record.best_loss);
    }

    #[test]
    fn adam_reaches_echo_optimum_from_nearby_start() {
        let eval = |x: &[f64], _seed: u64| Ok(echo_loss(x[0]));
        let mut config = AdamConfig::new(vec![[0.0, 2.0 * PI]], 8);
        config.start = Some(vec![PI - 0.7]);
        config.learning_rate = 0.1;
        config.fd_step = 0.02;
        config.n_iterations = 300;
        config.plateau_patience = 60;
        let record = train_adam(&eval, &config).unwrap();
        let pso = train_pso(&eval, &SwarmConfig::new(vec![[0.0, 2.0 * PI]], 12)).unwrap();
        assert!(
            (record.best_position[0] - pso.best_position[0]).abs() < 0.3,
            "adam {} vs pso {}",
            record.best_position[0],
            pso.best_position[0]
        );
    }

    #[test]
    fn adam_halves_step_on_divergence() {
        // Loss turns non-finite away from the start; Adam must halve and
        // keep going rather than error out.
        let eval = |x: &[f64], _seed: u64| {
            if x[0] > 1.2 {
                Ok(f64::NAN)
            } else {
                Ok(x[0] * x[0])
            }
        };
        let mut config = AdamConfig::new(vec![[0.0, 3.0]], 8);
        config.start = Some(vec![1.15]);
        config.fd_step = 0.1;
        config.n_iterations = 50;
        let record = train_adam(&eval, &config).unwrap();
        assert!(record.step_halvings > 0);
        assert!(record.best_loss.is_finite());
    }

    #[test]
    fn adam_stops_on_plateau() {
        let mut config = AdamConfig::new(vec![[-1.0, 1.0]], 8);
        config.n_iterations = 500;
        config.plateau_patience = 5;
        let record = train_adam(&|x: &[f64], _| Ok(x[0] * 0.0), &config).unwrap();
        assert!(record.iterations.len() <= 8, "ran {} iterations", record.iterations.len());
    }
}
