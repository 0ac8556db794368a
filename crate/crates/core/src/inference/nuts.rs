//! Multinomial No-U-Turn sampler with a diagonal metric.
//!
//! Follows the structure of Stan's `base_nuts`: trajectories double in a
//! random direction, states are sampled with multinomial weights, and the
//! generalized U-turn criterion is checked across and inside subtrees.
//! Warmup tunes the step size by dual averaging and the metric from
//! windowed variance estimates.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream, StreamRng};

/// A differentiable log density on `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl LogDensity for super::Posterior {
    fn dim(&self) -> usize {
        super::Posterior::dim(self)
    }
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.log_posterior_and_grad(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_depth: usize,
    /// Uniform initialization half-width on the unconstrained scale.
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 500,
            draws: 1000,
            seed: 0,
            target_accept: 0.8,
            max_depth: 10,
            init_radius: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 {
            return Err(Error::invalid("need at least one chain and one draw"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid("target acceptance must lie in (0, 1)"));
        }
        if self.max_depth == 0 || self.max_depth > 30 {
            return Err(Error::invalid("max tree depth must lie in 1..=30"));
        }
        if !(self.init_radius >= 0.0) {
            return Err(Error::invalid("initialization radius must be non-negative"));
        }
        Ok(())
    }
}

/// Per-iteration sampler statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterStats {
    pub step_size: f64,
    pub tree_depth: u32,
    pub n_leapfrog: u32,
    pub divergent: bool,
    pub accept_stat: f64,
    pub energy: f64,
}

/// Output of one chain: unconstrained draws (row-major) plus adaptation.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<f64>,
    pub stats: Vec<IterStats>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
}

impl ChainOutput {
    pub fn divergences(&self) -> usize {
        self.stats.iter().filter(|s| s.divergent).count()
    }

    pub fn max_depth_hits(&self, max_depth: usize) -> usize {
        self.stats.iter().filter(|s| s.tree_depth as usize >= max_depth).count()
    }
}

const MAX_DELTA_H: f64 = 1000.0;

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    logp: f64,
}

struct Hamiltonian<'a, D: LogDensity> {
    target: &'a D,
    inv_metric: Vec<f64>,
}

impl<D: LogDensity> Hamiltonian<'_, D> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn energy(&self, z: &Point) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn update_gradient(&self, z: &mut Point) {
        match self.target.log_density_and_grad(&z.q, &mut z.g) {
            Ok(lp) if lp.is_finite() => z.logp = lp,
            _ => {
                z.logp = f64::NEG_INFINITY;
                z.g.fill(0.0);
            }
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        self.update_gradient(z);
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
    }

    fn sharp(&self, p: &[f64], out: &mut [f64]) {
        for ((o, p), m) in out.iter_mut().zip(p).zip(&self.inv_metric) {
            *o = m * p;
        }
    }

    fn sample_momentum(&self, z: &mut Point, rng: &mut StreamRng) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn add_into(out: &mut [f64], a: &[f64], b: &[f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x + y;
    }
}

/// Mutable state of one transition's tree building.
struct Tree<'a, 'b, D: LogDensity> {
    ham: &'a Hamiltonian<'b, D>,
    z: Point,
    eps: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
    rng: &'a mut StreamRng,
}

impl<D: LogDensity> Tree<'_, '_, D> {
    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        depth: usize,
        z_propose: &mut Point,
        p_sharp_beg: &mut [f64],
        p_sharp_end: &mut [f64],
        rho: &mut [f64],
        p_beg: &mut [f64],
        p_end: &mut [f64],
        sign: f64,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            self.ham.leapfrog(&mut self.z, sign * self.eps);
            self.n_leapfrog += 1;
            let h = self.ham.energy(&self.z);
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro_prob += if self.h0 - h > 0.0 { 1.0 } else { (self.h0 - h).exp() };
            z_propose.clone_from(&self.z);
            self.ham.sharp(&self.z.p, p_sharp_beg);
            p_sharp_end.copy_from_slice(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&self.z.p) {
                *r += p;
            }
            p_beg.copy_from_slice(&self.z.p);
            p_end.copy_from_slice(&self.z.p);
            return !self.divergent;
        }

        let n = p_beg.len();
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut p_sharp_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        if !self.build(
            depth - 1,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            sign,
            &mut lsw_init,
        ) {
            return false;
        }

        let mut z_propose_final = self.z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut p_sharp_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        if !self.build(
            depth - 1,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            sign,
            &mut lsw_final,
        ) {
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (lsw_final - lsw_subtree).exp();
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let mut rho_subtree = vec![0.0; n];
        add_into(&mut rho_subtree, &rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = criterion(p_sharp_beg, p_sharp_end, &rho_subtree);
        let mut rho_ext = vec![0.0; n];
        add_into(&mut rho_ext, &rho_init, &p_final_beg);
        persist &= criterion(p_sharp_beg, &p_sharp_final_beg, &rho_ext);
        add_into(&mut rho_ext, &rho_final, &p_init_end);
        persist &= criterion(&p_sharp_init_end, p_sharp_end, &rho_ext);
        persist
    }
}

/// One NUTS transition from `current`.
fn transition<D: LogDensity>(
    ham: &Hamiltonian<'_, D>,
    current: &mut Point,
    eps: f64,
    max_depth: usize,
    rng: &mut StreamRng,
) -> IterStats {
    let n = current.q.len();
    let mut z = current.clone();
    ham.sample_momentum(&mut z, rng);
    let h0 = ham.energy(&z);

    let mut z_fwd = z.clone();
    let mut z_bck = z.clone();
    let mut z_sample = z.clone();
    let mut z_propose = z.clone();

    let mut p_sharp_fwd_bck = vec![0.0; n];
    ham.sharp(&z.p, &mut p_sharp_fwd_bck);
    let mut p_sharp_fwd_fwd = p_sharp_fwd_bck.clone();
    let mut p_sharp_bck_fwd = p_sharp_fwd_bck.clone();
    let mut p_sharp_bck_bck = p_sharp_fwd_bck.clone();
    let mut p_fwd_bck = z.p.clone();
    let mut p_fwd_fwd = z.p.clone();
    let mut p_bck_fwd = z.p.clone();
    let mut p_bck_bck = z.p.clone();
    let mut rho = z.p.clone();
    let mut log_sum_weight = 0.0;

    let mut tree = Tree {
        ham,
        z,
        eps,
        h0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
        rng,
    };
    let mut depth = 0;
    let mut rho_fwd = vec![0.0; n];
    let mut rho_bck = vec![0.0; n];
    let mut rho_ext = vec![0.0; n];

    while depth < max_depth {
        rho_fwd.fill(0.0);
        rho_bck.fill(0.0);
        let mut lsw_subtree = f64::NEG_INFINITY;
        let valid = if tree.rng.random::<f64>() > 0.5 {
            tree.z.clone_from(&z_fwd);
            rho_bck.copy_from_slice(&rho);
            p_bck_fwd.copy_from_slice(&p_fwd_bck);
            p_sharp_bck_fwd.copy_from_slice(&p_sharp_fwd_bck);
            let ok = tree.build(
                depth,
                &mut z_propose,
                &mut p_sharp_fwd_bck,
                &mut p_sharp_fwd_fwd,
                &mut rho_fwd,
                &mut p_fwd_bck,
                &mut p_fwd_fwd,
                1.0,
                &mut lsw_subtree,
            );
            z_fwd.clone_from(&tree.z);
            ok
        } else {
            tree.z.clone_from(&z_bck);
            rho_fwd.copy_from_slice(&rho);
            p_fwd_bck.copy_from_slice(&p_bck_fwd);
            p_sharp_fwd_bck.copy_from_slice(&p_sharp_bck_fwd);
            let ok = tree.build(
                depth,
                &mut z_propose,
                &mut p_sharp_bck_fwd,
                &mut p_sharp_bck_bck,
                &mut rho_bck,
                &mut p_bck_fwd,
                &mut p_bck_bck,
                -1.0,
                &mut lsw_subtree,
            );
            z_bck.clone_from(&tree.z);
            ok
        };
        if !valid {
            break;
        }
        depth += 1;

        if lsw_subtree > log_sum_weight {
            z_sample.clone_from(&z_propose);
        } else {
            let accept = (lsw_subtree - log_sum_weight).exp();
            if tree.rng.random::<f64>() < accept {
                z_sample.clone_from(&z_propose);
            }
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        add_into(&mut rho, &rho_bck, &rho_fwd);
        let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        add_into(&mut rho_ext, &rho_bck, &p_fwd_bck);
        persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
        add_into(&mut rho_ext, &rho_fwd, &p_bck_fwd);
        persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
        if !persist {
            break;
        }
    }

    let n_leapfrog = tree.n_leapfrog.max(1);
    let accept_stat = tree.sum_metro_prob / n_leapfrog as f64;
    let divergent = tree.divergent;
    let energy = ham.energy(&z_sample);
    current.q.clone_from(&z_sample.q);
    current.g.clone_from(&z_sample.g);
    current.logp = z_sample.logp;
    IterStats {
        step_size: eps,
        tree_depth: depth as u32,
        n_leapfrog: tree.n_leapfrog as u32,
        divergent,
        accept_stat,
        energy,
    }
}

/// Heuristic initial step size: doubles or halves until a single leapfrog
/// step crosses acceptance 0.8.
fn init_step_size<D: LogDensity>(ham: &Hamiltonian<'_, D>, z0: &Point, mut eps: f64, rng: &mut StreamRng) -> f64 {
    let try_step = |eps: f64, rng: &mut StreamRng| {
        let mut z = z0.clone();
        ham.sample_momentum(&mut z, rng);
        let h0 = ham.energy(&z);
        ham.leapfrog(&mut z, eps);
        h0 - ham.energy(&z)
    };
    let target = 0.8f64.ln();
    let direction = if try_step(eps, rng) > target { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let dh = try_step(eps, rng);
        if direction > 0.0 && !(dh > target) {
            break;
        }
        if direction < 0.0 && !(dh < target) {
            break;
        }
        eps = if direction > 0.0 { 2.0 * eps } else { 0.5 * eps };
        if !(eps > 1e-12 && eps < 1e7) {
            break;
        }
    }
    eps.clamp(1e-12, 1e7)
}

/// Nesterov dual averaging of `ln eps`.
struct DualAveraging {
    mu: f64,
    target: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            target,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    fn learn(&mut self, stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Warmup schedule: a fast initial buffer, doubling metric windows, and a
/// final step-size-only buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarmupSchedule {
    pub init_buffer: usize,
    pub term_buffer: usize,
    /// Iteration indices at which metric windows close.
    pub window_ends: Vec<usize>,
}

impl WarmupSchedule {
    pub fn new(warmup: usize) -> Self {
        if warmup < 20 {
            return Self {
                init_buffer: warmup,
                term_buffer: 0,
                window_ends: Vec::new(),
            };
        }
        let init_buffer = (0.15 * warmup as f64) as usize;
        let term_buffer = (0.25 * warmup as f64) as usize;
        let slow_end = warmup - term_buffer;
        let mut window = (warmup / 20).max(5);
        let mut start = init_buffer;
        let mut ends = Vec::new();
        while start < slow_end {
            let mut end = start + window;
            if end + 2 * window > slow_end {
                end = slow_end;
            }
            ends.push(end);
            start = end;
            window *= 2;
        }
        Self {
            init_buffer,
            term_buffer,
            window_ends: ends,
        }
    }

    fn in_slow_phase(&self, iter: usize) -> bool {
        match self.window_ends.last() {
            Some(&last) => iter >= self.init_buffer && iter < last,
            None => false,
        }
    }
}

/// Welford variance accumulator over positions.
struct VarianceWindow {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceWindow {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Regularized variance, shrunk toward `1e-3`.
    fn regularized(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }

    fn reset(&mut self) {
        self.n = 0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }
}

fn initial_point<D: LogDensity>(target: &D, radius: f64, rng: &mut StreamRng) -> Result<Point> {
    let dim = target.dim();
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        let mut g = vec![0.0; dim];
        if let Ok(lp) = target.log_density_and_grad(&q, &mut g) {
            if lp.is_finite() && g.iter().all(|v| v.is_finite()) {
                return Ok(Point {
                    q,
                    p: vec![0.0; dim],
                    g,
                    logp: lp,
                });
            }
        }
    }
    Err(Error::invalid("no finite initial point found after 100 attempts"))
}

/// Runs one chain; `chain` selects its random stream.
pub fn run_chain<D: LogDensity>(target: &D, config: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    config.validate()?;
    let dim = target.dim();
    let mut rng = stream(config.seed, &[domain::CHAIN, chain as u64]);
    let mut z = initial_point(target, config.init_radius, &mut rng)?;
    let mut ham = Hamiltonian {
        target,
        inv_metric: vec![1.0; dim],
    };

    let schedule = WarmupSchedule::new(config.warmup);
    let mut eps = init_step_size(&ham, &z, 1.0, &mut rng);
    let mut da = DualAveraging::new(eps, config.target_accept);
    let mut window = VarianceWindow::new(dim);
    let mut warmup_divergences = 0;

    for iter in 0..config.warmup {
        let st = transition(&ham, &mut z, eps, config.max_depth, &mut rng);
        warmup_divergences += usize::from(st.divergent);
        eps = da.learn(st.accept_stat);
        if schedule.in_slow_phase(iter) {
            window.add(&z.q);
            if schedule.window_ends.contains(&(iter + 1)) {
                ham.inv_metric = window.regularized();
                window.reset();
                eps = init_step_size(&ham, &z, eps, &mut rng);
                da = DualAveraging::new(eps, config.target_accept);
            }
        }
    }
    if config.warmup > 0 {
        eps = da.final_step_size();
    }

    let mut draws = Vec::with_capacity(config.draws * dim);
    let mut stats = Vec::with_capacity(config.draws);
    for _ in 0..config.draws {
        let st = transition(&ham, &mut z, eps, config.max_depth, &mut rng);
        draws.extend_from_slice(&z.q);
        stats.push(st);
    }
    Ok(ChainOutput {
        draws,
        stats,
        step_size: eps,
        inv_metric: ham.inv_metric,
        warmup_divergences,
    })
}

/// Runs `config.chains` independent chains in parallel.
pub fn run_chains<D: LogDensity>(target: &D, config: &SamplerConfig) -> Result<Vec<ChainOutput>> {
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c))
        .collect()
}
