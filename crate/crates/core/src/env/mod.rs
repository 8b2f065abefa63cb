//! Environments, policies, and offline-data generation.
//!
//! Three environments are provided: a one-step two-state toy problem whose
//! terminal reward carries configurable noise, a cart-pole simulator with
//! standard physics constants, and a finite tabular MDP wrapper. Environment
//! handles are immutable after construction; every rollout owns its own
//! seeded generator, so parallel collection is safe.

mod collect;
mod policy;

pub use collect::{collect_dataset, collect_episodes, mc_return_distribution, Episode};
pub use policy::Policy;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use rand::distributions::Open01;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tabular::TabularMdp;

/// One offline sample: `(s, a, r, s', terminal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Noise law added to the toy environment's terminal reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardNoise {
    /// Gaussian with standard deviation `sigma >= 0` (`sigma = 0` is exact).
    Normal { sigma: f64 },
    /// Student-t with `df > 0` degrees of freedom.
    StudentT { df: f64 },
}

impl RewardNoise {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardNoise::Normal { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            RewardNoise::Normal { sigma } => Err(Error::Config(alloc::format!(
                "normal noise requires sigma >= 0, got {sigma}"
            ))),
            RewardNoise::StudentT { df } if df > 0.0 && df.is_finite() => Ok(()),
            RewardNoise::StudentT { df } => Err(Error::Config(alloc::format!(
                "student-t noise requires df > 0, got {df}"
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardNoise::Normal { sigma } => sigma * sample_standard_normal(rng),
            // Validated at construction, so the draw cannot fail.
            RewardNoise::StudentT { df } => sample_student_t(df, rng).unwrap_or(f64::NAN),
        }
    }
}

/// One draw from N(0, 1).
pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One Student-t draw, constructed as `Z / sqrt(X/df)` with `Z ~ N(0,1)` and
/// `X ~ chi-square(df)`.
pub fn sample_student_t<R: Rng + ?Sized>(df: f64, rng: &mut R) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::Config(alloc::format!(
            "student-t requires df > 0, got {df}"
        )));
    }
    let z = sample_standard_normal(rng);
    let chi2 = ChiSquared::new(df)
        .map_err(|e| Error::Config(e.to_string()))?
        .sample(rng);
    Ok(z / libm::sqrt(chi2 / df))
}

/// Uniform draw from the open interval (0, 1); used for quantile levels.
pub fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Empirical representation of a return law: a sorted list of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDistribution {
    samples: Vec<f64>,
}

impl ReturnDistribution {
    /// Sorts the samples; rejects an empty list.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("return distribution needs >= 1 sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Interpolated empirical quantile (linear between order statistics).
    pub fn quantile(&self, tau: f64) -> f64 {
        let n = self.samples.len();
        if n == 1 {
            return self.samples[0];
        }
        let h = tau.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = libm::floor(h) as usize;
        let hi = (lo + 1).min(n - 1);
        let w = h - lo as f64;
        self.samples[lo] * (1.0 - w) + self.samples[hi] * w
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// One-step episodic environment: start state `x0`, single transition to the
/// terminal state `x1` with reward `base + noise`.
#[derive(Debug, Clone)]
pub struct ToyEnv {
    pub base: f64,
    pub noise: RewardNoise,
    pub gamma: f64,
}

impl ToyEnv {
    pub const DEFAULT_GAMMA: f64 = 0.5;

    pub fn new(base: f64, noise: RewardNoise, gamma: f64) -> Result<Self> {
        noise.validate()?;
        check_gamma(gamma)?;
        Ok(Self { base, noise, gamma })
    }
}

/// Cart-pole with standard physics: 4-dimensional state (position, velocity,
/// angle, angular velocity), two actions (push left/right), +1 reward per
/// step that stays within bounds, 0 on the failing step.
#[derive(Debug, Clone)]
pub struct CartPoleEnv {
    pub gamma: f64,
    pub horizon_cap: usize,
}

impl CartPoleEnv {
    pub const GRAVITY: f64 = 9.8;
    pub const CART_MASS: f64 = 1.0;
    pub const POLE_MASS: f64 = 0.1;
    pub const POLE_HALF_LENGTH: f64 = 0.5;
    pub const FORCE_MAG: f64 = 10.0;
    pub const TIMESTEP: f64 = 0.02;
    pub const ANGLE_LIMIT: f64 = 0.2095;
    pub const POSITION_LIMIT: f64 = 2.4;

    pub fn new(gamma: f64, horizon_cap: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if horizon_cap == 0 {
            return Err(Error::Config("horizon_cap must be positive".into()));
        }
        Ok(Self { gamma, horizon_cap })
    }

    fn failed(state: &[f64]) -> bool {
        libm::fabs(state[0]) > Self::POSITION_LIMIT || libm::fabs(state[2]) > Self::ANGLE_LIMIT
    }
}

/// Finite MDP used as a rollout environment. States are encoded as
/// single-component vectors holding the state index.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    pub mdp: TabularMdp,
    /// Initial state distribution over `0..n_states`.
    pub initial_dist: Vec<f64>,
    /// States that end the episode on entry.
    pub terminal_states: Vec<bool>,
    pub horizon_cap: usize,
}

impl TabularEnv {
    pub fn new(
        mdp: TabularMdp,
        initial_dist: Vec<f64>,
        terminal_states: Vec<bool>,
        horizon_cap: usize,
    ) -> Result<Self> {
        if initial_dist.len() != mdp.n_states || terminal_states.len() != mdp.n_states {
            return Err(Error::Config(
                "initial_dist/terminal_states must have one entry per state".into(),
            ));
        }
        let total: f64 = initial_dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 || initial_dist.iter().any(|p| *p < 0.0) {
            return Err(Error::Config("initial_dist must be a distribution".into()));
        }
        if horizon_cap == 0 {
            return Err(Error::Config("horizon_cap must be positive".into()));
        }
        Ok(Self {
            mdp,
            initial_dist,
            terminal_states,
            horizon_cap,
        })
    }

    pub fn state_index(state: &[f64]) -> usize {
        libm::round(state[0]) as usize
    }
}

/// Environment handle. Immutable after construction; `step` is a pure
/// function of `(state, action, rng)`.
#[derive(Debug, Clone)]
pub enum Env {
    Toy(ToyEnv),
    CartPole(CartPoleEnv),
    Tabular(TabularEnv),
}

/// Toy environment with base reward 0 and the given noise law.
pub fn make_toy_env(noise: RewardNoise) -> Result<Env> {
    Ok(Env::Toy(ToyEnv::new(0.0, noise, ToyEnv::DEFAULT_GAMMA)?))
}

/// Cart-pole with gamma 0.99 and a 500-step horizon cap.
pub fn make_cartpole_env() -> Env {
    Env::CartPole(CartPoleEnv {
        gamma: 0.99,
        horizon_cap: 500,
    })
}

impl Env {
    pub fn state_dim(&self) -> usize {
        match self {
            Env::Toy(_) => 1,
            Env::CartPole(_) => 4,
            Env::Tabular(_) => 1,
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            Env::Toy(_) => 1,
            Env::CartPole(_) => 2,
            Env::Tabular(t) => t.mdp.n_actions,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Env::Toy(t) => t.gamma,
            Env::CartPole(c) => c.gamma,
            Env::Tabular(t) => t.mdp.gamma,
        }
    }

    pub fn horizon_cap(&self) -> usize {
        match self {
            Env::Toy(_) => 1,
            Env::CartPole(c) => c.horizon_cap,
            Env::Tabular(t) => t.horizon_cap,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Env::Toy(_) => vec![0.0],
            Env::CartPole(_) => {
                (0..4).map(|_| rng.gen_range(-0.05..0.05)).collect()
            }
            Env::Tabular(t) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (s, p) in t.initial_dist.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return vec![s as f64];
                    }
                }
                vec![(t.mdp.n_states - 1) as f64]
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &[f64], action: usize, rng: &mut R) -> Step {
        debug_assert!(action < self.action_count());
        match self {
            Env::Toy(t) => Step {
                next_state: vec![1.0],
                reward: t.base + t.noise.sample(rng),
                terminal: true,
            },
            Env::CartPole(_) => {
                let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
                let force = if action == 1 {
                    CartPoleEnv::FORCE_MAG
                } else {
                    -CartPoleEnv::FORCE_MAG
                };
                let total_mass = CartPoleEnv::CART_MASS + CartPoleEnv::POLE_MASS;
                let polemass_length = CartPoleEnv::POLE_MASS * CartPoleEnv::POLE_HALF_LENGTH;
                let cos_t = libm::cos(theta);
                let sin_t = libm::sin(theta);
                let temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
                let theta_acc = (CartPoleEnv::GRAVITY * sin_t - cos_t * temp)
                    / (CartPoleEnv::POLE_HALF_LENGTH
                        * (4.0 / 3.0 - CartPoleEnv::POLE_MASS * cos_t * cos_t / total_mass));
                let x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

                let tau = CartPoleEnv::TIMESTEP;
                let next_state = vec![
                    x + tau * x_dot,
                    x_dot + tau * x_acc,
                    theta + tau * theta_dot,
                    theta_dot + tau * theta_acc,
                ];
                let failed = CartPoleEnv::failed(&next_state);
                Step {
                    next_state,
                    reward: if failed { 0.0 } else { 1.0 },
                    terminal: failed,
                }
            }
            Env::Tabular(t) => {
                let s = TabularEnv::state_index(state);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut next = t.mdp.n_states - 1;
                for (s2, p) in t.mdp.transition[s][action].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        next = s2;
                        break;
                    }
                }
                let law = &t.mdp.reward[s][action];
                let v: f64 = rng.gen();
                let mut cum = 0.0;
                let mut reward = *law.atoms().last().unwrap();
                for (atom, p) in law.atoms().iter().zip(law.probs()) {
                    cum += p;
                    if v < cum {
                        reward = *atom;
                        break;
                    }
                }
                Step {
                    next_state: vec![next as f64],
                    reward,
                    terminal: t.terminal_states[next],
                }
            }
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(alloc::format!(
            "gamma must lie in (0,1), got {gamma}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn toy_zero_noise_returns_base_exactly() {
        let env = Env::Toy(ToyEnv::new(1.5, RewardNoise::Normal { sigma: 0.0 }, 0.5).unwrap());
        let mut r = rng(0);
        for _ in 0..100 {
            let s = env.reset(&mut r);
            let out = env.step(&s, 0, &mut r);
            assert_eq!(out.reward, 1.5);
            assert!(out.terminal);
            assert_eq!(out.next_state, vec![1.0]);
        }
    }

    #[test]
    fn toy_rejects_bad_degrees_of_freedom() {
        assert!(make_toy_env(RewardNoise::StudentT { df: 0.0 }).is_err());
        assert!(make_toy_env(RewardNoise::StudentT { df: -3.0 }).is_err());
    }

    #[test]
    fn toy_student_t2_monte_carlo_moments() {
        let env = make_toy_env(RewardNoise::StudentT { df: 2.0 }).unwrap();
        let mut r = rng(7);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let s = env.reset(&mut r);
            let out = env.step(&s, 0, &mut r);
            sum += out.reward;
            sum_sq += out.reward * out.reward;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.1, "t(2) sample mean {mean}");
        assert!(var.is_finite() && var > 2.0, "t(2) sample variance {var}");
    }

    #[test]
    fn toy_standard_normal_return_std() {
        let env = make_toy_env(RewardNoise::Normal { sigma: 1.0 }).unwrap();
        let mut r = rng(11);
        let n = 100_000;
        let returns: Vec<f64> = (0..n)
            .map(|_| {
                let s = env.reset(&mut r);
                env.step(&s, 0, &mut r).reward
            })
            .collect();
        let mean = returns.iter().sum::<f64>() / n as f64;
        let std = libm::sqrt(returns.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64);
        assert!((0.99..=1.01).contains(&std), "return std {std}");
    }

    #[test]
    fn cartpole_push_symmetry_from_origin() {
        let env = make_cartpole_env();
        let zero = vec![0.0; 4];
        let mut r = rng(0);
        let left = env.step(&zero, 0, &mut r);
        let right = env.step(&zero, 1, &mut r);
        for i in 0..4 {
            assert!(
                (left.next_state[i] + right.next_state[i]).abs() < 1e-12,
                "component {i} not mirrored"
            );
        }
    }

    #[test]
    fn student_t_large_df_is_nearly_standard_normal() {
        let mut r = rng(3);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_student_t(1e6, &mut r).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let std = libm::sqrt(draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((std - 1.0).abs() < 0.03, "std {std}");
    }

    #[test]
    fn student_t_median_is_near_zero() {
        let mut r = rng(5);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| sample_student_t(4.0, &mut r).unwrap()).collect();
        draws.sort_by(f64::total_cmp);
        let median = draws[n / 2];
        assert!(median.abs() < 0.02, "median {median}");
    }

    #[test]
    fn student_t_df3_variance_matches_moment_formula() {
        let mut r = rng(9);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = sample_student_t(3.0, &mut r).unwrap();
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // df/(df-2) = 3
        assert!((var - 3.0).abs() < 0.6, "t(3) variance {var}");
    }

    #[test]
    fn return_distribution_rejects_empty_and_sorts() {
        assert!(ReturnDistribution::from_samples(vec![]).is_err());
        let d = ReturnDistribution::from_samples(vec![3.0, -1.0, 2.0]).unwrap();
        assert_eq!(d.samples(), &[-1.0, 2.0, 3.0]);
    }

    #[test]
    fn return_distribution_is_permutation_invariant() {
        let a = ReturnDistribution::from_samples(vec![0.5, -2.0, 1.0, 1.0]).unwrap();
        let b = ReturnDistribution::from_samples(vec![1.0, 1.0, -2.0, 0.5]).unwrap();
        assert_eq!(a, b);
    }
}
