//! Tabular Q-learning with ε-greedy exploration.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`) seeded with
//! `Hyperparams::seed`, so training traces reproduce bit-for-bit on any
//! platform.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{Assignment, Environment, State};
use crate::{Error, Result};

/// Episodes in a row whose largest Q change stays below tolerance before
/// training stops.
pub const CONVERGENCE_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    /// Learning rate, in (0, 1).
    pub alpha: f64,
    /// Discount factor, in [0, 1).
    pub gamma: f64,
    pub epsilon0: f64,
    /// Per-episode multiplicative decay, in (0, 1].
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub max_episodes: usize,
    pub max_steps_per_episode: usize,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.99,
            gamma: 0.0,
            epsilon0: 1.0,
            epsilon_decay: 0.99995,
            epsilon_min: 0.01,
            max_episodes: 20_000,
            max_steps_per_episode: 50,
            convergence_tol: 1e-6,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::config(key, reason));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie in (0, 1)");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return bad("epsilon0", "must lie in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || self.epsilon_min > self.epsilon0 {
            return bad("epsilon_min", "must lie in [0, epsilon0]");
        }
        if self.max_episodes == 0 {
            return bad("max_episodes", "must be >= 1");
        }
        if self.max_steps_per_episode == 0 {
            return bad("max_steps_per_episode", "must be >= 1");
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return bad("convergence_tol", "must be non-negative");
        }
        Ok(())
    }

    /// Exploration rate used in episode `episode` (0-based):
    /// `max(epsilon_min, epsilon0 * epsilon_decay^episode)`.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let e = self.epsilon0
            * self
                .epsilon_decay
                .powi(episode.min(i32::MAX as usize) as i32);
        e.max(self.epsilon_min)
    }
}

/// Dense `|S| × |A|` action-value table with a cached per-row argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    q: Vec<f64>,
    // lowest index holding the row maximum
    best: Vec<usize>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            q: vec![0.0; states * actions],
            best: vec![0; states],
        }
    }

    pub fn for_env(env: &Environment) -> Self {
        Self::zeros(env.num_states(), env.num_actions())
    }

    pub fn from_values(states: usize, actions: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != states * actions {
            return Err(Error::InvalidArgument(format!(
                "Q-table of {states}x{actions} needs {} values, got {}",
                states * actions,
                q.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Q-values must be finite".into()));
        }
        let mut t = Self {
            states,
            actions,
            q,
            best: vec![0; states],
        };
        for s in 0..states {
            t.rescan(s);
        }
        Ok(t)
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.actions..(state + 1) * self.actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.actions + action]
    }

    /// Greedy action in `state`, lowest index on ties.
    pub fn argmax(&self, state: usize) -> usize {
        self.best[state]
    }

    pub fn max(&self, state: usize) -> f64 {
        if self.actions == 0 {
            return 0.0;
        }
        self.get(state, self.best[state])
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        let i = state * self.actions + action;
        let old = self.q[i];
        self.q[i] = value;
        let best = self.best[state];
        if action == best {
            if value < old {
                self.rescan(state);
            }
        } else {
            let top = self.q[state * self.actions + best];
            if value > top || (value == top && action < best) {
                self.best[state] = action;
            }
        }
    }

    fn rescan(&mut self, state: usize) {
        let row = self.row(state);
        let mut best = 0;
        for (a, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = a;
            }
        }
        self.best[state] = best;
    }

    const MAGIC: &'static [u8; 8] = b"WDMAQTAB";
    const VERSION: u32 = 1;

    /// Versioned little-endian checkpoint; values are stored as raw IEEE-754
    /// bits so a reload is bit-identical.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&(self.states as u64).to_le_bytes())?;
        w.write_all(&(self.actions as u64).to_le_bytes())?;
        for v in &self.q {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let fmt = |reason: &str| Error::Format {
            kind: "Q-table checkpoint",
            reason: reason.into(),
        };
        let mut header = [0u8; 28];
        r.read_exact(&mut header)
            .map_err(|_| fmt("truncated header"))?;
        if &header[..8] != Self::MAGIC {
            return Err(fmt("bad magic"));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != Self::VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        let states = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
        let actions = u64::from_le_bytes(header[20..28].try_into().unwrap()) as usize;
        let len = states
            .checked_mul(actions)
            .filter(|n| *n <= 1 << 31)
            .ok_or_else(|| fmt("implausible dimensions"))?;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| fmt("truncated body"))?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)
            .map_err(|_| fmt("unreadable trailer"))?;
        if !rest.is_empty() {
            return Err(fmt("trailing bytes"));
        }
        let q = bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Self::from_values(states, actions, q)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// ε-greedy choice: draw `z` uniform in [0, 1); exploit when `z > epsilon`,
/// otherwise pick a uniformly random action.
pub fn select_action(
    qt: &QTable,
    state: &State,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize> {
    if qt.num_actions() == 0 {
        return Err(Error::InvalidState("empty action space".into()));
    }
    let z: f64 = rng.random();
    if z > epsilon {
        Ok(qt.argmax(state.index()))
    } else {
        Ok(rng.random_range(0..qt.num_actions()))
    }
}

/// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a'))`.
/// Returns the new value.
pub fn update(
    qt: &mut QTable,
    state: &State,
    action: usize,
    reward: f64,
    next: &State,
    hp: &Hyperparams,
) -> f64 {
    let (s, s_next) = (state.index(), next.index());
    let target = reward + hp.gamma * qt.max(s_next);
    let value = (1.0 - hp.alpha) * qt.get(s, action) + hp.alpha * target;
    qt.set(s, action, value);
    value
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub epsilon: f64,
    /// Largest `|ΔQ|` of any update in the episode.
    pub max_dq: f64,
    pub steps: usize,
    /// Reward of the greedy start-state action after the episode.
    pub greedy_sum_sinr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub episodes: Vec<EpisodeRecord>,
    pub converged: bool,
}

impl TrainTrace {
    /// Running maximum of the greedy reward.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.episodes
            .iter()
            .scan(f64::NEG_INFINITY, |best, e| {
                *best = best.max(e.greedy_sum_sinr);
                Some(*best)
            })
            .collect()
    }
}

/// Runs episodes from the all-zeros state until every update of
/// [`CONVERGENCE_WINDOW`] consecutive episodes moves Q by less than
/// `convergence_tol`, or `max_episodes` is reached.
pub fn train(env: &Environment, hp: &Hyperparams) -> Result<(QTable, TrainTrace)> {
    hp.validate()?;
    let mut qt = QTable::for_env(env);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut trace = TrainTrace::default();
    let start = env.start_state();
    let max_steps = hp.max_steps_per_episode;
    let mut quiet = 0;

    for episode in 0..hp.max_episodes {
        let epsilon = hp.epsilon_at(episode);
        let mut state = start;
        let mut cumulative = 0.0;
        let mut max_dq = 0.0f64;
        let mut steps = 0;
        while steps < max_steps {
            let action = select_action(&qt, &state, epsilon, &mut rng)?;
            let mut t = env.step(&state, action)?;
            t.done |= steps + 1 >= max_steps;
            let old = qt.get(state.index(), action);
            let new = update(&mut qt, &state, action, t.reward, &t.next, hp);
            max_dq = max_dq.max((new - old).abs());
            cumulative += t.reward;
            steps += 1;
            state = t.next;
            if t.done {
                break;
            }
        }
        let greedy = qt.argmax(start.index());
        trace.episodes.push(EpisodeRecord {
            episode,
            cumulative_reward: cumulative,
            epsilon,
            max_dq,
            steps,
            greedy_sum_sinr: env.reward(greedy).unwrap_or(0.0),
        });

        quiet = if max_dq < hp.convergence_tol {
            quiet + 1
        } else {
            0
        };
        if quiet >= CONVERGENCE_WINDOW {
            trace.converged = true;
            break;
        }
    }
    Ok((qt, trace))
}

/// Greedy action of the start state.
pub fn greedy_action(qt: &QTable, env: &Environment) -> usize {
    qt.argmax(env.start_state().index())
}

/// Assignment of the greedy start-state action.
pub fn extract_policy(qt: &QTable, env: &Environment) -> Assignment {
    env.actions()
        .get(greedy_action(qt, env))
        .cloned()
        .unwrap_or_default()
}
