//! The joint user / access-point / wavelength assignment as a deterministic
//! episodic MDP.
//!
//! An action assigns every user one (AP, wavelength) slot with no slot
//! shared. The state is the per-user QoS bit vector the last action produced.
//! User positions are static, so the outcome of an action does not depend on
//! the state it is taken from.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::link::{LinkBudget, RewardScale};
use crate::{Error, Result};

/// Upper bound on the number of enumerated actions.
pub const MAX_ACTIONS: usize = 10_000_000;

/// One (access point, wavelength) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub ap: usize,
    pub wavelength: usize,
}

impl Slot {
    pub fn index(self, wavelengths: usize) -> usize {
        self.ap * wavelengths + self.wavelength
    }

    pub fn from_index(index: usize, wavelengths: usize) -> Self {
        Slot {
            ap: index / wavelengths,
            wavelength: index % wavelengths,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct UserSlot {
    user: usize,
    ap: usize,
    wavelength: usize,
}

/// Map from user to its (AP, wavelength) slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<UserSlot>", into = "Vec<UserSlot>")]
pub struct Assignment {
    pairs: BTreeMap<usize, Slot>,
}

impl From<Vec<UserSlot>> for Assignment {
    fn from(v: Vec<UserSlot>) -> Self {
        let mut a = Assignment::default();
        for u in v {
            a.insert(
                u.user,
                Slot {
                    ap: u.ap,
                    wavelength: u.wavelength,
                },
            );
        }
        a
    }
}

impl From<Assignment> for Vec<UserSlot> {
    fn from(a: Assignment) -> Self {
        a.iter()
            .map(|(user, s)| UserSlot {
                user,
                ap: s.ap,
                wavelength: s.wavelength,
            })
            .collect()
    }
}

impl Assignment {
    /// User `k` gets the `k`-th slot.
    pub fn from_slots(slots: impl IntoIterator<Item = Slot>) -> Self {
        Self {
            pairs: slots.into_iter().enumerate().collect(),
        }
    }

    pub fn insert(&mut self, user: usize, slot: Slot) -> Option<Slot> {
        self.pairs.insert(user, slot)
    }

    pub fn get(&self, user: usize) -> Option<Slot> {
        self.pairs.get(&user).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Slot)> + '_ {
        self.pairs.iter().map(|(k, s)| (*k, *s))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Every user `0..users` holds exactly one slot inside the `aps × wavelengths`
/// grid, and no slot is held twice.
pub fn is_feasible(a: &Assignment, users: usize, aps: usize, wavelengths: usize) -> bool {
    if a.len() != users || (0..users).any(|k| a.get(k).is_none()) {
        return false;
    }
    let mut taken = vec![false; aps * wavelengths];
    for (_, s) in a.iter() {
        if s.ap >= aps || s.wavelength >= wavelengths {
            return false;
        }
        let i = s.index(wavelengths);
        if taken[i] {
            return false;
        }
        taken[i] = true;
    }
    true
}

/// `(slots)! / (slots - users)!`, or `None` on overflow.
pub fn falling_factorial(slots: usize, users: usize) -> Option<usize> {
    if users > slots {
        return Some(0);
    }
    (0..users).try_fold(1usize, |acc, i| acc.checked_mul(slots - i))
}

/// All feasible assignments in a fixed lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    users: usize,
    aps: usize,
    wavelengths: usize,
    actions: Vec<Assignment>,
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Assignment> {
        self.actions.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Assignment> {
        self.actions.iter()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.users, self.aps, self.wavelengths)
    }

    /// Position of `a` in the enumeration, or `None` if infeasible.
    pub fn index_of(&self, a: &Assignment) -> Option<usize> {
        // lexicographic rank of a partial permutation
        let (users, slots) = (self.users, self.aps * self.wavelengths);
        if !is_feasible(a, users, self.aps, self.wavelengths) {
            return None;
        }
        let mut used = vec![false; slots];
        let mut rank = 0usize;
        for k in 0..users {
            let s = a.get(k)?.index(self.wavelengths);
            let smaller_free = (0..s).filter(|&i| !used[i]).count();
            let block = falling_factorial(slots - k - 1, users - k - 1)?;
            rank += smaller_free * block;
            used[s] = true;
        }
        Some(rank)
    }
}

/// Every injective placement of `users` users into `aps × wavelengths`
/// slots, ordered lexicographically by (user 0 slot, user 1 slot, ...) with
/// slot index `ap * wavelengths + wavelength`.
pub fn enumerate_actions(users: usize, aps: usize, wavelengths: usize) -> Result<ActionSpace> {
    let slots = aps * wavelengths;
    if users > slots {
        return Err(Error::InfeasibleProblem { users, slots });
    }
    let count = falling_factorial(slots, users)
        .filter(|c| *c <= MAX_ACTIONS)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "action space for K={users}, L={aps}, N={wavelengths} exceeds {MAX_ACTIONS} actions"
            ))
        })?;

    let mut actions = Vec::with_capacity(count);
    let mut current = Vec::with_capacity(users);
    let mut used = vec![false; slots];
    fn recurse(
        users: usize,
        wavelengths: usize,
        current: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Assignment>,
    ) {
        if current.len() == users {
            out.push(Assignment::from_slots(
                current.iter().map(|&i| Slot::from_index(i, wavelengths)),
            ));
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                current.push(i);
                recurse(users, wavelengths, current, used, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    recurse(users, wavelengths, &mut current, &mut used, &mut actions);
    debug_assert_eq!(actions.len(), count);

    Ok(ActionSpace {
        users,
        aps,
        wavelengths,
        actions,
    })
}

/// Per-user QoS bit vector; bit `k` set when user `k` meets its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    bits: u32,
    users: u8,
}

impl State {
    /// Largest supported user count.
    pub const MAX_USERS: usize = 20;

    pub fn zeros(users: usize) -> Self {
        assert!(users <= Self::MAX_USERS, "too many users for a QoS state");
        State {
            bits: 0,
            users: users as u8,
        }
    }

    pub fn ones(users: usize) -> Self {
        let mut s = Self::zeros(users);
        s.bits = (1u32 << users) - 1;
        s
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (k, b) in bits.iter().enumerate() {
            if *b {
                s.bits |= 1 << k;
            }
        }
        s
    }

    pub fn bit(&self, user: usize) -> bool {
        self.bits >> user & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.users as usize).map(|k| self.bit(k)).collect()
    }

    pub fn users(&self) -> usize {
        self.users as usize
    }

    /// Row of this state in a Q-table, in `0..2^K`.
    pub fn index(&self) -> usize {
        self.bits as usize
    }

    pub fn from_index(index: usize, users: usize) -> Self {
        let mut s = Self::zeros(users);
        s.bits = index as u32;
        s
    }

    pub fn all_ones(&self) -> bool {
        self.bits == (1u32 << self.users) - 1
    }

    pub fn count(users: usize) -> usize {
        1 << users
    }
}

/// Minimum linear SINR per user.
#[derive(Debug, Clone, PartialEq)]
pub struct QoSConfig {
    pub thresholds: Vec<f64>,
}

impl QoSConfig {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if let Some(t) = thresholds.iter().find(|t| t.is_nan() || **t <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "QoS thresholds must be positive, got {t}"
            )));
        }
        Ok(Self { thresholds })
    }

    pub fn uniform(users: usize, threshold: f64) -> Result<Self> {
        Self::new(vec![threshold; users])
    }
}

/// Bit `k` is set iff user `k`'s linear SINR reaches its threshold.
pub fn qos_state(a: &Assignment, budget: &LinkBudget, qos: &QoSConfig) -> Result<State> {
    let users = budget.users();
    if qos.thresholds.len() != users {
        return Err(Error::InvalidArgument(format!(
            "{} QoS thresholds for {users} users",
            qos.thresholds.len()
        )));
    }
    let bits = (0..users)
        .map(|k| Ok(budget.sinr(k, a)? >= qos.thresholds[k]))
        .collect::<Result<Vec<_>>>()?;
    Ok(State::from_bits(&bits))
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: State,
    pub reward: f64,
    pub done: bool,
}

/// Static assignment environment over a fixed link budget.
///
/// Rewards and next states are evaluated once per action at construction;
/// [`Environment::step`] is a table lookup.
#[derive(Debug, Clone)]
pub struct Environment {
    budget: LinkBudget,
    qos: QoSConfig,
    scale: RewardScale,
    max_steps_per_episode: usize,
    actions: ActionSpace,
    rewards: Vec<f64>,
    outcomes: Vec<State>,
}

impl Environment {
    pub fn new(
        budget: LinkBudget,
        qos: QoSConfig,
        scale: RewardScale,
        max_steps_per_episode: usize,
    ) -> Result<Self> {
        if max_steps_per_episode == 0 {
            return Err(Error::InvalidArgument(
                "max_steps_per_episode must be >= 1".into(),
            ));
        }
        if budget.users() > State::MAX_USERS {
            return Err(Error::InvalidArgument(format!(
                "at most {} users supported",
                State::MAX_USERS
            )));
        }
        let actions = enumerate_actions(budget.users(), budget.aps(), budget.wavelengths())?;
        let evaluated = actions
            .actions
            .par_iter()
            .map(|a| Ok((budget.sum_sinr(a, scale)?, qos_state(a, &budget, &qos)?)))
            .collect::<Result<Vec<_>>>()?;
        let (rewards, outcomes) = evaluated.into_iter().unzip();
        Ok(Self {
            budget,
            qos,
            scale,
            max_steps_per_episode,
            actions,
            rewards,
            outcomes,
        })
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn qos(&self) -> &QoSConfig {
        &self.qos
    }

    pub fn scale(&self) -> RewardScale {
        self.scale
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn users(&self) -> usize {
        self.budget.users()
    }

    pub fn num_states(&self) -> usize {
        State::count(self.users())
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn max_steps_per_episode(&self) -> usize {
        self.max_steps_per_episode
    }

    /// All-zeros: no user served yet.
    pub fn start_state(&self) -> State {
        State::zeros(self.users())
    }

    /// Reward of an action, identical to `sum_sinr` of its assignment.
    pub fn reward(&self, action: usize) -> Option<f64> {
        self.rewards.get(action).copied()
    }

    /// Takes `action` from `state`. `done` is set when every user meets its
    /// QoS threshold. The state argument does not influence the outcome.
    pub fn step(&self, state: &State, action: usize) -> Result<Transition> {
        if state.users() != self.users() {
            return Err(Error::InvalidArgument(format!(
                "state has {} users, environment {}",
                state.users(),
                self.users()
            )));
        }
        let (Some(&reward), Some(&next)) = (self.rewards.get(action), self.outcomes.get(action))
        else {
            return Err(Error::InvalidArgument(format!(
                "action {action} outside 0..{}",
                self.num_actions()
            )));
        };
        Ok(Transition {
            next,
            reward,
            done: next.all_ones(),
        })
    }

    /// [`Environment::step`] taken as step `step_index` (0-based) of an
    /// episode; also done once the per-episode step budget is used up.
    pub fn step_in_episode(
        &self,
        state: &State,
        action: usize,
        step_index: usize,
    ) -> Result<Transition> {
        let mut t = self.step(state, action)?;
        t.done |= step_index + 1 >= self.max_steps_per_episode;
        Ok(t)
    }
}
