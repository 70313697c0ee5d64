//! The learning node's view of the channel: action-observation symbols,
//! the sliding state history fed to the Q-network, and epsilon-greedy
//! action selection with multiplicative decay.

use rand::Rng;
use std::collections::VecDeque;

/// Number of distinct channel-state symbols; also the one-hot width.
pub const SYMBOL_DIM: usize = 4;

/// Actions available to the learning node in every basic slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentAction {
    Transmit,
    Sense,
}

impl AgentAction {
    /// Q-network output index. `Transmit` first; greedy ties resolve to it.
    pub fn index(self) -> usize {
        match self {
            AgentAction::Transmit => 0,
            AgentAction::Sense => 1,
        }
    }

    pub fn from_index(i: usize) -> AgentAction {
        match i {
            0 => AgentAction::Transmit,
            1 => AgentAction::Sense,
            _ => panic!("action index out of range: {i}"),
        }
    }
}

/// Per-slot feedback the access point returns to the learning node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentFeedback {
    /// Own transmission occupied the slot alone.
    Successful,
    /// Own transmission overlapped another node's.
    Collided,
    /// Sensed the slot and some other node occupied it.
    Busy,
    /// Sensed the slot and nobody occupied it.
    Idle,
}

/// One action-observation pair, the atom of agent state.
///
/// Encoding order is fixed: the one-hot index of each variant is its
/// declaration order here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelStateSymbol {
    TransmitSuccessful,
    TransmitCollided,
    SenseBusy,
    SenseIdle,
}

impl ChannelStateSymbol {
    pub fn index(self) -> usize {
        match self {
            ChannelStateSymbol::TransmitSuccessful => 0,
            ChannelStateSymbol::TransmitCollided => 1,
            ChannelStateSymbol::SenseBusy => 2,
            ChannelStateSymbol::SenseIdle => 3,
        }
    }

    pub fn from_index(i: usize) -> ChannelStateSymbol {
        match i {
            0 => ChannelStateSymbol::TransmitSuccessful,
            1 => ChannelStateSymbol::TransmitCollided,
            2 => ChannelStateSymbol::SenseBusy,
            3 => ChannelStateSymbol::SenseIdle,
            _ => panic!("symbol index out of range: {i}"),
        }
    }

    pub fn one_hot(self) -> [f64; SYMBOL_DIM] {
        let mut row = [0.0; SYMBOL_DIM];
        row[self.index()] = 1.0;
        row
    }

    /// Pair an action with its feedback. Panics on an inconsistent pairing
    /// (transmissions can only succeed or collide; sensing only observes
    /// busy or idle) — that is a driver bug, not a runtime condition.
    pub fn from_parts(action: AgentAction, feedback: AgentFeedback) -> ChannelStateSymbol {
        match (action, feedback) {
            (AgentAction::Transmit, AgentFeedback::Successful) => {
                ChannelStateSymbol::TransmitSuccessful
            }
            (AgentAction::Transmit, AgentFeedback::Collided) => {
                ChannelStateSymbol::TransmitCollided
            }
            (AgentAction::Sense, AgentFeedback::Busy) => ChannelStateSymbol::SenseBusy,
            (AgentAction::Sense, AgentFeedback::Idle) => ChannelStateSymbol::SenseIdle,
            (a, f) => panic!("inconsistent action/feedback pairing: {a:?} with {f:?}"),
        }
    }
}

/// Sliding window of the last `M` channel-state symbols, oldest first.
///
/// Before any observation arrives the window is padded with
/// `(SENSE, IDLE)` so the Q-network input shape is fixed from slot 0.
#[derive(Debug, Clone)]
pub struct AgentHistory {
    window: VecDeque<ChannelStateSymbol>,
    len: usize,
}

impl AgentHistory {
    pub fn new(history_len: usize) -> AgentHistory {
        assert!(history_len > 0, "history length must be positive");
        AgentHistory {
            window: std::iter::repeat(ChannelStateSymbol::SenseIdle)
                .take(history_len)
                .collect(),
            len: history_len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Record the outcome of the slot just finished, dropping the oldest
    /// symbol.
    pub fn observe(&mut self, action: AgentAction, feedback: AgentFeedback) -> ChannelStateSymbol {
        let symbol = ChannelStateSymbol::from_parts(action, feedback);
        self.window.pop_front();
        self.window.push_back(symbol);
        symbol
    }

    /// Most recent symbol (the `c_t` entering the current slot).
    pub fn latest(&self) -> ChannelStateSymbol {
        *self.window.back().expect("history is never empty")
    }

    /// Symbol indices oldest-first, the Q-network input.
    pub fn indices(&self) -> Vec<u8> {
        self.window.iter().map(|s| s.index() as u8).collect()
    }

    /// One-hot rows flattened oldest-first to length `4 * M`.
    pub fn encode_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len * SYMBOL_DIM);
        for s in &self.window {
            out.extend_from_slice(&s.one_hot());
        }
        out
    }
}

/// Exploration probability with per-slot multiplicative decay and a floor.
#[derive(Debug, Clone)]
pub struct EpsilonSchedule {
    eps: f64,
    decay: f64,
    floor: f64,
}

impl EpsilonSchedule {
    pub fn new(initial: f64, decay: f64, floor: f64) -> EpsilonSchedule {
        assert!((0.0..=1.0).contains(&initial));
        assert!((0.0..=1.0).contains(&decay));
        assert!(floor >= 0.0 && floor <= initial);
        EpsilonSchedule {
            eps: initial,
            decay,
            floor,
        }
    }

    pub fn current(&self) -> f64 {
        self.eps
    }

    pub fn advance(&mut self) {
        self.eps = (self.eps * self.decay).max(self.floor);
    }
}

/// Epsilon-greedy selection over the two Q values, advancing the schedule.
///
/// With probability `1 - eps` picks the arg-max (ties go to `Transmit`,
/// the lower index); otherwise picks uniformly between the two actions.
/// Panics on non-finite Q values: that signals diverged training and the
/// run must not silently continue.
pub fn select_action<R: Rng>(
    q_values: [f64; 2],
    schedule: &mut EpsilonSchedule,
    rng: &mut R,
) -> AgentAction {
    assert!(
        q_values[0].is_finite() && q_values[1].is_finite(),
        "non-finite Q values {q_values:?}: training diverged"
    );
    let eps = schedule.current();
    let action = if rng.gen::<f64>() < eps {
        if rng.gen::<f64>() < 0.5 {
            AgentAction::Transmit
        } else {
            AgentAction::Sense
        }
    } else if q_values[1] > q_values[0] {
        AgentAction::Sense
    } else {
        AgentAction::Transmit
    };
    schedule.advance();
    action
}
