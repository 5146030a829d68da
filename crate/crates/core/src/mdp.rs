//! Small explicitly enumerated MDPs with dense transition tables.
//!
//! Text format, one directive or transition per line, `#` comments:
//!
//! ```text
//! states 2
//! actions 2
//! partner_actions 2   # two-player tables only
//! gamma 0.9
//! 0 1 1 1.0           # s a s' p    (single agent)
//! 0 1 0 1 1.0         # s a a~ s' p (two player)
//! ```
//! Unlisted transitions have probability 0.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing `{0}` directive")]
    Missing(&'static str),
    #[error("row (state {state}, action {action}) sums to {sum}, expected 1")]
    NotStochastic {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("discount {0} outside (0, 1)")]
    BadDiscount(f64),
    #[error("empty state or action set")]
    Empty,
    #[error("table has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Row sums must match 1 to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `p[(s * n_actions + a) * n_states + s']`.
    pub transitions: Vec<f64>,
    pub gamma: f64,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        let mdp = FiniteMdp {
            n_states,
            n_actions,
            transitions,
            gamma,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(MdpError::Empty);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(MdpError::BadDiscount(self.gamma));
        }
        let expected = self.n_states * self.n_actions * self.n_states;
        if self.transitions.len() != expected {
            return Err(MdpError::DimensionMismatch {
                expected,
                found: self.transitions.len(),
            });
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let sum: f64 = self.row(s, a).iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL || self.row(s, a).iter().any(|&p| p < 0.0) {
                    return Err(MdpError::NotStochastic {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    /// `E[f(s') | s, a]`.
    pub fn expect(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        self.row(s, a).iter().zip(f).map(|(p, v)| p * v).sum()
    }

    pub fn parse(text: &str) -> Result<Self, MdpError> {
        let t = parse_tables(text, false)?;
        FiniteMdp::new(t.states, t.actions, t.probs, t.gamma)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "states {}\nactions {}\ngamma {}\n",
            self.n_states, self.n_actions, self.gamma
        );
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                for (s2, &p) in self.row(s, a).iter().enumerate() {
                    if p != 0.0 {
                        let _ = writeln!(out, "{s} {a} {s2} {p:?}");
                    }
                }
            }
        }
        out
    }
}

/// Two-player table: own action `a`, partner action `a~`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPlayerMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_partner_actions: usize,
    /// `p[((s * n_actions + a) * n_partner_actions + a~) * n_states + s']`.
    pub transitions: Vec<f64>,
    pub gamma: f64,
}

impl TwoPlayerMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        n_partner_actions: usize,
        transitions: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 || n_partner_actions == 0 {
            return Err(MdpError::Empty);
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(MdpError::BadDiscount(gamma));
        }
        let expected = n_states * n_actions * n_partner_actions * n_states;
        if transitions.len() != expected {
            return Err(MdpError::DimensionMismatch {
                expected,
                found: transitions.len(),
            });
        }
        let m = TwoPlayerMdp {
            n_states,
            n_actions,
            n_partner_actions,
            transitions,
            gamma,
        };
        for s in 0..n_states {
            for a in 0..n_actions {
                for b in 0..n_partner_actions {
                    let sum: f64 = m.row(s, a, b).iter().sum();
                    if (sum - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(MdpError::NotStochastic {
                            state: s,
                            action: a,
                            sum,
                        });
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn row(&self, s: usize, a: usize, partner: usize) -> &[f64] {
        let start = ((s * self.n_actions + a) * self.n_partner_actions + partner) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn parse(text: &str) -> Result<Self, MdpError> {
        let t = parse_tables(text, true)?;
        TwoPlayerMdp::new(t.states, t.actions, t.partner_actions, t.probs, t.gamma)
    }
}

struct Tables {
    states: usize,
    actions: usize,
    partner_actions: usize,
    gamma: f64,
    probs: Vec<f64>,
}

fn parse_tables(text: &str, two_player: bool) -> Result<Tables, MdpError> {
    let mut states = None;
    let mut actions = None;
    let mut partner_actions = if two_player { None } else { Some(1) };
    let mut gamma = None;
    let mut rows: Vec<(usize, Vec<usize>, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| MdpError::Parse {
            line: i + 1,
            reason,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |t: &str| t.parse::<usize>().map_err(|e| err(format!("`{t}`: {e}")));
        match toks[0] {
            "states" if toks.len() == 2 => states = Some(num(toks[1])?),
            "actions" if toks.len() == 2 => actions = Some(num(toks[1])?),
            "partner_actions" if toks.len() == 2 && two_player => {
                partner_actions = Some(num(toks[1])?)
            }
            "gamma" if toks.len() == 2 => {
                gamma = Some(
                    toks[1]
                        .parse::<f64>()
                        .map_err(|e| err(format!("gamma: {e}")))?,
                )
            }
            _ => {
                let want = if two_player { 5 } else { 4 };
                if toks.len() != want {
                    return Err(err(format!("expected {want} fields, found {}", toks.len())));
                }
                let idx = toks[..want - 1]
                    .iter()
                    .map(|t| num(t))
                    .collect::<Result<Vec<_>, _>>()?;
                let p = toks[want - 1]
                    .parse::<f64>()
                    .map_err(|e| err(format!("probability: {e}")))?;
                rows.push((i + 1, idx, p));
            }
        }
    }
    let states = states.ok_or(MdpError::Missing("states"))?;
    let actions = actions.ok_or(MdpError::Missing("actions"))?;
    let partner_actions = partner_actions.ok_or(MdpError::Missing("partner_actions"))?;
    let gamma = gamma.ok_or(MdpError::Missing("gamma"))?;
    let mut probs = vec![0.0; states * actions * partner_actions * states];
    for (line, idx, p) in rows {
        let (s, a, b, s2) = if two_player {
            (idx[0], idx[1], idx[2], idx[3])
        } else {
            (idx[0], idx[1], 0, idx[2])
        };
        if s >= states || a >= actions || b >= partner_actions || s2 >= states {
            return Err(MdpError::Parse {
                line,
                reason: "index out of range".into(),
            });
        }
        probs[((s * actions + a) * partner_actions + b) * states + s2] += p;
    }
    Ok(Tables {
        states,
        actions,
        partner_actions,
        gamma,
        probs,
    })
}
