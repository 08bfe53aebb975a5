//! The agent mind: a two-layer constraint network of need units and action
//! units plus one special unit pinned to activation = valence = 1.
//!
//! Three link families:
//!   facilitation  need <-> action, symmetric, activation channel
//!   priority      special -> need, activation channel
//!   valence       special -> need and special -> action, valence channel
//!
//! Settling iterates synchronous updates until the largest state change
//! drops below tolerance. Activation flow is valence-modulated: a source
//! contributes `w*a_i + w*v_i*a_i` (the two sums are accumulated separately
//! and added last, sources in ascending unit index, so results are
//! bit-reproducible). The valence channel feeds `w*v_i*a_i` over valence
//! links only. The settled action activations rank the agent's preference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two actions within this distance of the maximum count as tied.
pub const DECISION_TIE_EPS: f64 = 1e-12;

/// Weight parameters for one mind. Row-major facilitation: `facilitation[g][a]`
/// links need `g` to action `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub facilitation: Vec<Vec<f64>>,
    pub priorities: Vec<f64>,
    pub need_valences: Vec<f64>,
    pub action_valences: Vec<f64>,
}

/// How the valence-modulated half of the activation net input picks its
/// weights. `Shared` reuses the activation link itself; `ValenceLinks`
/// draws the modulated term from the valence-channel links instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetInputMode {
    Shared,
    ValenceLinks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Per-step decay of every unclamped unit. Must sit in (0, 1).
    pub decay: f64,
    /// Starting activation and valence of non-special units.
    pub initial: f64,
    pub act_min: f64,
    pub act_max: f64,
    pub net_input: NetInputMode,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            decay: 0.05,
            initial: 0.01,
            act_min: -1.0,
            act_max: 1.0,
            net_input: NetInputMode::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettleParams {
    /// Convergence threshold on the largest absolute state change.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for SettleParams {
    fn default() -> Self {
        SettleParams {
            tolerance: 1e-4,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleReport {
    pub iterations: u32,
    pub converged: bool,
    /// Largest absolute change seen in the final iteration.
    pub max_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub tied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Need,
    Action,
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    pub id: usize,
    pub kind: UnitKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Activation,
    Valence,
}

/// Inspection view of one link. Symmetric links appear once, need side first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    pub channel: Channel,
    pub symmetric: bool,
}

/// Unit ids: needs are `0..needs`, actions `needs..needs+actions`, special
/// is the last id. State vectors cover all units including special.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceNetwork {
    needs: usize,
    actions: usize,
    weights: NetworkWeights,
    params: NetworkParams,
    activation: Vec<f64>,
    valence: Vec<f64>,
}

fn check_weight(what: &str, value: f64) -> Result<()> {
    if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange {
            what: what.to_string(),
            value,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Builds a mind with default parameters.
pub fn build_network(weights: NetworkWeights) -> Result<CoherenceNetwork> {
    build_network_with(weights, NetworkParams::default())
}

/// Builds a mind, validating dimensions and weight ranges. Non-special units
/// start at `params.initial`; the special unit starts pinned at 1.
pub fn build_network_with(
    weights: NetworkWeights,
    params: NetworkParams,
) -> Result<CoherenceNetwork> {
    let needs = weights.priorities.len();
    let actions = weights.action_valences.len();
    if needs == 0 || actions == 0 {
        return Err(Error::Invalid(
            "network needs at least one need and one action unit".into(),
        ));
    }
    if weights.facilitation.len() != needs {
        return Err(Error::Dimension {
            what: "facilitation rows",
            expected: needs,
            got: weights.facilitation.len(),
        });
    }
    for (g, row) in weights.facilitation.iter().enumerate() {
        if row.len() != actions {
            return Err(Error::Dimension {
                what: "facilitation columns",
                expected: actions,
                got: row.len(),
            });
        }
        for (a, &w) in row.iter().enumerate() {
            check_weight(&format!("facilitation[{g}][{a}]"), w)?;
        }
    }
    if weights.need_valences.len() != needs {
        return Err(Error::Dimension {
            what: "need_valences",
            expected: needs,
            got: weights.need_valences.len(),
        });
    }
    for (g, &w) in weights.priorities.iter().enumerate() {
        check_weight(&format!("priorities[{g}]"), w)?;
    }
    for (g, &w) in weights.need_valences.iter().enumerate() {
        check_weight(&format!("need_valences[{g}]"), w)?;
    }
    for (a, &w) in weights.action_valences.iter().enumerate() {
        check_weight(&format!("action_valences[{a}]"), w)?;
    }
    if !(params.decay > 0.0 && params.decay < 1.0) {
        return Err(Error::OutOfRange {
            what: "decay".into(),
            value: params.decay,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if params.act_min >= params.act_max {
        return Err(Error::Invalid(format!(
            "activation bounds inverted: min {} >= max {}",
            params.act_min, params.act_max
        )));
    }
    if !(params.act_min..=params.act_max).contains(&params.initial) {
        return Err(Error::OutOfRange {
            what: "initial state".into(),
            value: params.initial,
            lo: params.act_min,
            hi: params.act_max,
        });
    }

    let units = needs + actions + 1;
    let mut activation = vec![params.initial; units];
    let mut valence = vec![params.initial; units];
    activation[units - 1] = 1.0;
    valence[units - 1] = 1.0;
    Ok(CoherenceNetwork {
        needs,
        actions,
        weights,
        params,
        activation,
        valence,
    })
}

impl CoherenceNetwork {
    pub fn needs(&self) -> usize {
        self.needs
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn unit_count(&self) -> usize {
        self.needs + self.actions + 1
    }

    pub fn special(&self) -> usize {
        self.needs + self.actions
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn activation(&self, unit: usize) -> f64 {
        self.activation[unit]
    }

    pub fn valence(&self, unit: usize) -> f64 {
        self.valence[unit]
    }

    /// Settled activations of the action units, in action order.
    pub fn action_activations(&self) -> &[f64] {
        &self.activation[self.needs..self.needs + self.actions]
    }

    /// Current valence state of action `a` (the emotional connotation the
    /// agent would communicate).
    pub fn action_valence_state(&self, a: usize) -> f64 {
        self.valence[self.needs + a]
    }

    pub fn facilitation(&self, g: usize, a: usize) -> f64 {
        self.weights.facilitation[g][a]
    }

    pub fn set_facilitation(&mut self, g: usize, a: usize, w: f64) -> Result<()> {
        check_weight(&format!("facilitation[{g}][{a}]"), w)?;
        self.weights.facilitation[g][a] = w;
        Ok(())
    }

    pub fn priority(&self, g: usize) -> f64 {
        self.weights.priorities[g]
    }

    pub fn need_valence_link(&self, g: usize) -> f64 {
        self.weights.need_valences[g]
    }

    /// Weight of the special -> action valence link (the slot emotional
    /// contagion rewrites).
    pub fn action_valence_link(&self, a: usize) -> f64 {
        self.weights.action_valences[a]
    }

    pub fn set_action_valence_link(&mut self, a: usize, w: f64) -> Result<()> {
        check_weight(&format!("action_valences[{a}]"), w)?;
        self.weights.action_valences[a] = w;
        Ok(())
    }

    pub fn net_input_mode(&self) -> NetInputMode {
        self.params.net_input
    }

    /// Switching the mode changes future settles only; call sites re-settle.
    pub fn set_net_input_mode(&mut self, mode: NetInputMode) {
        self.params.net_input = mode;
    }

    pub fn units(&self) -> Vec<Unit> {
        let mut out = Vec::with_capacity(self.unit_count());
        for id in 0..self.needs {
            out.push(Unit {
                id,
                kind: UnitKind::Need,
            });
        }
        for id in self.needs..self.needs + self.actions {
            out.push(Unit {
                id,
                kind: UnitKind::Action,
            });
        }
        out.push(Unit {
            id: self.special(),
            kind: UnitKind::Special,
        });
        out
    }

    pub fn links(&self) -> Vec<Link> {
        let s = self.special();
        let mut out = Vec::new();
        for g in 0..self.needs {
            for a in 0..self.actions {
                out.push(Link {
                    from: g,
                    to: self.needs + a,
                    weight: self.weights.facilitation[g][a],
                    channel: Channel::Activation,
                    symmetric: true,
                });
            }
        }
        for g in 0..self.needs {
            out.push(Link {
                from: s,
                to: g,
                weight: self.weights.priorities[g],
                channel: Channel::Activation,
                symmetric: false,
            });
        }
        for g in 0..self.needs {
            out.push(Link {
                from: s,
                to: g,
                weight: self.weights.need_valences[g],
                channel: Channel::Valence,
                symmetric: false,
            });
        }
        for a in 0..self.actions {
            out.push(Link {
                from: s,
                to: self.needs + a,
                weight: self.weights.action_valences[a],
                channel: Channel::Valence,
                symmetric: false,
            });
        }
        out
    }

    /// Activation net input of unit `j`, current state. Two accumulators,
    /// sources in ascending unit id, summed last; callers rely on this order
    /// for reproducibility.
    fn net_activation(&self, j: usize) -> f64 {
        let s = self.special();
        let mut plain = 0.0;
        let mut modulated = 0.0;
        if j < self.needs {
            for a in 0..self.actions {
                let w = self.weights.facilitation[j][a];
                let src = self.needs + a;
                plain += w * self.activation[src];
                match self.params.net_input {
                    NetInputMode::Shared => {
                        modulated += w * self.valence[src] * self.activation[src]
                    }
                    NetInputMode::ValenceLinks => {}
                }
            }
            let p = self.weights.priorities[j];
            plain += p * self.activation[s];
            match self.params.net_input {
                NetInputMode::Shared => modulated += p * self.valence[s] * self.activation[s],
                NetInputMode::ValenceLinks => {
                    modulated +=
                        self.weights.need_valences[j] * self.valence[s] * self.activation[s]
                }
            }
        } else {
            let a = j - self.needs;
            for g in 0..self.needs {
                let w = self.weights.facilitation[g][a];
                plain += w * self.activation[g];
                match self.params.net_input {
                    NetInputMode::Shared => modulated += w * self.valence[g] * self.activation[g],
                    NetInputMode::ValenceLinks => {}
                }
            }
            if self.params.net_input == NetInputMode::ValenceLinks {
                modulated += self.weights.action_valences[a] * self.valence[s] * self.activation[s];
            }
        }
        plain + modulated
    }

    /// Valence net input of unit `j`: valence links only, all from special.
    fn net_valence(&self, j: usize) -> f64 {
        let s = self.special();
        let w = if j < self.needs {
            self.weights.need_valences[j]
        } else {
            self.weights.action_valences[j - self.needs]
        };
        w * self.valence[s] * self.activation[s]
    }
}

/// One-sided growth rule: positive net input pulls the state toward the
/// upper bound, non-positive toward the lower, both under decay.
fn step_state(x: f64, net: f64, decay: f64, lo: f64, hi: f64) -> f64 {
    let next = if net > 0.0 {
        x * (1.0 - decay) + net * (hi - x)
    } else {
        x * (1.0 - decay) + net * (x - lo)
    };
    next.clamp(lo, hi)
}

/// Synchronous settling. Runs until the largest per-iteration change in any
/// activation or valence falls below `tolerance`, or `max_iterations` is
/// reached. The special unit stays pinned at (1, 1). Errors if any state
/// turns non-finite, naming the first offending unit.
pub fn settle(net: &mut CoherenceNetwork, params: &SettleParams) -> Result<SettleReport> {
    assert!(params.tolerance > 0.0, "tolerance must be positive");
    let n = net.unit_count();
    let s = net.special();
    let d = net.params.decay;
    let (lo, hi) = (net.params.act_min, net.params.act_max);
    let mut next_a = vec![0.0; n];
    let mut next_v = vec![0.0; n];
    let mut max_delta = f64::INFINITY;
    for iter in 1..=params.max_iterations {
        max_delta = 0.0;
        for j in 0..n {
            if j == s {
                next_a[j] = net.activation[j];
                next_v[j] = net.valence[j];
                continue;
            }
            let na = step_state(net.activation[j], net.net_activation(j), d, lo, hi);
            let nv = step_state(net.valence[j], net.net_valence(j), d, lo, hi);
            if !na.is_finite() || !nv.is_finite() {
                return Err(Error::NonFinite { unit: j });
            }
            max_delta = max_delta
                .max((na - net.activation[j]).abs())
                .max((nv - net.valence[j]).abs());
            next_a[j] = na;
            next_v[j] = nv;
        }
        std::mem::swap(&mut net.activation, &mut next_a);
        std::mem::swap(&mut net.valence, &mut next_v);
        if max_delta < params.tolerance {
            return Ok(SettleReport {
                iterations: iter,
                converged: true,
                max_delta,
            });
        }
    }
    Ok(SettleReport {
        iterations: params.max_iterations,
        converged: false,
        max_delta,
    })
}

/// Picks the action with the highest settled activation. Actions within
/// `DECISION_TIE_EPS` of the maximum count as co-maximal; ties keep
/// `previous` when it is co-maximal and otherwise take the lowest index.
pub fn decide(net: &CoherenceNetwork, previous: Option<usize>) -> Decision {
    let acts = net.action_activations();
    let best = acts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut first_max = None;
    let mut count = 0usize;
    let mut previous_is_max = false;
    for (i, &a) in acts.iter().enumerate() {
        if best - a <= DECISION_TIE_EPS {
            count += 1;
            if first_max.is_none() {
                first_max = Some(i);
            }
            if previous == Some(i) {
                previous_is_max = true;
            }
        }
    }
    let tied = count > 1;
    let action = if tied && previous_is_max {
        previous.unwrap()
    } else {
        first_max.expect("network has at least one action")
    };
    Decision { action, tied }
}

// ---------------------------------------------------------------------------
// Text snapshot. Line-oriented, fixed order, round-trips states bit-exactly
// (shortest-roundtrip float formatting).

impl CoherenceNetwork {
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        out.push_str("coherence-network v1\n");
        out.push_str(&format!("needs {}\n", self.needs));
        out.push_str(&format!("actions {}\n", self.actions));
        out.push_str(&format!("decay {}\n", self.params.decay));
        out.push_str(&format!("initial {}\n", self.params.initial));
        out.push_str(&format!(
            "bounds {} {}\n",
            self.params.act_min, self.params.act_max
        ));
        let mode = match self.params.net_input {
            NetInputMode::Shared => "shared",
            NetInputMode::ValenceLinks => "valence-links",
        };
        out.push_str(&format!("net-input {}\n", mode));
        for g in 0..self.needs {
            for a in 0..self.actions {
                out.push_str(&format!(
                    "facilitation {} {} {}\n",
                    g, a, self.weights.facilitation[g][a]
                ));
            }
        }
        for g in 0..self.needs {
            out.push_str(&format!("priority {} {}\n", g, self.weights.priorities[g]));
        }
        for g in 0..self.needs {
            out.push_str(&format!(
                "need-valence {} {}\n",
                g, self.weights.need_valences[g]
            ));
        }
        for a in 0..self.actions {
            out.push_str(&format!(
                "action-valence {} {}\n",
                a, self.weights.action_valences[a]
            ));
        }
        for (u, &x) in self.activation.iter().enumerate() {
            out.push_str(&format!("activation {} {}\n", u, x));
        }
        for (u, &x) in self.valence.iter().enumerate() {
            out.push_str(&format!("valence {} {}\n", u, x));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<CoherenceNetwork> {
        fn bad(line_no: usize, line: &str) -> Error {
            Error::Invalid(format!("snapshot line {}: cannot parse '{}'", line_no, line))
        }
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "coherence-network v1")) => {}
            _ => return Err(Error::Invalid("snapshot missing header".into())),
        }

        let mut needs = None;
        let mut actions = None;
        let mut params = NetworkParams::default();
        let mut facilitation: Vec<Vec<f64>> = Vec::new();
        let mut priorities = Vec::new();
        let mut need_valences = Vec::new();
        let mut action_valences = Vec::new();
        let mut activation = Vec::new();
        let mut valence = Vec::new();

        for (no, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let f = |i: usize| -> Result<f64> {
                toks.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(no + 1, line))
            };
            let u = |i: usize| -> Result<usize> {
                toks.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(no + 1, line))
            };
            match toks[0] {
                "needs" => {
                    let n = u(1)?;
                    facilitation = vec![Vec::new(); n];
                    needs = Some(n);
                }
                "actions" => actions = Some(u(1)?),
                "decay" => params.decay = f(1)?,
                "initial" => params.initial = f(1)?,
                "bounds" => {
                    params.act_min = f(1)?;
                    params.act_max = f(2)?;
                }
                "net-input" => {
                    params.net_input = match toks.get(1) {
                        Some(&"shared") => NetInputMode::Shared,
                        Some(&"valence-links") => NetInputMode::ValenceLinks,
                        _ => return Err(bad(no + 1, line)),
                    }
                }
                "facilitation" => {
                    let g = u(1)?;
                    let a = u(2)?;
                    let row = facilitation
                        .get_mut(g)
                        .ok_or_else(|| bad(no + 1, line))?;
                    if row.len() != a {
                        return Err(Error::Invalid(format!(
                            "snapshot line {}: facilitation out of order",
                            no + 1
                        )));
                    }
                    row.push(f(3)?);
                }
                "priority" => priorities.push(f(2)?),
                "need-valence" => need_valences.push(f(2)?),
                "action-valence" => action_valences.push(f(2)?),
                "activation" => activation.push(f(2)?),
                "valence" => valence.push(f(2)?),
                other => {
                    return Err(Error::Invalid(format!(
                        "snapshot line {}: unknown directive '{}'",
                        no + 1,
                        other
                    )))
                }
            }
        }

        let needs = needs.ok_or_else(|| Error::Invalid("snapshot missing needs".into()))?;
        let actions = actions.ok_or_else(|| Error::Invalid("snapshot missing actions".into()))?;
        let mut net = build_network_with(
            NetworkWeights {
                facilitation,
                priorities,
                need_valences,
                action_valences,
            },
            params,
        )?;
        let units = needs + actions + 1;
        if activation.len() != units || valence.len() != units {
            return Err(Error::Dimension {
                what: "snapshot state vectors",
                expected: units,
                got: activation.len().min(valence.len()),
            });
        }
        net.activation = activation;
        net.valence = valence;
        Ok(net)
    }
}
