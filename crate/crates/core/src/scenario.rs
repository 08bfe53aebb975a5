//! Scenario engine: replicated runs of the full pipeline.
//!
//! One replicate builds a population and its social graph from seeds derived
//! off the scenario seed, then iterates steps. Each step first fires any
//! scheduled media event, then visits every agent once in a fresh random
//! order; a visited agent with neighbors talks to one uniformly chosen
//! neighbor. Exchanges apply sequentially, so later conversations in a step
//! see earlier outcomes. After the conversation round the step's modal
//! shares are tallied, overall and per mobility type.
//!
//! Randomness is split into four independent streams per replicate
//! (population, graph, conversations, media), so scenarios that share a seed
//! differ only where their mechanics differ. In particular a policy run
//! whose receptiveness is forced to zero leaves every mind untouched by
//! media and reproduces the reference run bit for bit.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::coherence::{decide, settle, NetInputMode, SettleParams};
use crate::error::{Error, Result};
use crate::influence::{
    apply_media, default_campaign, exchange, InfluenceTables, MediaCampaign, MediaRule,
    MediaTarget, PersuasionRule,
};
use crate::population::{
    default_profile_set, generate_population, load_population, load_profile_set, tally_shares,
    Agent, Group, PolicyImpact, Population, ProfileSet, ShareTally, DEFAULT_POPULATION_SIZE,
};
use crate::seeds;
use crate::socialnet::{build_graph, GraphConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Reference,
    ZeroEmissionZone,
    TaxExemption,
    PurchaseSubsidy,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Reference,
        ScenarioKind::ZeroEmissionZone,
        ScenarioKind::TaxExemption,
        ScenarioKind::PurchaseSubsidy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Reference => "reference",
            ScenarioKind::ZeroEmissionZone => "zero-emission-zone",
            ScenarioKind::TaxExemption => "tax-exemption",
            ScenarioKind::PurchaseSubsidy => "purchase-subsidy",
        }
    }

    pub fn parse(s: &str) -> Option<ScenarioKind> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

/// Where the agents come from. Generated populations are rebuilt per
/// replicate from a replicate-specific seed; a file is loaded once and every
/// replicate starts from the same copy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PopulationSource {
    Generate {
        #[serde(default = "default_size")]
        size: usize,
    },
    File {
        path: PathBuf,
    },
}

fn default_size() -> usize {
    DEFAULT_POPULATION_SIZE
}

impl Default for PopulationSource {
    fn default() -> Self {
        PopulationSource::Generate {
            size: DEFAULT_POPULATION_SIZE,
        }
    }
}

/// Partial campaign spec; anything absent keeps the scenario's shipped
/// campaign value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignOverride {
    pub reach: Option<f64>,
    pub schedule: Option<Vec<u32>>,
    pub targets: Option<Vec<MediaTarget>>,
}

/// Mechanism switches. Defaults are the studied configuration; the
/// alternates exist for sensitivity runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct EngineSettings {
    /// Reuse replicate 0's population and graph everywhere, so replicates
    /// differ only in conversation and media randomness.
    pub freeze_graph: bool,
    pub persuasion_rule: PersuasionRule,
    pub media_rule: MediaRule,
    pub net_input: NetInputMode,
    pub settle: SettleParams,
    pub graph: GraphConfig,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            freeze_graph: false,
            persuasion_rule: PersuasionRule::Directional,
            media_rule: MediaRule::Additive,
            net_input: NetInputMode::Shared,
            settle: SettleParams::default(),
            graph: GraphConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default = "default_steps")]
    pub steps: u32,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub population: PopulationSource,
    /// Generation recipe; None uses the built-in calibrated profiles.
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub campaign: Option<CampaignOverride>,
    #[serde(default)]
    pub tables: Option<InfluenceTables>,
    /// Forces every agent's receptiveness, for dose-response sweeps. Applied
    /// after generation so the rest of the draws stay untouched.
    #[serde(default)]
    pub mu_override: Option<f64>,
    #[serde(default)]
    pub settings: EngineSettings,
}

fn default_steps() -> u32 {
    100
}
fn default_replicates() -> u32 {
    10
}
fn default_seed() -> u64 {
    42
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            kind,
            steps: default_steps(),
            replicates: default_replicates(),
            seed: default_seed(),
            population: PopulationSource::default(),
            profiles: None,
            campaign: None,
            tables: None,
            mu_override: None,
            settings: EngineSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Invalid("scenario needs at least one step".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Invalid("scenario needs at least one replicate".into()));
        }
        if let PopulationSource::Generate { size } = self.population {
            if size == 0 {
                return Err(Error::Invalid("generated population cannot be empty".into()));
            }
        }
        if let Some(mu) = self.mu_override {
            if !mu.is_finite() || !(0.0..=1.0).contains(&mu) {
                return Err(Error::OutOfRange {
                    what: "receptiveness override".into(),
                    value: mu,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        let s = &self.settings.settle;
        if !(s.tolerance.is_finite() && s.tolerance > 0.0) || s.max_iterations == 0 {
            return Err(Error::Invalid("settle parameters must be positive".into()));
        }
        if let Some(t) = &self.tables {
            t.validate()?;
        }
        Ok(())
    }
}

pub fn load_scenario_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ScenarioConfig = toml::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// The scenario's campaign after filling defaults and applying overrides.
/// Reference runs have none and reject overrides.
pub fn effective_campaign(cfg: &ScenarioConfig) -> Result<Option<MediaCampaign>> {
    match (&cfg.campaign, default_campaign(cfg.kind)) {
        (None, base) => Ok(base),
        (Some(_), None) => Err(Error::Invalid(
            "reference scenario cannot carry a campaign".into(),
        )),
        (Some(over), Some(mut c)) => {
            if let Some(r) = over.reach {
                c.reach = r;
            }
            if let Some(s) = &over.schedule {
                c.schedule = s.clone();
            }
            if let Some(t) = &over.targets {
                c.targets = t.clone();
            }
            Ok(Some(c))
        }
    }
}

/// Everything resolved once per scenario and shared across replicates.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub profiles: Option<ProfileSet>,
    pub base: Option<Population>,
    pub campaign: Option<MediaCampaign>,
    pub tables: InfluenceTables,
    pub action_labels: Vec<String>,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (profiles, base) = match &cfg.population {
        PopulationSource::Generate { .. } => {
            let set = match &cfg.profiles {
                Some(path) => load_profile_set(path)?,
                None => default_profile_set(),
            };
            (Some(set), None)
        }
        PopulationSource::File { path } => (None, Some(load_population(path)?)),
    };
    let (needs, actions, action_labels) = match (&profiles, &base) {
        (Some(s), _) => (
            s.need_labels.len(),
            s.action_labels.len(),
            s.action_labels.clone(),
        ),
        (_, Some(p)) => (p.n_needs(), p.n_actions(), p.action_labels.clone()),
        _ => unreachable!("one source is always resolved"),
    };
    let campaign = effective_campaign(cfg)?;
    if let Some(c) = &campaign {
        c.validate(needs, actions)?;
        if let Some(&late) = c.schedule.iter().find(|&&s| s >= cfg.steps) {
            log::warn!(
                "media event at step {late} never fires in a {}-step run",
                cfg.steps
            );
        }
    }
    let tables = cfg.tables.clone().unwrap_or_default();
    tables.validate()?;
    Ok(Prepared {
        profiles,
        base,
        campaign,
        tables,
        action_labels,
    })
}

fn override_mu(pop: &mut Population, mu: f64) {
    for a in &mut pop.agents {
        a.policy_impact = PolicyImpact {
            zero_emission_zone: mu,
            tax_exemption: mu,
            purchase_subsidy: mu,
        };
    }
}

/// The population a given replicate starts from, with the receptiveness
/// override and net-input switch applied. Pure in (config, replicate).
pub fn replicate_population(
    cfg: &ScenarioConfig,
    prepared: &Prepared,
    replicate: u32,
) -> Result<Population> {
    let world = if cfg.settings.freeze_graph { 0 } else { replicate };
    let mut pop = match (&cfg.population, &prepared.base, &prepared.profiles) {
        (PopulationSource::File { .. }, Some(base), _) => base.clone(),
        (PopulationSource::Generate { size }, _, Some(set)) => {
            let pop_seed = seeds::derive(cfg.seed, seeds::POPULATION, world as u64);
            generate_population(set, *size, pop_seed)?
        }
        _ => unreachable!("prepare resolved the source"),
    };
    if let Some(mu) = cfg.mu_override {
        override_mu(&mut pop, mu);
    }
    for a in &mut pop.agents {
        if a.mind.net_input_mode() != cfg.settings.net_input {
            a.mind.set_net_input_mode(cfg.settings.net_input);
            settle(&mut a.mind, &cfg.settings.settle)?;
            a.preference = decide(&a.mind, Some(a.preference)).action;
        }
    }
    Ok(pop)
}

/// Fisher-Yates over 0..n; one draw per position except the last.
fn permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for t in 0..n.saturating_sub(1) {
        let r = rng.gen_range(t..n);
        idx.swap(t, r);
    }
    idx
}

fn split_pair(agents: &mut [Agent], i: usize, j: usize) -> (&mut Agent, &mut Agent) {
    debug_assert_ne!(i, j);
    if i < j {
        let (lo, hi) = agents.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = agents.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

/// Shares after one step, overall tally first, then the four types.
#[derive(Debug, Clone, PartialEq)]
pub struct StepShares {
    pub step: u32,
    pub tallies: Vec<ShareTally>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSeries {
    pub replicate: u32,
    pub steps: Vec<StepShares>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub kind: ScenarioKind,
    pub action_labels: Vec<String>,
    pub series: Vec<ReplicateSeries>,
}

/// Runs one replicate start to finish. Steps are recorded 1..=steps; a media
/// event scheduled at step s fires at the start of recorded step s + 1, so a
/// step-0 event precedes the first conversation round. Within a step, agents
/// without neighbors are visited but draw nothing.
pub fn run_replicate(
    cfg: &ScenarioConfig,
    prepared: &Prepared,
    replicate: u32,
) -> Result<ReplicateSeries> {
    let world = if cfg.settings.freeze_graph { 0 } else { replicate };
    let mut pop = replicate_population(cfg, prepared, replicate)?;
    let graph_seed = seeds::derive(cfg.seed, seeds::GRAPH, world as u64);
    let graph = build_graph(&pop, &cfg.settings.graph, graph_seed)?;
    let mut comm = seeds::stream(cfg.seed, seeds::COMMUNICATION, replicate as u64);
    let media_rep = seeds::derive(cfg.seed, seeds::MEDIA, replicate as u64);

    let n = pop.len();
    let mut steps = Vec::with_capacity(cfg.steps as usize);
    for t in 1..=cfg.steps {
        if let Some(c) = &prepared.campaign {
            if let Some(event) = c.schedule.iter().position(|&s| s + 1 == t) {
                let event_seed = seeds::derive(media_rep, seeds::MEDIA, event as u64);
                apply_media(
                    &mut pop,
                    c,
                    cfg.settings.media_rule,
                    &cfg.settings.settle,
                    event_seed,
                )?;
            }
        }
        for &i in &permutation(&mut comm, n) {
            let deg = graph.degree(i)?;
            if deg == 0 {
                continue;
            }
            let j = graph.neighbors(i)?[comm.gen_range(0..deg)];
            let (a, b) = split_pair(&mut pop.agents, i, j);
            exchange(
                a,
                b,
                &prepared.tables,
                cfg.settings.persuasion_rule,
                &cfg.settings.settle,
            )?;
        }
        let mut tallies = tally_shares(&pop, false);
        tallies.extend(tally_shares(&pop, true));
        steps.push(StepShares { step: t, tallies });
    }
    Ok(ReplicateSeries { replicate, steps })
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let prepared = prepare(cfg)?;
    let mut series = Vec::with_capacity(cfg.replicates as usize);
    for r in 0..cfg.replicates {
        series.push(run_replicate(cfg, &prepared, r)?);
    }
    Ok(ScenarioRun {
        kind: cfg.kind,
        action_labels: prepared.action_labels,
        series,
    })
}

// ---------------------------------------------------------------------------
// Flat records and CSV.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub replicate: u32,
    pub step: u32,
    pub group: String,
    pub mode: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShareRecord {
    pub step: u32,
    pub group: String,
    pub mode: String,
    pub mean_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub mu: String,
    pub replicate: u32,
    pub ev_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub step: u32,
    pub group: String,
    pub scenario: String,
    pub ev_delta_pp: f64,
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(std::io::Error::from)?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// One row per replicate, step, non-empty group, and mode.
pub fn share_records(run: &ScenarioRun) -> Vec<ShareRecord> {
    let mut out = Vec::new();
    for rep in &run.series {
        for step in &rep.steps {
            for t in &step.tallies {
                if t.empty {
                    continue;
                }
                for (k, label) in run.action_labels.iter().enumerate() {
                    out.push(ShareRecord {
                        replicate: rep.replicate,
                        step: step.step,
                        group: t.group.label(),
                        mode: label.clone(),
                        share: t.shares[k],
                    });
                }
            }
        }
    }
    out
}

/// Shares averaged over the replicates in which the group is non-empty.
pub fn mean_records(run: &ScenarioRun) -> Vec<MeanShareRecord> {
    let mut out = Vec::new();
    let Some(first) = run.series.first() else {
        return out;
    };
    let group_order: Vec<Group> = std::iter::once(Group::All)
        .chain((1..=4).map(Group::Type))
        .collect();
    for s in 0..first.steps.len() {
        let step = first.steps[s].step;
        for group in &group_order {
            let mut acc = vec![0.0; run.action_labels.len()];
            let mut count = 0usize;
            for rep in &run.series {
                if let Some(t) = rep.steps[s]
                    .tallies
                    .iter()
                    .find(|t| t.group == *group && !t.empty)
                {
                    for (k, v) in t.shares.iter().enumerate() {
                        acc[k] += v;
                    }
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            for (k, label) in run.action_labels.iter().enumerate() {
                out.push(MeanShareRecord {
                    step,
                    group: group.label(),
                    mode: label.clone(),
                    mean_share: acc[k] / count as f64,
                });
            }
        }
    }
    out
}

pub fn action_index(labels: &[String], label: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::Invalid(format!("action {label:?} not among {labels:?}")))
}

/// One sweep point: either the generated receptiveness draws or a forced
/// uniform value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSetting {
    Empirical,
    Fixed(f64),
}

impl MuSetting {
    pub fn label(&self) -> String {
        match self {
            MuSetting::Empirical => "empirical".into(),
            MuSetting::Fixed(x) => format!("{x}"),
        }
    }

    pub fn parse(s: &str) -> Result<MuSetting> {
        if s == "empirical" {
            return Ok(MuSetting::Empirical);
        }
        let x: f64 = s
            .parse()
            .map_err(|_| Error::Invalid(format!("receptiveness {s:?} is neither a number nor \"empirical\"")))?;
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange {
                what: "receptiveness setting".into(),
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(MuSetting::Fixed(x))
    }

    /// The scenario config this sweep point runs.
    pub fn apply(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut c = cfg.clone();
        c.mu_override = match self {
            MuSetting::Empirical => None,
            MuSetting::Fixed(x) => Some(*x),
        };
        c
    }
}

/// Final-step overall shares of `ev_label`, one row per replicate.
pub fn sweep_rows(label: &str, run: &ScenarioRun, ev_label: &str) -> Result<Vec<SweepRecord>> {
    let ev = action_index(&run.action_labels, ev_label)?;
    run.series
        .iter()
        .map(|rep| {
            let last = rep
                .steps
                .last()
                .ok_or_else(|| Error::Invalid("run recorded no steps".into()))?;
            let overall = last
                .tallies
                .iter()
                .find(|t| t.group == Group::All)
                .ok_or_else(|| Error::Invalid("overall tally missing".into()))?;
            Ok(SweepRecord {
                mu: label.to_string(),
                replicate: rep.replicate,
                ev_share: overall.shares[ev],
            })
        })
        .collect()
}

/// Reruns the scenario once per setting with identical seeds and records the
/// final-step overall share of `ev_label` for every replicate.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    settings: &[MuSetting],
    ev_label: &str,
) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    for setting in settings {
        let run = run_scenario(&setting.apply(cfg))?;
        out.extend(sweep_rows(&setting.label(), &run, ev_label)?);
    }
    Ok(out)
}

/// Per-step gap in the chosen mode's mean share against the first result
/// set, in percentage points.
pub fn compare_runs(
    runs: &[(String, Vec<MeanShareRecord>)],
    ev_label: &str,
) -> Result<Vec<CompareRecord>> {
    if runs.len() < 2 {
        return Err(Error::Invalid(
            "comparison needs a baseline and at least one other result set".into(),
        ));
    }
    let (base_name, base) = &runs[0];
    let mut baseline: HashMap<(u32, &str), f64> = HashMap::new();
    for r in base.iter().filter(|r| r.mode == ev_label) {
        baseline.insert((r.step, r.group.as_str()), r.mean_share);
    }
    if baseline.is_empty() {
        return Err(Error::Invalid(format!(
            "mode {ev_label:?} absent from baseline {base_name:?}"
        )));
    }
    let mut out = Vec::new();
    for (name, records) in &runs[1..] {
        for r in records.iter().filter(|r| r.mode == ev_label) {
            let b = baseline
                .get(&(r.step, r.group.as_str()))
                .ok_or_else(|| {
                    Error::Invalid(format!(
                        "baseline {base_name:?} lacks step {} group {}",
                        r.step, r.group
                    ))
                })?;
            out.push(CompareRecord {
                step: r.step,
                group: r.group.clone(),
                scenario: name.clone(),
                ev_delta_pp: (r.mean_share - b) * 100.0,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(kind: ScenarioKind) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(kind);
        cfg.population = PopulationSource::Generate { size: 40 };
        cfg.steps = 4;
        cfg.replicates = 2;
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn minimal_toml_fills_defaults() {
        let cfg: ScenarioConfig = toml::from_str("kind = \"reference\"").unwrap();
        assert_eq!(cfg.kind, ScenarioKind::Reference);
        assert_eq!(cfg.steps, 100);
        assert_eq!(cfg.replicates, 10);
        assert_eq!(cfg.seed, 42);
        assert_eq!(
            cfg.population,
            PopulationSource::Generate {
                size: DEFAULT_POPULATION_SIZE
            }
        );
        assert!(cfg.campaign.is_none());
        assert_eq!(cfg.settings, EngineSettings::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ScenarioConfig>("kind = \"reference\"\nstepz = 3").is_err());
        assert!(toml::from_str::<ScenarioConfig>(
            "kind = \"reference\"\n[settings]\nfreeze = true"
        )
        .is_err());
    }

    #[test]
    fn full_toml_parses() {
        let text = r#"
kind = "tax-exemption"
steps = 20
replicates = 3
seed = 99
mu-override = 0.5

[population]
source = "generate"
size = 120

[campaign]
reach = 0.5
schedule = [0, 5, 10]

[settings]
freeze-graph = true
persuasion-rule = "literal"
media-rule = "multiplicative"
net-input = "valence-links"

[settings.settle]
tolerance = 1e-5
max_iterations = 300

[settings.graph]
radius_scale = 0.8
"#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mu_override, Some(0.5));
        assert!(cfg.settings.freeze_graph);
        assert_eq!(cfg.settings.persuasion_rule, PersuasionRule::Literal);
        let c = effective_campaign(&cfg).unwrap().unwrap();
        assert_eq!(c.reach, 0.5);
        assert_eq!(c.schedule, vec![0, 5, 10]);
        // Targets kept from the shipped campaign.
        assert_eq!(c.targets.len(), 1);
    }

    #[test]
    fn kind_labels_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(ScenarioKind::parse(k.label()), Some(k));
        }
        assert_eq!(ScenarioKind::parse("nonsense"), None);
    }

    #[test]
    fn reference_rejects_campaign_override() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Reference);
        cfg.campaign = Some(CampaignOverride::default());
        assert!(effective_campaign(&cfg).is_err());
    }

    #[test]
    fn policy_scenarios_get_shipped_campaigns() {
        for kind in [
            ScenarioKind::ZeroEmissionZone,
            ScenarioKind::TaxExemption,
            ScenarioKind::PurchaseSubsidy,
        ] {
            let cfg = ScenarioConfig::new(kind);
            let c = effective_campaign(&cfg).unwrap().unwrap();
            assert_eq!(c.kind, kind);
            assert_eq!(c.reach, 0.7);
            assert_eq!(c.schedule.len(), 10);
            assert_eq!(c.schedule[0], 0);
            assert_eq!(c.schedule[9], 90);
        }
        assert!(effective_campaign(&ScenarioConfig::new(ScenarioKind::Reference))
            .unwrap()
            .is_none());
    }

    #[test]
    fn permutation_visits_everyone_once() {
        let mut rng = seeds::stream(3, 0x7065, 0);
        let p = permutation(&mut rng, 17);
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..17).collect::<Vec<_>>());
        let mut rng2 = seeds::stream(3, 0x7065, 0);
        assert_eq!(permutation(&mut rng2, 17), p);
    }

    #[test]
    fn small_run_has_expected_shape_and_conserves_shares() {
        let run = run_scenario(&small_cfg(ScenarioKind::Reference)).unwrap();
        assert_eq!(run.series.len(), 2);
        for (r, rep) in run.series.iter().enumerate() {
            assert_eq!(rep.replicate, r as u32);
            assert_eq!(rep.steps.len(), 4);
            for (s, step) in rep.steps.iter().enumerate() {
                assert_eq!(step.step, s as u32 + 1);
                assert_eq!(step.tallies[0].group, Group::All);
                assert!(!step.tallies[0].empty);
                for t in &step.tallies {
                    if t.empty {
                        continue;
                    }
                    let sum: f64 = t.shares.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-9, "group {} sums {sum}", t.group.label());
                    assert!(t.shares.iter().all(|&x| (0.0..=1.0).contains(&x)));
                }
            }
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let cfg = small_cfg(ScenarioKind::ZeroEmissionZone);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_receptiveness_policy_reproduces_reference() {
        let reference = run_scenario(&small_cfg(ScenarioKind::Reference)).unwrap();
        let mut muted = small_cfg(ScenarioKind::TaxExemption);
        muted.mu_override = Some(0.0);
        let muted = run_scenario(&muted).unwrap();
        assert_eq!(reference.series, muted.series);
    }

    #[test]
    fn empirical_policy_differs_from_reference() {
        let reference = run_scenario(&small_cfg(ScenarioKind::Reference)).unwrap();
        let policy = run_scenario(&small_cfg(ScenarioKind::ZeroEmissionZone)).unwrap();
        assert_ne!(reference.series, policy.series);
    }

    #[test]
    fn frozen_world_reuses_population_across_replicates() {
        let mut cfg = small_cfg(ScenarioKind::Reference);
        cfg.settings.freeze_graph = true;
        let prepared = prepare(&cfg).unwrap();
        let p0 = replicate_population(&cfg, &prepared, 0).unwrap();
        let p1 = replicate_population(&cfg, &prepared, 1).unwrap();
        assert_eq!(p0, p1);

        cfg.settings.freeze_graph = false;
        let q0 = replicate_population(&cfg, &prepared, 0).unwrap();
        let q1 = replicate_population(&cfg, &prepared, 1).unwrap();
        assert_eq!(p0, q0);
        assert_ne!(q0, q1);
    }

    #[test]
    fn sweep_records_final_shares_per_setting() {
        let cfg = small_cfg(ScenarioKind::TaxExemption);
        let records = run_sweep(
            &cfg,
            &[MuSetting::Fixed(0.0), MuSetting::Fixed(1.0), MuSetting::Empirical],
            "EV",
        )
        .unwrap();
        assert_eq!(records.len(), 6);
        assert!(records.iter().take(2).all(|r| r.mu == "0"));
        assert!(records.iter().skip(4).all(|r| r.mu == "empirical"));
        for r in &records {
            assert!((0.0..=1.0).contains(&r.ev_share));
        }
        // The zero setting matches a plain reference run.
        let reference = run_scenario(&small_cfg(ScenarioKind::TaxExemption).tap_reference()).unwrap();
        let ev = action_index(&reference.action_labels, "EV").unwrap();
        for (rep, rec) in reference.series.iter().zip(&records[..2]) {
            let last = rep.steps.last().unwrap();
            assert_eq!(last.tallies[0].shares[ev], rec.ev_share);
        }
    }

    // Helper to flip a config to the reference scenario keeping all else.
    trait TapReference {
        fn tap_reference(self) -> ScenarioConfig;
    }
    impl TapReference for ScenarioConfig {
        fn tap_reference(mut self) -> ScenarioConfig {
            self.kind = ScenarioKind::Reference;
            self.campaign = None;
            self
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = vec![
            ShareRecord {
                replicate: 0,
                step: 1,
                group: "all".into(),
                mode: "EV".into(),
                share: 0.123456789012345,
            },
            ShareRecord {
                replicate: 1,
                step: 2,
                group: "type3".into(),
                mode: "public transport".into(),
                share: 1.0 / 3.0,
            },
        ];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("replicate,step,group,mode,share\n"));
        let back: Vec<ShareRecord> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn mean_records_average_over_replicates() {
        let run = run_scenario(&small_cfg(ScenarioKind::Reference)).unwrap();
        let means = mean_records(&run);
        // Overall group at step 1, first mode: mean of the two replicates.
        let label = &run.action_labels[0];
        let want = (run.series[0].steps[0].tallies[0].shares[0]
            + run.series[1].steps[0].tallies[0].shares[0])
            / 2.0;
        let got = means
            .iter()
            .find(|m| m.step == 1 && m.group == "all" && &m.mode == label)
            .unwrap();
        assert_eq!(got.mean_share, want);
        // Ordering: step ascending, overall group first.
        assert_eq!(means[0].step, 1);
        assert_eq!(means[0].group, "all");
    }

    #[test]
    fn share_records_skip_empty_groups() {
        let run = run_scenario(&small_cfg(ScenarioKind::Reference)).unwrap();
        let records = share_records(&run);
        let n_modes = run.action_labels.len();
        // 40 agents cover all four types, so every step yields 5 groups.
        assert_eq!(records.len(), 2 * 4 * 5 * n_modes);
        assert!(records.iter().all(|r| !r.group.is_empty()));
    }

    #[test]
    fn compare_reports_gaps_against_baseline() {
        let base = vec![
            MeanShareRecord { step: 1, group: "all".into(), mode: "EV".into(), mean_share: 0.10 },
            MeanShareRecord { step: 2, group: "all".into(), mode: "EV".into(), mean_share: 0.12 },
            MeanShareRecord { step: 1, group: "all".into(), mode: "ICE car".into(), mean_share: 0.90 },
        ];
        let policy = vec![
            MeanShareRecord { step: 1, group: "all".into(), mode: "EV".into(), mean_share: 0.16 },
            MeanShareRecord { step: 2, group: "all".into(), mode: "EV".into(), mean_share: 0.20 },
        ];
        let out = compare_runs(
            &[("reference".into(), base.clone()), ("zez".into(), policy)],
            "EV",
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].ev_delta_pp - 6.0).abs() < 1e-9);
        assert!((out[1].ev_delta_pp - 8.0).abs() < 1e-9);
        assert_eq!(out[0].scenario, "zez");

        assert!(compare_runs(&[("only".into(), base)], "EV").is_err());
    }

    /// Scratch probe: full-size reference replicate, timing and drift.
    #[test]
    #[ignore]
    fn probe_full_scale_reference() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Reference);
        cfg.replicates = 1;
        let prepared = prepare(&cfg).unwrap();
        let start = std::time::Instant::now();
        let rep = run_replicate(&cfg, &prepared, 0).unwrap();
        println!("one replicate: {:?}", start.elapsed());
        let first = &rep.steps[0];
        let last = rep.steps.last().unwrap();
        for (a, b) in first.tallies.iter().zip(&last.tallies) {
            if a.empty {
                continue;
            }
            let drift: Vec<f64> = a
                .shares
                .iter()
                .zip(&b.shares)
                .map(|(x, y)| (y - x) * 100.0)
                .collect();
            println!("{}: t1 {:?}", a.group.label(), a.shares);
            println!("{}: drift pp {:?}", a.group.label(), drift);
        }
    }

    /// Scratch probe: policy effect direction and receptiveness response at
    /// full size, few replicates.
    #[test]
    #[ignore]
    fn probe_policy_effects() {
        let ev = |cfg: &ScenarioConfig| {
            let run = run_scenario(cfg).unwrap();
            let ev = action_index(&run.action_labels, "EV").unwrap();
            let mut mean = 0.0;
            for rep in &run.series {
                mean += rep.steps.last().unwrap().tallies[0].shares[ev];
            }
            mean / run.series.len() as f64
        };
        let mut cfg = ScenarioConfig::new(ScenarioKind::Reference);
        cfg.replicates = 3;
        println!("reference EV t100: {:.4}", ev(&cfg));
        for kind in [
            ScenarioKind::ZeroEmissionZone,
            ScenarioKind::TaxExemption,
            ScenarioKind::PurchaseSubsidy,
        ] {
            let mut c = ScenarioConfig::new(kind);
            c.replicates = 3;
            println!("{} EV t100: {:.4}", kind.label(), ev(&c));
        }
        for mu in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mut c = ScenarioConfig::new(ScenarioKind::PurchaseSubsidy);
            c.replicates = 3;
            c.mu_override = Some(mu);
            println!("subsidy mu={mu}: EV t100 {:.4}", ev(&c));
        }
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Reference);
        cfg.steps = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(ScenarioKind::Reference);
        cfg.mu_override = Some(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(ScenarioKind::Reference);
        cfg.settings.settle.tolerance = 0.0;
        assert!(cfg.validate().is_err());
    }
}
