//! Agent-based simulation of transport mode preferences.
//!
//! Agents carry a small constraint-satisfaction network ("mind") that maps
//! mobility needs to transport modes. Settling the network yields a mode
//! preference. Agents talk to similar agents over a spatial homophily graph
//! and exchange persuasive messages; scheduled media campaigns push selected
//! need-mode links. The scenario engine runs replicated simulations and
//! reports modal share trajectories as CSV.
//!
//! Everything is deterministic given a master seed: RNG streams are derived
//! per purpose and replicate in `seeds`, and no code path iterates unordered
//! containers where order feeds randomness or output.

pub mod coherence;
pub mod error;
pub mod influence;
pub mod population;
pub mod scenario;
pub mod seeds;
pub mod socialnet;

pub use coherence::{
    build_network, build_network_with, decide, settle, CoherenceNetwork, Decision, NetInputMode,
    NetworkParams, NetworkWeights, SettleParams, SettleReport,
};
pub use error::{Error, Result};
pub use influence::{
    apply_contagion, apply_means_ends, apply_media, compose_message, default_campaign, exchange,
    lookup_alpha, lookup_pi, InfluenceTables, MediaCampaign, MediaRule, MediaTarget, Message,
    PersuasionRule,
};
pub use population::{
    calibrate_profiles, default_profile_set, generate_population, initial_profile_set,
    load_population, load_profile_set, save_population, save_profile_set, tally_shares, Agent,
    CalibrationBudget, CalibrationOutcome, CalibrationReport, Demographics, Group, MuParams,
    PolicyImpact, PolicyMu, Population, ProfileSet, ShareTally, TypeProfile, WeightDistributions,
};
pub use scenario::{
    action_index, compare_runs, effective_campaign, load_scenario_config, mean_records, prepare,
    read_csv, replicate_population, run_replicate, run_scenario, run_sweep, share_records,
    sweep_rows, write_csv, CampaignOverride, CompareRecord, EngineSettings, MeanShareRecord, MuSetting,
    PopulationSource, Prepared, ReplicateSeries, ScenarioConfig, ScenarioKind, ScenarioRun,
    ShareRecord, StepShares, SweepRecord,
};
pub use socialnet::{
    build_graph, similarity, tie_weight, GraphConfig, NormScope, ReachRule, SimilaritySpace,
    SocialGraph,
};
