//! Session configuration and its text form.
//!
//! The text form is TOML with fixed sections; unknown keys are an error.
//! Angles are degrees in the document and radians everywhere else.
//!
//! ```toml
//! seed = 42
//!
//! [protocol]
//! states = "fair"          # "bb84" | "fair" | "custom" (then phi_deg is required)
//!
//! [profile]
//! alice = "honest"         # honest | cheating | attenuated-honest
//! bob = "cheating"         # honest | cheating | selective-abort | multiphoton
//! unhappy = "mismatch"     # what a cheating Bob does when he missed: mismatch | accept
//! abort_theta_deg = 18.43  # selective-abort only
//! abort_accept = [0]       # selective-abort only
//!
//! [source]
//! kind = "single-photon"   # single-photon | entangled-pair | attenuated-pulse
//! mu = 0.05
//! visibility = 0.96
//!
//! [channel]
//! eta = 1.0
//!
//! [stop]
//! policy = "fixed-count"   # fixed-count | threshold | sprt
//! count = 80000
//! ```

use serde::{Deserialize, Serialize};

use crate::analysis::{predict, SequentialTest, TestKind};
use crate::error::{Error, Result};
use crate::quantum::{ProtocolStateSet, StateAngle};
use crate::source::{SourceKind, SourceModel};
use crate::strategies::{AcceptRule, AliceProfile, BobProfile, StrategyProfile, UnhappyAction};

pub const BB84_PHI: f64 = std::f64::consts::FRAC_PI_4;

pub fn fair_phi() -> f64 {
    0.8f64.acos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatesPreset {
    Bb84,
    Fair,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default = "default_states")]
    pub states: StatesPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<f64>,
}

fn default_states() -> StatesPreset {
    StatesPreset::Bb84
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            states: StatesPreset::Bb84,
            phi_deg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BobKind {
    Honest,
    Cheating,
    SelectiveAbort,
    Multiphoton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    #[serde(default = "default_alice")]
    pub alice: AliceProfile,
    #[serde(default = "default_bob")]
    pub bob: BobKind,
    #[serde(default)]
    pub unhappy: UnhappyAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_theta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_accept: Option<Vec<u8>>,
}

fn default_alice() -> AliceProfile {
    AliceProfile::Honest
}

fn default_bob() -> BobKind {
    BobKind::Honest
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            alice: AliceProfile::Honest,
            bob: BobKind::Honest,
            unhappy: UnhappyAction::Mismatch,
            abort_theta_deg: None,
            abort_accept: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default = "default_kind")]
    pub kind: SourceKind,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "one")]
    pub visibility: f64,
}

fn default_kind() -> SourceKind {
    SourceKind::SinglePhoton
}

fn default_mu() -> f64 {
    0.05
}

fn one() -> f64 {
    1.0
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            kind: SourceKind::SinglePhoton,
            mu: default_mu(),
            visibility: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "one")]
    pub eta: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { eta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    FixedCount,
    Threshold,
    Sprt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_flips: Option<u64>,
}

fn default_policy() -> PolicyKind {
    PolicyKind::FixedCount
}

impl Default for StopSection {
    fn default() -> Self {
        StopSection {
            policy: PolicyKind::FixedCount,
            count: None,
            tau: None,
            min_samples: None,
            p0: None,
            p1: None,
            alpha: None,
            beta: None,
            max_flips: None,
        }
    }
}

/// The on-disk / on-wire session document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub stop: StopSection,
}

impl ConfigDocument {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config document serializes")
    }
}

/// Default cap for open-ended stopping policies.
pub const DEFAULT_MAX_FLIPS: u64 = 1_000_000;
pub const DEFAULT_SPRT_ERROR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopPolicy {
    FixedCount {
        n: u64,
    },
    Threshold {
        tau: f64,
        min_samples: u64,
        max_flips: u64,
    },
    Sprt {
        p0: Option<f64>,
        p1: Option<f64>,
        alpha: f64,
        beta: f64,
        max_flips: u64,
    },
}

/// A validated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub phi: f64,
    pub profile: StrategyProfile,
    pub source: SourceModel,
    pub eta: f64,
    pub seed: u64,
    pub stop: StopPolicy,
    document: ConfigDocument,
}

impl SessionConfig {
    pub fn from_document(document: ConfigDocument) -> Result<Self> {
        let seed = document
            .seed
            .ok_or_else(|| Error::Config("seed is required".into()))?;
        if seed > i64::MAX as u64 {
            return Err(Error::Config("seed must fit in 63 bits".into()));
        }
        let phi = match document.protocol.states {
            StatesPreset::Bb84 => BB84_PHI,
            StatesPreset::Fair => fair_phi(),
            StatesPreset::Custom => document
                .protocol
                .phi_deg
                .ok_or_else(|| Error::Config("custom states need phi_deg".into()))?
                .to_radians(),
        };
        if document.protocol.states != StatesPreset::Custom && document.protocol.phi_deg.is_some() {
            return Err(Error::Config(
                "phi_deg is only allowed with states = \"custom\"".into(),
            ));
        }
        let p = &document.profile;
        let abort_only = p.abort_theta_deg.is_some() || p.abort_accept.is_some();
        let bob = match p.bob {
            BobKind::Honest => BobProfile::Honest,
            BobKind::Cheating => BobProfile::Cheating,
            BobKind::Multiphoton => BobProfile::Multiphoton,
            BobKind::SelectiveAbort => {
                let theta = p
                    .abort_theta_deg
                    .ok_or_else(|| Error::Config("selective-abort needs abort_theta_deg".into()))?;
                let accept = p.abort_accept.clone().unwrap_or_else(|| vec![0, 1]);
                BobProfile::SelectiveAbort {
                    theta: StateAngle::from_degrees(theta)?,
                    accept: AcceptRule::from_outcomes(&accept)?,
                }
            }
        };
        if abort_only && p.bob != BobKind::SelectiveAbort {
            return Err(Error::Config(
                "abort_* keys need bob = \"selective-abort\"".into(),
            ));
        }
        let profile = StrategyProfile {
            alice: p.alice,
            bob,
            unhappy: p.unhappy,
        };
        let s = &document.stop;
        let max_flips = s.max_flips.unwrap_or(DEFAULT_MAX_FLIPS);
        let stop = match s.policy {
            PolicyKind::FixedCount => StopPolicy::FixedCount {
                n: s.count
                    .ok_or_else(|| Error::Config("fixed-count needs count".into()))?,
            },
            PolicyKind::Threshold => StopPolicy::Threshold {
                tau: s
                    .tau
                    .ok_or_else(|| Error::Config("threshold needs tau".into()))?,
                min_samples: s.min_samples.unwrap_or(1000),
                max_flips,
            },
            PolicyKind::Sprt => StopPolicy::Sprt {
                p0: s.p0,
                p1: s.p1,
                alpha: s.alpha.unwrap_or(DEFAULT_SPRT_ERROR),
                beta: s.beta.unwrap_or(DEFAULT_SPRT_ERROR),
                max_flips,
            },
        };
        let wrong_keys = match s.policy {
            PolicyKind::FixedCount => {
                s.tau.is_some()
                    || s.min_samples.is_some()
                    || s.p0.is_some()
                    || s.p1.is_some()
                    || s.alpha.is_some()
                    || s.beta.is_some()
                    || s.max_flips.is_some()
            }
            PolicyKind::Threshold => {
                s.count.is_some()
                    || s.p0.is_some()
                    || s.p1.is_some()
                    || s.alpha.is_some()
                    || s.beta.is_some()
            }
            PolicyKind::Sprt => s.count.is_some() || s.tau.is_some() || s.min_samples.is_some(),
        };
        if wrong_keys {
            return Err(Error::Config(format!(
                "stop keys do not match policy {:?}",
                s.policy
            )));
        }
        let config = SessionConfig {
            phi,
            profile,
            source: SourceModel {
                kind: document.source.kind,
                mu: document.source.mu,
                visibility: document.source.visibility,
            },
            eta: document.channel.eta,
            seed,
            stop,
            document,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_document(ConfigDocument::from_toml(text)?)
    }

    /// Canonical text shared by networked parties; equal configs give equal text.
    pub fn canonical_text(&self) -> String {
        self.document.to_toml()
    }

    pub fn document(&self) -> &ConfigDocument {
        &self.document
    }

    pub fn state_set(&self) -> Result<ProtocolStateSet> {
        ProtocolStateSet::new(self.phi)
    }

    pub fn validate(&self) -> Result<()> {
        self.state_set()?;
        self.profile.validate()?;
        self.source.validate()?;
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        match (self.profile.alice, self.source.kind) {
            (AliceProfile::AttenuatedHonest, SourceKind::AttenuatedPulse) => {}
            (AliceProfile::AttenuatedHonest, _) => {
                return Err(Error::Config(
                    "attenuated-honest Alice needs an attenuated-pulse source".into(),
                ))
            }
            (AliceProfile::Honest, SourceKind::AttenuatedPulse) => {
                return Err(Error::Config(
                    "honest Alice with pulses is alice = \"attenuated-honest\"".into(),
                ))
            }
            _ => {}
        }
        if self.source.kind == SourceKind::AttenuatedPulse && self.source.mu <= 0.0 {
            return Err(Error::Config("attenuated pulses need mu > 0".into()));
        }
        if self.profile.bob == BobProfile::Multiphoton
            && self.source.kind == SourceKind::SinglePhoton
        {
            return Err(Error::Config(
                "multiphoton Bob never sees two photons from a single-photon source".into(),
            ));
        }
        if self.profile.bob == BobProfile::Multiphoton && self.source.mu <= 0.0 {
            return Err(Error::Config("multiphoton Bob needs mu > 0".into()));
        }
        if let StopPolicy::Threshold { tau, .. } = self.stop {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::ProbabilityOutOfRange {
                    name: "tau",
                    value: tau,
                });
            }
        }
        self.sequential_test().map(|_| ())
    }

    /// The stopping rule this session tracks. Fixed-count sessions still
    /// track a default SPRT for reporting; `None` when the honest and
    /// cheating rates cannot be told apart.
    pub fn sequential_test(&self) -> Result<Option<SequentialTest>> {
        let pred = predict(self.phi, self.source.visibility)?;
        let (p0, p1, alpha, beta) = match self.stop {
            StopPolicy::Threshold {
                tau, min_samples, ..
            } => return SequentialTest::new(TestKind::Threshold { tau, min_samples }).map(Some),
            StopPolicy::Sprt {
                p0,
                p1,
                alpha,
                beta,
                ..
            } => (p0, p1, alpha, beta),
            StopPolicy::FixedCount { .. } => (None, None, DEFAULT_SPRT_ERROR, DEFAULT_SPRT_ERROR),
        };
        let explicit = p0.is_some() || p1.is_some();
        let p0 = p0.unwrap_or(pred.pstar_honest);
        let p1 = p1.unwrap_or(pred.min_cheat_rate());
        let test = SequentialTest::new(TestKind::Sprt {
            p0,
            p1,
            alpha,
            beta,
        });
        match test {
            Ok(t) => Ok(Some(t)),
            Err(e) if explicit || matches!(self.stop, StopPolicy::Sprt { .. }) => Err(e),
            Err(_) => Ok(None),
        }
    }

    /// Hard cap on instances for this session.
    pub fn max_flips(&self) -> u64 {
        match self.stop {
            StopPolicy::FixedCount { n } => n,
            StopPolicy::Threshold { max_flips, .. } | StopPolicy::Sprt { max_flips, .. } => {
                max_flips
            }
        }
    }

    pub fn stops_on_decision(&self) -> bool {
        !matches!(self.stop, StopPolicy::FixedCount { .. })
    }

    /// Programmatic builder for the common single-photon case.
    pub fn builder(seed: u64) -> ConfigBuilder {
        ConfigBuilder {
            doc: ConfigDocument {
                seed: Some(seed),
                stop: StopSection {
                    count: Some(1000),
                    ..StopSection::default()
                },
                ..ConfigDocument::default()
            },
        }
    }
}

/// Fluent construction of a [`ConfigDocument`].
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    doc: ConfigDocument,
}

impl ConfigBuilder {
    pub fn bb84(mut self) -> Self {
        self.doc.protocol = ProtocolSection {
            states: StatesPreset::Bb84,
            phi_deg: None,
        };
        self
    }

    pub fn fair(mut self) -> Self {
        self.doc.protocol = ProtocolSection {
            states: StatesPreset::Fair,
            phi_deg: None,
        };
        self
    }

    pub fn phi_deg(mut self, deg: f64) -> Self {
        self.doc.protocol = ProtocolSection {
            states: StatesPreset::Custom,
            phi_deg: Some(deg),
        };
        self
    }

    pub fn alice(mut self, alice: AliceProfile) -> Self {
        self.doc.profile.alice = alice;
        self
    }

    pub fn bob(mut self, bob: BobKind) -> Self {
        self.doc.profile.bob = bob;
        self
    }

    pub fn selective_abort(mut self, theta_deg: f64, accept: &[u8]) -> Self {
        self.doc.profile.bob = BobKind::SelectiveAbort;
        self.doc.profile.abort_theta_deg = Some(theta_deg);
        self.doc.profile.abort_accept = Some(accept.to_vec());
        self
    }

    pub fn unhappy(mut self, action: UnhappyAction) -> Self {
        self.doc.profile.unhappy = action;
        self
    }

    pub fn source(mut self, kind: SourceKind, mu: f64) -> Self {
        self.doc.source.kind = kind;
        self.doc.source.mu = mu;
        self
    }

    pub fn visibility(mut self, v: f64) -> Self {
        self.doc.source.visibility = v;
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.doc.channel.eta = eta;
        self
    }

    pub fn count(mut self, n: u64) -> Self {
        self.doc.stop = StopSection {
            policy: PolicyKind::FixedCount,
            count: Some(n),
            ..StopSection::default()
        };
        self
    }

    pub fn stop(mut self, stop: StopSection) -> Self {
        self.doc.stop = stop;
        self
    }

    pub fn document(self) -> ConfigDocument {
        self.doc
    }

    pub fn build(self) -> Result<SessionConfig> {
        SessionConfig::from_document(self.doc)
    }
}
