//! Checker output.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerKind {
    Atomic,
    Sequential,
    Eventual,
    Vspec,
    Abcast,
}

impl CheckerKind {
    pub const ALL: [CheckerKind; 5] = [
        CheckerKind::Atomic,
        CheckerKind::Sequential,
        CheckerKind::Eventual,
        CheckerKind::Vspec,
        CheckerKind::Abcast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Atomic => "atomic",
            Self::Sequential => "sequential",
            Self::Eventual => "eventual",
            Self::Vspec => "vspec",
            Self::Abcast => "abcast",
        }
    }
}

impl fmt::Display for CheckerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CheckerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown checker {s:?} (expected atomic|sequential|eventual|vspec|abcast)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Divergence,
}

/// The property a failing verdict names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    A1,
    A2,
    A3,
    A4,
    S1,
    S2,
    S3,
    S4,
    PrefixChain,
    Fabrication,
    Duplicate,
    ProbeCompleteness,
    SeqSpec,
    /// An append answered ack although the extended ledger is invalid.
    #[serde(rename = "Def5-2a")]
    AckedInvalid,
    /// An append answered nack although the extended ledger is valid.
    #[serde(rename = "Def5-2b")]
    NackedValid,
    /// No permutation satisfying the ordering constraint replays correctly.
    Linearization,
    Validity,
    UniformAgreement,
    UniformIntegrity,
    UniformTotalOrder,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AckedInvalid => f.write_str("Def5-2a"),
            Self::NackedValid => f.write_str("Def5-2b"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub checker: CheckerKind,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violated: Option<Property>,
    pub witness: Vec<String>,
    pub oracle_used: bool,
}

impl Verdict {
    pub fn pass(checker: CheckerKind) -> Self {
        Self {
            checker,
            status: Status::Pass,
            violated: None,
            witness: Vec::new(),
            oracle_used: false,
        }
    }

    /// A failing verdict. Panics on an empty witness.
    pub fn fail(checker: CheckerKind, violated: Property, witness: Vec<String>) -> Self {
        assert!(!witness.is_empty(), "fail verdict for {violated} needs a witness");
        Self {
            checker,
            status: Status::Fail,
            violated: Some(violated),
            witness,
            oracle_used: false,
        }
    }

    pub fn divergence(checker: CheckerKind, violated: Option<Property>, witness: Vec<String>) -> Self {
        Self {
            checker,
            status: Status::Divergence,
            violated,
            witness,
            oracle_used: true,
        }
    }

    pub fn with_oracle(mut self, used: bool) -> Self {
        self.oracle_used = used;
        self
    }

    pub fn is_pass(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn is_fail(&self) -> bool {
        self.status == Status::Fail
    }

    pub fn fails_at(&self, p: Property) -> bool {
        self.is_fail() && self.violated == Some(p)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.status, self.violated) {
            (Status::Pass, _) => write!(f, "{}: pass", self.checker),
            (status, Some(p)) => write!(
                f,
                "{}: {:?}({p}) witness=[{}]",
                self.checker,
                status,
                self.witness.join(", ")
            ),
            (status, None) => write!(f, "{}: {:?} witness=[{}]", self.checker, status, self.witness.join(", ")),
        }
    }
}
