//! Identity escrow for anonymized reviewers.
//!
//! An escrow board hands out pseudonyms, keeps the real identities sealed,
//! and answers petition-driven investigations without ever disclosing who
//! wrote a review. A board that fails to answer in time is flagged
//! nonresponsive, and ranking then dismisses every review it vouched for.

mod seal;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Days, NaiveDate};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_encode, Fingerprint};
use crate::model::{board_id, DocumentHandle, Grade, Identity, ReviewObject, ReviewProcessSpec, ReviewerAttribution};

pub use self::seal::{open_sealed, seal, SealError, DEFAULT_KDF_ROUNDS};

pub const DEFAULT_MIN_PETITIONERS: usize = 3;
pub const DEFAULT_WINDOW_DAYS: u64 = 60;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EscrowError {
    #[error("petition has {got} distinct petitioners, {need} required")]
    PetitionTooSmall { got: usize, need: usize },
    #[error("petitioner {0:?} sits on the escrow board")]
    PetitionerOnBoard(String),
    #[error("petition names no reviews")]
    NoReviews,
    #[error("review {0} is not held by this escrow")]
    UnknownReview(Fingerprint),
    #[error("unknown pseudonym {0:?}")]
    UnknownPseudonym(String),
    #[error("unknown investigation {0}")]
    UnknownInvestigation(u64),
    #[error("investigation {0} is not open")]
    NotOpen(u64),
    #[error("investigation {id} runs until {deadline}")]
    NotYetExpired { id: u64, deadline: NaiveDate },
    #[error(transparent)]
    Seal(#[from] SealError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowConfig {
    pub min_petitioners: usize,
    pub window_days: u64,
}

impl Default for EscrowConfig {
    fn default() -> Self {
        EscrowConfig { min_petitioners: DEFAULT_MIN_PETITIONERS, window_days: DEFAULT_WINDOW_DAYS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvestigationState {
    Open,
    ResolvedRetraction,
    ResolvedClarification,
    EscrowNonresponsive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Retraction,
    Clarification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Investigation {
    pub id: u64,
    pub petitioners: Vec<Identity>,
    pub reviews: Vec<DocumentHandle>,
    pub state: InvestigationState,
    pub opened: NaiveDate,
    pub deadline: NaiveDate,
}

/// One line of the public investigation log. Carries no identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub investigation: u64,
    pub date: NaiveDate,
    pub state: InvestigationState,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reviews: Vec<Fingerprint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<NaiveDate>,
}

/// What the board hands back when it resolves an investigation: the frame of
/// a counter-review published under the original pseudonym.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterReviewTemplate {
    pub action: Resolution,
    pub pseudonym: String,
    pub escrow_board: Vec<Identity>,
    pub targets: Vec<DocumentHandle>,
    pub title: String,
}

impl CounterReviewTemplate {
    pub fn into_review(self, comments: impl Into<String>, grades: Vec<Grade>, process: ReviewProcessSpec) -> ReviewObject {
        ReviewObject {
            author: ReviewerAttribution::Pseudonymous { pseudonym: self.pseudonym, escrow_board: self.escrow_board },
            title: self.title,
            targets: self.targets,
            grades,
            comments: comments.into(),
            process,
        }
    }
}

/// A real identity under seal. Never serialized on a public path and never
/// printed by `Debug`.
#[derive(Clone, PartialEq, Eq)]
struct Sealed(Identity);

impl fmt::Debug for Sealed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Sealed(..)")
    }
}

#[derive(Debug, Clone)]
pub struct EscrowService {
    label: String,
    board: Vec<Identity>,
    records: BTreeMap<String, Sealed>,
    numbers: BTreeSet<u64>,
    reviews: BTreeMap<Fingerprint, String>,
    investigations: Vec<Investigation>,
    log: Vec<LogEntry>,
    responsive: bool,
    config: EscrowConfig,
}

/// Full private state, only ever written through [`seal`].
#[derive(Serialize, Deserialize)]
struct PrivateState {
    label: String,
    board: Vec<Identity>,
    records: BTreeMap<String, Identity>,
    numbers: Vec<u64>,
    reviews: BTreeMap<Fingerprint, String>,
    investigations: Vec<Investigation>,
    log: Vec<LogEntry>,
    responsive: bool,
    config: EscrowConfig,
}

#[derive(Serialize)]
struct PublicStatus<'a> {
    board: Fingerprint,
    label: &'a str,
    members: &'a [Identity],
    responsive: bool,
    investigations: Vec<PublicInvestigation<'a>>,
}

#[derive(Serialize)]
struct PublicInvestigation<'a> {
    id: u64,
    state: InvestigationState,
    deadline: NaiveDate,
    reviews: &'a [DocumentHandle],
}

impl EscrowService {
    /// `label` names the mandating body, e.g. "the XYZ program committee".
    pub fn new(label: impl Into<String>, board: Vec<Identity>) -> Self {
        Self::with_config(label, board, EscrowConfig::default())
    }

    pub fn with_config(label: impl Into<String>, board: Vec<Identity>, config: EscrowConfig) -> Self {
        EscrowService {
            label: label.into(),
            board,
            records: BTreeMap::new(),
            numbers: BTreeSet::new(),
            reviews: BTreeMap::new(),
            investigations: Vec::new(),
            log: Vec::new(),
            responsive: true,
            config,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn board(&self) -> &[Identity] {
        &self.board
    }

    pub fn board_id(&self) -> Fingerprint {
        board_id(&self.board)
    }

    pub fn is_responsive(&self) -> bool {
        self.responsive
    }

    pub fn config(&self) -> EscrowConfig {
        self.config
    }

    pub fn investigations(&self) -> &[Investigation] {
        &self.investigations
    }

    /// Issues a fresh pseudonym and seals `identity` behind it.
    ///
    /// The reviewer number is drawn at random among unused ones, so neither
    /// the identity nor the registration order shows through.
    pub fn register<R: RngCore>(&mut self, identity: Identity, rng: &mut R) -> String {
        let span = 16 + 2 * self.numbers.len() as u64;
        let n = loop {
            let n = rng.gen_range(1..=span);
            if !self.numbers.contains(&n) {
                break n;
            }
        };
        self.numbers.insert(n);
        let pseudonym = format!("Anonymous reviewer {n} mandated by {}", self.label);
        self.records.insert(pseudonym.clone(), Sealed(identity));
        pseudonym
    }

    /// Attribution to put in a review written under `pseudonym`.
    pub fn attribution(&self, pseudonym: &str) -> Result<ReviewerAttribution, EscrowError> {
        if !self.records.contains_key(pseudonym) {
            return Err(EscrowError::UnknownPseudonym(pseudonym.to_owned()));
        }
        Ok(ReviewerAttribution::Pseudonymous { pseudonym: pseudonym.to_owned(), escrow_board: self.board.clone() })
    }

    pub fn has_record(&self, pseudonym: &str) -> bool {
        self.records.contains_key(pseudonym)
    }

    /// Records that the review with fingerprint `review` was written under `pseudonym`.
    pub fn bind_review(&mut self, review: Fingerprint, pseudonym: &str) -> Result<(), EscrowError> {
        if !self.records.contains_key(pseudonym) {
            return Err(EscrowError::UnknownPseudonym(pseudonym.to_owned()));
        }
        self.reviews.insert(review, pseudonym.to_owned());
        Ok(())
    }

    pub fn pseudonym_of(&self, review: &Fingerprint) -> Option<&str> {
        self.reviews.get(review).map(String::as_str)
    }

    /// True if the serialized review contains the sealed name behind its pseudonym.
    pub fn leaks_identity(&self, review: &ReviewObject) -> bool {
        match &review.author {
            ReviewerAttribution::Pseudonymous { pseudonym, .. } => {
                self.records.get(pseudonym).is_some_and(|s| review.leaks_identity(&s.0))
            }
            ReviewerAttribution::Open(_) => false,
        }
    }

    /// Byte-scans `output` for any sealed name. Used to audit public outputs.
    pub fn scan_for_sealed(&self, output: &[u8]) -> bool {
        self.records.values().any(|s| {
            let name = s.0.name.as_bytes();
            !name.is_empty() && output.windows(name.len()).any(|w| w == name)
        })
    }

    pub fn open_investigation(
        &mut self,
        petitioners: Vec<Identity>,
        reviews: Vec<DocumentHandle>,
        now: NaiveDate,
    ) -> Result<&Investigation, EscrowError> {
        let distinct: BTreeSet<&str> = petitioners.iter().map(|p| p.name.as_str()).collect();
        if distinct.len() < self.config.min_petitioners {
            return Err(EscrowError::PetitionTooSmall { got: distinct.len(), need: self.config.min_petitioners });
        }
        if let Some(p) = petitioners.iter().find(|p| self.board.iter().any(|b| b.name == p.name)) {
            return Err(EscrowError::PetitionerOnBoard(p.name.clone()));
        }
        if reviews.is_empty() {
            return Err(EscrowError::NoReviews);
        }
        if let Some(r) = reviews.iter().find(|r| !self.reviews.contains_key(&r.fingerprint)) {
            return Err(EscrowError::UnknownReview(r.fingerprint));
        }
        let mut seen = BTreeSet::new();
        let petitioners = petitioners.into_iter().filter(|p| seen.insert(p.name.clone())).collect();
        let id = self.investigations.len() as u64 + 1;
        let deadline = now.checked_add_days(Days::new(self.config.window_days)).expect("date in range");
        self.log.push(LogEntry {
            investigation: id,
            date: now,
            state: InvestigationState::Open,
            reviews: reviews.iter().map(|r| r.fingerprint).collect(),
            deadline: Some(deadline),
        });
        self.investigations.push(Investigation {
            id,
            petitioners,
            reviews,
            state: InvestigationState::Open,
            opened: now,
            deadline,
        });
        Ok(self.investigations.last().expect("just pushed"))
    }

    fn open_mut(&mut self, id: u64) -> Result<&mut Investigation, EscrowError> {
        let inv = self
            .investigations
            .iter_mut()
            .find(|i| i.id == id)
            .ok_or(EscrowError::UnknownInvestigation(id))?;
        if inv.state != InvestigationState::Open {
            return Err(EscrowError::NotOpen(id));
        }
        Ok(inv)
    }

    /// Board adjudication. Returns one counter-review template per pseudonym
    /// among the disputed reviews; none of them names anyone.
    pub fn resolve_investigation(
        &mut self,
        id: u64,
        action: Resolution,
        now: NaiveDate,
    ) -> Result<Vec<CounterReviewTemplate>, EscrowError> {
        let inv = self.open_mut(id)?;
        inv.state = match action {
            Resolution::Retraction => InvestigationState::ResolvedRetraction,
            Resolution::Clarification => InvestigationState::ResolvedClarification,
        };
        let state = inv.state;
        let reviews = inv.reviews.clone();
        self.log.push(LogEntry { investigation: id, date: now, state, reviews: vec![], deadline: None });

        let mut by_pseudonym: BTreeMap<&str, Vec<DocumentHandle>> = BTreeMap::new();
        for r in reviews {
            let p = self.reviews.get(&r.fingerprint).expect("checked at petition time");
            by_pseudonym.entry(p.as_str()).or_default().push(r);
        }
        let verb = match action {
            Resolution::Retraction => "Retraction",
            Resolution::Clarification => "Clarification",
        };
        Ok(by_pseudonym
            .into_iter()
            .map(|(pseudonym, targets)| CounterReviewTemplate {
                action,
                pseudonym: pseudonym.to_owned(),
                escrow_board: self.board.clone(),
                title: format!("{verb} of {}", targets.iter().filter_map(|t| t.title.as_deref()).collect::<Vec<_>>().join("; ")),
                targets,
            })
            .collect())
    }

    /// Closes an unanswered investigation and flags the board nonresponsive.
    pub fn expire_investigation(&mut self, id: u64, now: NaiveDate) -> Result<InvestigationState, EscrowError> {
        let inv = self.open_mut(id)?;
        if now <= inv.deadline {
            return Err(EscrowError::NotYetExpired { id, deadline: inv.deadline });
        }
        inv.state = InvestigationState::EscrowNonresponsive;
        self.responsive = false;
        self.log.push(LogEntry {
            investigation: id,
            date: now,
            state: InvestigationState::EscrowNonresponsive,
            reviews: vec![],
            deadline: None,
        });
        Ok(InvestigationState::EscrowNonresponsive)
    }

    /// The append-only public investigation log, canonically encoded.
    pub fn public_log(&self) -> Vec<u8> {
        canonical_encode(&self.log).expect("log is encodable").into_vec()
    }

    pub fn log_entries(&self) -> &[LogEntry] {
        &self.log
    }

    /// Public status: board, responsiveness and investigations, without petitioners or sealed data.
    pub fn public_status(&self) -> Vec<u8> {
        let status = PublicStatus {
            board: self.board_id(),
            label: &self.label,
            members: &self.board,
            responsive: self.responsive,
            investigations: self
                .investigations
                .iter()
                .map(|i| PublicInvestigation { id: i.id, state: i.state, deadline: i.deadline, reviews: &i.reviews })
                .collect(),
        };
        canonical_encode(&status).expect("status is encodable").into_vec()
    }

    /// Encrypts the full state under `passphrase`.
    pub fn save_sealed<R: RngCore>(&self, passphrase: &str, rounds: u32, rng: &mut R) -> Vec<u8> {
        let state = PrivateState {
            label: self.label.clone(),
            board: self.board.clone(),
            records: self.records.iter().map(|(k, v)| (k.clone(), v.0.clone())).collect(),
            numbers: self.numbers.iter().copied().collect(),
            reviews: self.reviews.clone(),
            investigations: self.investigations.clone(),
            log: self.log.clone(),
            responsive: self.responsive,
            config: self.config,
        };
        let plain = canonical_encode(&state).expect("state is encodable").into_vec();
        seal(&plain, passphrase, rounds, rng)
    }

    pub fn load_sealed(data: &[u8], passphrase: &str) -> Result<Self, EscrowError> {
        let plain = open_sealed(data, passphrase)?;
        let s: PrivateState = crate::canonical::canonical_decode(&plain).map_err(|_| SealError::Corrupt)?;
        Ok(EscrowService {
            label: s.label,
            board: s.board,
            records: s.records.into_iter().map(|(k, v)| (k, Sealed(v))).collect(),
            numbers: s.numbers.into_iter().collect(),
            reviews: s.reviews,
            investigations: s.investigations,
            log: s.log,
            responsive: s.responsive,
            config: s.config,
        })
    }
}
