use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scholnet::canonical::Fingerprint;
use scholnet::escrow::EscrowService;
use scholnet::model::{
    make_handle, AuthorKnown, Fraction, Grade, Identity, PublishedObject, ReviewObject, ReviewProcessSpec, ReviewerAttribution,
    ReviewerKnownWhen, ReviewerMode, TextAudience, TextPublishedWhen, WorkPublic,
};
use scholnet::review_proc::{start_round, verify_double_blind_link, Phase, RoundError, RoundMode, RoundWork};

const WORKSHOP: &[u8] = include_bytes!("fixtures/workshop_review.canon");

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn workshop_spec() -> ReviewProcessSpec {
    ReviewObject::from_canonical(WORKSHOP).unwrap().process
}

fn work(text: &str, authors: &[&str]) -> RoundWork {
    let full = format!("{text}\nby {}", authors.join(", "));
    let private_object = PublishedObject::blob(full.into_bytes(), "text/plain");
    let anonymized_object = Some(PublishedObject::blob(format!("{text}\nby (anonymized)").into_bytes(), "text/plain"));
    let coe = "arxiv:2014-03-10:1403.0001v1".parse().unwrap();
    let handle = make_handle(&private_object, Some(text.to_owned()), Some(authors.iter().map(|a| a.to_string()).collect()), vec![coe]);
    RoundWork { private_object, anonymized_object, handle }
}

fn escrow() -> EscrowService {
    let board = ReviewObject::from_canonical(WORKSHOP).unwrap().process.escrow_board;
    EscrowService::new("the TRUST'14 program committee", board)
}

#[test]
fn blind_round_template_embeds_process() {
    let round = start_round(workshop_spec(), vec![work("A study", &["Ann Author"])], RoundMode::Blind, date("2014-03-14")).unwrap();
    assert_eq!(round.phase(), Phase::Reviewing);
    let packets = round.packets();
    assert_eq!(packets[0].template.process, workshop_spec());
    assert_eq!(packets[0].template.targets[0].title.as_deref(), Some("A study"));
    assert_eq!(packets[0].object, round.works()[0].private_object);
}

#[test]
fn double_blind_targets_the_real_version() {
    let w = work("A study", &["Ann Author", "Bob Writer"]);
    let round = start_round(workshop_spec(), vec![w.clone()], RoundMode::DoubleBlind, date("2014-03-14")).unwrap();
    let p = &round.packets()[0];
    assert_eq!(p.template.targets[0].fingerprint, w.handle.fingerprint);
    assert_ne!(p.template.targets[0].fingerprint, w.anonymized_object.as_ref().unwrap().fingerprint());
    assert_eq!(p.template.targets[0].coes, w.handle.coes);
    let bytes = p.bytes();
    for name in ["Ann Author", "Bob Writer"] {
        assert!(!bytes.windows(name.len()).any(|x| x == name.as_bytes()));
    }
    let link = w.link().unwrap();
    assert_ne!(link.anonymized_fingerprint, link.nonanon_fingerprint);
}

#[test]
fn start_errors() {
    let mut spec = workshop_spec();
    spec.end_date = date("2014-03-01");
    assert!(matches!(start_round(spec, vec![], RoundMode::Blind, date("2014-03-14")), Err(RoundError::SpecInvalid(_))));

    let mut no_anon = work("A", &["Ann"]);
    no_anon.anonymized_object = None;
    assert_eq!(
        start_round(workshop_spec(), vec![no_anon.clone()], RoundMode::DoubleBlind, date("2014-03-14")).unwrap_err(),
        RoundError::MissingAnonymizedVariant(0)
    );
    assert!(start_round(workshop_spec(), vec![no_anon], RoundMode::Blind, date("2014-03-14")).is_ok());

    let mut no_coe = work("A", &["Ann"]);
    no_coe.handle.coes.clear();
    assert_eq!(start_round(workshop_spec(), vec![no_coe], RoundMode::Blind, date("2014-03-14")).unwrap_err(), RoundError::MissingCoE(0));

    let mut leaky = work("A", &["Ann Author"]);
    leaky.anonymized_object = Some(PublishedObject::blob(b"A by Ann Author, sorry".to_vec(), "text/plain"));
    assert_eq!(
        start_round(workshop_spec(), vec![leaky], RoundMode::DoubleBlind, date("2014-03-14")).unwrap_err(),
        RoundError::AnonymizationLeak(0)
    );
}

fn reviewed_round(mode: RoundMode, spec: ReviewProcessSpec, grades: Vec<Grade>) -> (scholnet::review_proc::RoundState, EscrowService, ReviewObject) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut esc = escrow();
    let pseudonym = esc.register(Identity::new("Rita Reviewer"), &mut rng);
    let mut round = start_round(spec, vec![work("A study", &["Ann Author"])], mode, date("2014-03-14")).unwrap();
    let template = round.packets()[0].template.clone();
    let review = template.fill(esc.attribution(&pseudonym).unwrap(), grades, "Solid.");
    let receipt = round.submit_review(review.clone(), Some(&mut esc)).unwrap();
    assert_eq!(esc.pseudonym_of(&receipt.review.fingerprint), Some(pseudonym.as_str()));
    (round, esc, review)
}

#[test]
fn submission_is_held_until_release() {
    let (mut round, mut esc, review) = reviewed_round(RoundMode::Blind, workshop_spec(), vec![Grade::higher_is_better("Overall", 2, 3)]);
    assert!(round.public_reviews().is_empty());
    assert_eq!(round.release(date("2014-04-13")).unwrap_err(), RoundError::TooEarly { end: date("2014-04-14") });
    assert!(round.public_reviews().is_empty());
    let out = round.release(date("2014-04-14")).unwrap();
    assert_eq!(out.reviews.len(), 1);
    assert_eq!(out.works.len(), 1);
    assert_eq!(round.public_reviews().len(), 1);
    assert_eq!(round.submit_review(review, Some(&mut esc)).unwrap_err(), RoundError::WrongPhase);
    assert_eq!(round.release(date("2014-04-20")).unwrap_err(), RoundError::WrongPhase);
}

#[test]
fn immediate_publication() {
    let mut spec = workshop_spec();
    spec.review_text_published_when = TextPublishedWhen::Immediate;
    let (round, _, _) = reviewed_round(RoundMode::Blind, spec, vec![]);
    assert_eq!(round.public_reviews().len(), 1);
}

fn mutations(spec: &ReviewProcessSpec) -> Vec<ReviewProcessSpec> {
    let mut out = Vec::new();
    let mut m = spec.clone();
    m.start_date = date("2014-03-13");
    out.push(m);
    let mut m = spec.clone();
    m.end_date = date("2014-04-15");
    out.push(m);
    let mut m = spec.clone();
    m.author_identity_known_to_reviewer = AuthorKnown::Afterwards;
    out.push(m);
    let mut m = spec.clone();
    m.reviewer_identity_mode = ReviewerMode::AnonymizedToAuthorsOnly;
    out.push(m);
    let mut m = spec.clone();
    m.reviewer_identity_known_when = ReviewerKnownWhen::Afterwards;
    out.push(m);
    let mut m = spec.clone();
    m.review_text_published_when = TextPublishedWhen::Immediate;
    out.push(m);
    let mut m = spec.clone();
    m.review_text_audience = TextAudience::AuthorsAndCommittee;
    out.push(m);
    let mut m = spec.clone();
    m.reviewed_work_public = WorkPublic::Prior;
    out.push(m);
    let mut m = spec.clone();
    m.acceptance_threshold = Fraction::new(1, 2);
    out.push(m);
    let mut m = spec.clone();
    m.coordinators.pop();
    out.push(m);
    let mut m = spec.clone();
    m.escrow_board[0].affiliation = None;
    out.push(m);
    out
}

#[test]
fn process_mismatch_in_any_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut esc = escrow();
    let pseudonym = esc.register(Identity::new("Rita Reviewer"), &mut rng);
    let mut round = start_round(workshop_spec(), vec![work("A", &["Ann"])], RoundMode::Blind, date("2014-03-14")).unwrap();
    let template = round.packets()[0].template.clone();
    let all = mutations(&workshop_spec());
    assert_eq!(all.len(), 11);
    for m in all {
        assert_ne!(m, workshop_spec());
        let mut review = template.fill(esc.attribution(&pseudonym).unwrap(), vec![], "x");
        review.process = m;
        assert_eq!(round.submit_review(review, Some(&mut esc)).unwrap_err(), RoundError::ProcessMismatch);
    }
}

#[test]
fn submission_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut esc = escrow();
    let pseudonym = esc.register(Identity::new("Rita Reviewer"), &mut rng);
    let mut round = start_round(workshop_spec(), vec![work("A", &["Ann"])], RoundMode::Blind, date("2014-03-14")).unwrap();
    let template = round.packets()[0].template.clone();

    let mut other = template.fill(esc.attribution(&pseudonym).unwrap(), vec![], "x");
    other.targets[0].fingerprint = Fingerprint::sha256(b"elsewhere");
    assert_eq!(round.submit_review(other, Some(&mut esc)).unwrap_err(), RoundError::TargetMismatch);

    let open = template.fill(ReviewerAttribution::Open(Identity::new("Rita Reviewer")), vec![], "x");
    assert_eq!(round.submit_review(open, Some(&mut esc)).unwrap_err(), RoundError::AttributionMismatch);

    let stranger = template.fill(
        ReviewerAttribution::Pseudonymous { pseudonym: "Anonymous reviewer 999 mandated by nobody".into(), escrow_board: esc.board().to_vec() },
        vec![],
        "x",
    );
    assert_eq!(round.submit_review(stranger, Some(&mut esc)).unwrap_err(), RoundError::Unaccountable);

    let signed = template.fill(esc.attribution(&pseudonym).unwrap(), vec![], "Best, Rita Reviewer");
    assert_eq!(round.submit_review(signed.clone(), Some(&mut esc)).unwrap_err(), RoundError::IdentityLeak);
    assert_eq!(round.submit_review(signed, None).unwrap_err(), RoundError::Unaccountable);

    let bad = template.fill(esc.attribution(&pseudonym).unwrap(), vec![Grade::higher_is_better("x", 9, 3)], "x");
    assert!(matches!(round.submit_review(bad, Some(&mut esc)), Err(RoundError::InvalidReview(_))));
    assert_eq!(round.pending_len(), 0);
}

#[test]
fn threshold_gating_withholds_work_but_releases_reviews() {
    let mut spec = workshop_spec();
    spec.reviewed_work_public = WorkPublic::AfterwardsBeyondThreshold;
    spec.acceptance_threshold = Fraction::new(1, 2);
    let (mut low, _, review) = reviewed_round(RoundMode::DoubleBlind, spec.clone(), vec![Grade::higher_is_better("Overall", 1, 3)]);
    let out = low.release(date("2014-04-14")).unwrap();
    assert_eq!(out.reviews.len(), 1);
    assert!(out.works.is_empty());
    assert_eq!(out.withheld, vec![low.works()[0].handle.fingerprint]);
    // The authors may still publish: the review links to the real version.
    assert!(verify_double_blind_link(&review, &low.works()[0].private_object));

    let (mut high, _, _) = reviewed_round(RoundMode::DoubleBlind, spec, vec![Grade::higher_is_better("Overall", 2, 3)]);
    assert_eq!(high.release(date("2014-04-14")).unwrap().works.len(), 1);
}

#[test]
fn double_blind_link_binding() {
    let (round, _, review) = reviewed_round(RoundMode::DoubleBlind, workshop_spec(), vec![]);
    let real = &round.works()[0].private_object;
    assert!(verify_double_blind_link(&review, real));
    let PublishedObject::Blob { bytes, media_type } = real else { panic!() };
    let mut changed = bytes.clone();
    changed[0] ^= 1;
    assert!(!verify_double_blind_link(&review, &PublishedObject::blob(changed, media_type.clone())));
    assert!(!verify_double_blind_link(&review, round.works()[0].anonymized_object.as_ref().unwrap()));
}

#[test]
fn description_is_canonical_and_stable() {
    let a = start_round(workshop_spec(), vec![work("A", &["Ann"])], RoundMode::DoubleBlind, date("2014-03-14")).unwrap();
    let b = start_round(workshop_spec(), vec![work("A", &["Ann"])], RoundMode::DoubleBlind, date("2014-03-20")).unwrap();
    assert_eq!(a.description(), b.description());
    assert!(scholnet::canonical::decode(&a.description()).is_ok());
    let state = scholnet::canonical::canonical_encode(&a).unwrap();
    let back: scholnet::review_proc::RoundState = scholnet::canonical::canonical_decode(state.as_bytes()).unwrap();
    assert_eq!(back, a);
}
