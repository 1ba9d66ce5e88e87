mod common;

use avse_core::grid::{letters, Keywords, COLOURS};
use avse_listen::responses::{score_keywords, KeywordAnswer, KeywordPayload, RatingsPayload};
use avse_listen::sessions::SessionKind;
use avse_listen::{Answer, Condition, Error, ResponsePayload};
use common::{at, header, keyword_trial, mushra_trial, record};
use proptest::prelude::*;

fn ratings(v: &[f64]) -> ResponsePayload {
    ResponsePayload::Mushra(RatingsPayload { ratings: v.to_vec() })
}

fn keywords(colour: &str, digit: i64, letter: &str) -> ResponsePayload {
    ResponsePayload::Intelligibility(KeywordPayload { colour: colour.into(), digit, letter: letter.into() })
}

fn truth() -> Keywords {
    Keywords { colour: "red".into(), letter: 'A', digit: 7 }
}

#[test]
fn valid_payload_is_stored_with_timestamp() {
    let mut r = record(header(SessionKind::Mushra, "p1", vec![mushra_trial("t1", -5.0)]));
    let stored = r.record_response("t1", &ratings(&[100.0, 40.0, 0.0, 55.0, 70.0, 20.0, 5.0]), at(3)).unwrap();
    assert_eq!(stored.received_at, at(3));
    assert_eq!(stored.answer, Answer::Mushra(avse_listen::responses::MushraAnswer { ratings: vec![100, 40, 0, 55, 70, 20, 5] }));
    assert_eq!(r.response("t1"), Some(&stored));
    assert!(r.is_complete());
}

#[test]
fn out_of_range_or_fractional_or_short_ratings_are_rejected() {
    let mut r = record(header(SessionKind::Mushra, "p1", vec![mushra_trial("t1", 5.0)]));
    for bad in [
        vec![101.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![50.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![50.0; 6],
        vec![50.0; 8],
    ] {
        let e = r.record_response("t1", &ratings(&bad), at(0)).unwrap_err();
        assert!(matches!(e, Error::Invalid(_)), "{bad:?}: {e}");
    }
    let e = r.record_response("t1", &ratings(&[101.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), at(0)).unwrap_err();
    assert!(e.to_string().contains("101"), "{e}");
    assert_eq!(r.answered(), 0);
    assert!(matches!(r.record_response("t1", &keywords("red", 1, "a"), at(0)), Err(Error::Invalid(_))));
}

#[test]
fn second_response_and_unknown_trial_are_rejected() {
    let mut r = record(header(SessionKind::Intelligibility, "p1", vec![keyword_trial("t1", -5.0, Condition::AvL, truth())]));
    let first = r.record_response("t1", &keywords("red", 7, "a"), at(1)).unwrap();
    let e = r.record_response("t1", &keywords("blue", 1, "b"), at(2)).unwrap_err();
    assert!(matches!(e, Error::Duplicate(_)), "{e}");
    assert_eq!(r.response("t1"), Some(&first));
    assert!(matches!(r.record_response("t9", &keywords("red", 7, "a"), at(2)), Err(Error::UnknownTrial(_))));
}

#[test]
fn keyword_payload_is_restricted_to_the_grammar() {
    let mut r = record(header(SessionKind::Intelligibility, "p1", vec![keyword_trial("t1", -5.0, Condition::AvL, truth())]));
    for bad in [keywords("purple", 1, "a"), keywords("red", 10, "a"), keywords("red", -1, "a"), keywords("red", 1, &"a".repeat(17))] {
        assert!(matches!(r.record_response("t1", &bad, at(0)), Err(Error::Invalid(_))), "{bad:?}");
    }
    // The letter is free text; it is scored, not validated.
    let s = r.record_response("t1", &keywords("RED", 7, "W"), at(0)).unwrap();
    let Answer::Intelligibility(a) = s.answer else { panic!("keyword answer") };
    assert_eq!((a.colour.as_str(), a.letter.as_str()), ("red", "W"));
}

#[test]
fn payloads_parse_from_wire_json() {
    let p: ResponsePayload = serde_json::from_str(r#"{"ratings":[1,2,3,4,5,6,7]}"#).unwrap();
    assert!(matches!(p, ResponsePayload::Mushra(_)));
    let p: ResponsePayload = serde_json::from_str(r#"{"colour":"blue","digit":3,"letter":"x"}"#).unwrap();
    assert!(matches!(p, ResponsePayload::Intelligibility(_)));
    assert!(serde_json::from_str::<ResponsePayload>(r#"{"colour":"blue","digit":3}"#).is_err());
    assert!(serde_json::from_str::<ResponsePayload>(r#"{"ratings":[1],"extra":1}"#).is_err());
}

#[test]
fn keyword_scoring_rules() {
    let ans = |c: &str, d: u8, l: &str| KeywordAnswer { colour: c.into(), digit: d, letter: l.into() };
    assert_eq!(score_keywords(&ans("red", 7, "A"), &truth()).correct(), 3);
    assert!(score_keywords(&ans("red", 7, "a"), &truth()).letter);
    let w = Keywords { letter: 'V', ..truth() };
    assert!(!score_keywords(&ans("red", 7, "W"), &w).letter);
    assert!(!score_keywords(&ans("red", 7, "w"), &w).letter);
    assert!(!score_keywords(&ans("red", 7, "ab"), &truth()).letter);
    assert!(!score_keywords(&ans("red", 7, ""), &truth()).letter);
    let s = score_keywords(&ans("blue", 6, "A"), &truth());
    assert_eq!((s.colour, s.letter, s.digit, s.correct()), (false, true, false, 1));
}

proptest! {
    #[test]
    fn score_counts_matching_fields(
        c in 0usize..4, tc in 0usize..4, d in 0u8..10, td in 0u8..10,
        l in 0usize..25, tl in 0usize..25, upper in any::<bool>(),
    ) {
        let letters: Vec<char> = letters().collect();
        let typed = if upper { letters[l].to_string() } else { letters[l].to_ascii_lowercase().to_string() };
        let truth = Keywords { colour: COLOURS[tc].into(), letter: letters[tl], digit: td };
        let s = score_keywords(&KeywordAnswer { colour: COLOURS[c].into(), digit: d, letter: typed }, &truth);
        prop_assert_eq!(s.correct(), (c == tc) as usize + (d == td) as usize + (l == tl) as usize);
    }
}
