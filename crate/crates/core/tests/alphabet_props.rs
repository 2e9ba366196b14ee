use a2w::alphabet::{
    build_sar_targets, build_vocabulary, invert_sar_targets, CharSet, CharSymbol, JointAlphabet, LabelId,
};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-z0-9'&.-]{1,12}"
}

proptest! {
    #[test]
    fn spelling_expands_back_to_the_word(w in word()) {
        for cs in [CharSet::simple(), CharSet::positional()] {
            let ids = cs.spell(&w).unwrap();
            prop_assert_eq!(cs.spelled_text(&ids), w.clone());
        }
    }

    #[test]
    fn positional_spellings_run_from_a_begin_form_to_an_end_form(w in word()) {
        let cs = CharSet::positional();
        let syms: Vec<CharSymbol> = cs.spell(&w).unwrap().into_iter().map(|id| cs.symbol(id).unwrap()).collect();
        prop_assert!(syms[0].begins_word());
        prop_assert!(syms.last().unwrap().ends_word());
        prop_assert!(syms[1..].iter().all(|s| !s.begins_word()));
        prop_assert!(syms[..syms.len() - 1].iter().all(|s| !s.ends_word()));
    }

    #[test]
    fn raising_the_threshold_only_removes_words(
        corpus in prop::collection::vec(prop::collection::vec("[A-D]{1,2}", 1..6), 1..20),
        m in 1usize..4,
    ) {
        let lines: Vec<String> = corpus.iter().map(|ws| ws.join(" ")).collect();
        let low = build_vocabulary(&lines, m).unwrap();
        let high = build_vocabulary(&lines, m + 1).unwrap();
        prop_assert!(high.words().iter().all(|w| low.contains(w)));
        prop_assert!(high.size() <= low.size());
    }

    #[test]
    fn sar_targets_invert_to_the_transcript(
        transcript in prop::collection::vec("[a-h]{1,5}", 0..8),
        vocab_lines in prop::collection::vec("[a-h]{1,5}", 1..10),
    ) {
        let vocab = build_vocabulary(&vocab_lines, 1).unwrap();
        let joint = JointAlphabet::new(vocab, CharSet::positional());
        let t = build_sar_targets(&transcript, &joint).unwrap();
        prop_assert!(t.labels.iter().all(|l| *l != LabelId::BLANK));
        let inv = invert_sar_targets(&t.labels, &joint);
        let upper: Vec<String> = transcript.iter().map(|w| w.to_uppercase()).collect();
        prop_assert_eq!(inv.words(&joint), upper);
        prop_assert!(inv.segments.iter().all(|s| s.complete));
        let spelled: Vec<String> = inv.pairs(&joint).into_iter().map(|(_, s)| s).collect();
        prop_assert_eq!(spelled, transcript);
    }
}
