use proptest::prelude::*;
use subreg::languages::enumerate_strings;
use subreg::strings::{
    contains_subsequence, contains_substring, count_occurrences, pad, prefix, project_tier, suffix, Alphabet, Str, Sym,
    Tier,
};

fn brute_substring(s: &[Sym], g: &[Sym]) -> bool {
    if g.is_empty() {
        return true;
    }
    (0..s.len()).any(|i| i + g.len() <= s.len() && (0..g.len()).all(|j| s[i + j] == g[j]))
}

fn brute_subsequence(s: &[Sym], h: &[Sym]) -> bool {
    (0u32..1 << s.len()).any(|mask| {
        mask.count_ones() as usize == h.len()
            && (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).eq(h.iter().copied())
    })
}

fn brute_count(s: &[Sym], g: &[Sym]) -> usize {
    (0..=s.len()).filter(|&i| i + g.len() <= s.len() && s[i..i + g.len()] == *g).count()
}

fn abc() -> Alphabet {
    Alphabet::from_chars("abc").unwrap()
}

#[test]
fn primitives_match_brute_force_on_all_short_strings() {
    let alphabet = abc();
    let strings = enumerate_strings(&alphabet, 8);
    assert_eq!(strings.len(), (0..=8).map(|l| 3usize.pow(l)).sum::<usize>());
    let patterns = enumerate_strings(&alphabet, 3);
    for s in &strings {
        for g in &patterns {
            assert_eq!(contains_substring(&s.0, &g.0), brute_substring(&s.0, &g.0), "{s:?} {g:?}");
            assert_eq!(contains_subsequence(&s.0, &g.0), brute_subsequence(&s.0, &g.0), "{s:?} {g:?}");
            if !g.0.is_empty() {
                assert_eq!(count_occurrences(&s.0, &g.0), brute_count(&s.0, &g.0), "{s:?} {g:?}");
            }
        }
    }
}

#[test]
fn padded_patterns_with_boundaries() {
    let alphabet = abc();
    let p = pad(&alphabet.parse("ab").unwrap().0, 2).unwrap();
    assert_eq!(alphabet.render(&p.0), "##ab##");
    for g in ["##a", "b##", "#ab#"] {
        assert!(contains_substring(&p.0, &alphabet.parse(g).unwrap().0), "{g}");
    }
    assert!(!contains_substring(&p.0, &alphabet.parse("#b").unwrap().0));
    assert_eq!(count_occurrences(&p.0, &alphabet.parse("#").unwrap().0), 4);
}

fn word(max: usize) -> impl Strategy<Value = Vec<Sym>> {
    prop::collection::vec((1u16..=3).prop_map(Sym), 0..=max)
}

proptest! {
    #[test]
    fn substring_implies_subsequence(s in word(12), g in word(4)) {
        if contains_substring(&s, &g) {
            prop_assert!(contains_subsequence(&s, &g));
        }
    }

    #[test]
    fn count_positive_iff_substring(s in word(12), g in word(4)) {
        prop_assume!(!g.is_empty());
        prop_assert_eq!(count_occurrences(&s, &g) > 0, contains_substring(&s, &g));
    }

    #[test]
    fn subsequence_is_preserved_by_insertion(s in word(10), h in word(3), pos in 0usize..11, c in 1u16..=3) {
        let mut t = s.clone();
        t.insert(pos.min(s.len()), Sym(c));
        if contains_subsequence(&s, &h) {
            prop_assert!(contains_subsequence(&t, &h));
        }
    }

    #[test]
    fn pad_shape(s in word(10), k in 0usize..4) {
        let p = pad(&s, k).unwrap();
        prop_assert_eq!(p.0.len(), s.len() + 2 * k);
        prop_assert!(p.0[..k].iter().chain(&p.0[k + s.len()..]).all(|c| c.is_boundary()));
        prop_assert_eq!(&p.0[k..k + s.len()], &s[..]);
    }

    #[test]
    fn pad_rejects_boundary(s in word(6), pos in 0usize..7) {
        let mut t = s.clone();
        t.insert(pos.min(s.len()), Sym::BOUNDARY);
        prop_assert!(pad(&t, 1).is_err());
    }

    #[test]
    fn projection_is_idempotent_and_order_preserving(s in word(12), members in prop::collection::btree_set(1u16..=3, 0..=3)) {
        let tier = Tier::from_syms(members.iter().map(|&m| Sym(m)));
        let once = project_tier(&s, &tier);
        prop_assert_eq!(&project_tier(&once.0, &tier), &once);
        prop_assert!(contains_subsequence(&s, &once.0));
        prop_assert!(once.0.iter().all(|c| tier.contains(*c)));
        let expected: Vec<Sym> = s.iter().copied().filter(|c| members.contains(&c.0)).collect();
        prop_assert_eq!(once, Str(expected));
    }

    #[test]
    fn prefix_suffix_concatenate(s in word(10), n in 0usize..11) {
        let n = n.min(s.len());
        let mut joined = prefix(&s, n).unwrap().0;
        joined.extend(suffix(&s, s.len() - n).unwrap().0);
        prop_assert_eq!(joined, s.clone());
        prop_assert!(prefix(&s, s.len() + 1).is_err());
    }
}
