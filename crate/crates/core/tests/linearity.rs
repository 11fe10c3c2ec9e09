//! Ring linearity of the encoder: integer combinations of codewords are
//! codewords, and encoding commutes with combination.

use dira::codec::generator_matrix;
use dira::multiuser::linear_combo;
use dira::profile::bundled;
use dira::{build_graph, encode, parity_check, CodeGraph, Sym};
use proptest::prelude::*;
use std::sync::OnceLock;

fn graphs() -> &'static [CodeGraph] {
    static GRAPHS: OnceLock<Vec<CodeGraph>> = OnceLock::new();
    GRAPHS.get_or_init(|| {
        [("q4_R1.0", 400), ("q8_R1.5", 400), ("dpc_q16_Rc5_8", 400), ("q4_R0.5", 3000)]
            .iter()
            .map(|&(label, n)| build_graph(&bundled(label).unwrap(), n, 11).unwrap())
            .collect()
    })
}

fn message(g: &CodeGraph, seed: &[u8]) -> Vec<Sym> {
    let mask = (g.q() - 1) as u8;
    (0..g.k()).map(|i| seed[i % seed.len()].wrapping_mul(i as u8 | 1) & mask).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combinations_of_codewords_are_codewords(
        which in 0usize..4,
        users in 1usize..=4,
        seeds in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..40), 4),
        coeffs in prop::collection::vec(any::<u8>(), 4),
    ) {
        let g = &graphs()[which];
        let mask = (g.q() - 1) as u8;
        let alpha: Vec<Sym> = coeffs[..users].iter().map(|c| c & mask).collect();
        let msgs: Vec<Vec<Sym>> = seeds[..users].iter().map(|s| message(g, s)).collect();
        let cws: Vec<Vec<Sym>> = msgs.iter().map(|w| encode(g, w).unwrap()).collect();
        let w = linear_combo(g.ring(), &msgs, &alpha).unwrap();
        let c = linear_combo(g.ring(), &cws, &alpha).unwrap();
        prop_assert!(parity_check(g, &w, &c).unwrap());
        prop_assert_eq!(encode(g, &w).unwrap(), c);
    }
}

#[test]
fn generator_matrix_agrees_with_encoder() {
    let g = build_graph(&bundled("q8_R1.0").unwrap(), 300, 4).unwrap();
    let gen = generator_matrix(&g, 1 << 20).unwrap();
    assert_eq!(gen.rows().len(), g.n());
    assert!(gen.rows().iter().all(|r| r.len() == g.k()));
    let w: Vec<Sym> = (0..g.k()).map(|i| (i * 5 % 8) as Sym).collect();
    assert_eq!(gen.apply(&w), encode(&g, &w).unwrap());
}

#[test]
fn zero_message_encodes_to_zero() {
    for g in graphs() {
        let c = encode(g, &vec![0; g.k()]).unwrap();
        assert!(c.iter().all(|&x| x == 0));
    }
}
