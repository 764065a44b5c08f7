use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use soergel::bimodule::{FreeBimodule, GramData, BSWord};
use soergel::coxeter::CoxeterSystem;
use soergel::hecke::{HeckeElt, KLTable};
use soergel::laurent::LaurentPoly;
use soergel::perverse::ModelCache;
use soergel::realization::{PolyElt, Realization};

fn b3() -> &'static KLTable {
    static T: OnceLock<KLTable> = OnceLock::new();
    T.get_or_init(|| KLTable::for_system(&CoxeterSystem::preset("B3").unwrap(), None).unwrap())
}

fn product(kl: &KLTable, a: &HeckeElt, y: usize) -> HeckeElt {
    kl.kl_mul(a, y).unwrap()
}

fn poly(r: &Realization, terms: &[(u32, u32, u32, i64)]) -> PolyElt {
    let f = r.field();
    PolyElt::from_terms(f, terms.iter().map(|&(a, b, c, k)| (vec![a, b, c], f.int(k))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_are_associative(x in 0usize..48, y in 0usize..48, z in 0usize..48) {
        let kl = b3();
        let left = product(kl, &product(kl, &HeckeElt::basis(x), y), z);
        let mut right = HeckeElt::zero();
        for (w, p) in product(kl, &HeckeElt::basis(y), z).terms() {
            right.add_assign(&product(kl, &HeckeElt::basis(x), w).scale(p));
        }
        prop_assert_eq!(left, right);
    }

    #[test]
    fn inversion_reverses_products(x in 0usize..48, y in 0usize..48) {
        let kl = b3();
        let t = kl.table();
        let direct = kl.mu(x, y).unwrap();
        let reversed: BTreeMap<usize, LaurentPoly> =
            kl.mu(t.inverse(y), t.inverse(x)).unwrap().into_iter().map(|(z, p)| (t.inverse(z), p)).collect();
        prop_assert_eq!(direct, reversed);
    }

    #[test]
    fn products_specialize_to_ranks(x in 0usize..48, y in 0usize..48) {
        // at v = 1 the rank of C_x C_y is the product of the ranks
        let kl = b3();
        let rank = |w: usize| -> i64 { kl.kl_basis(w).terms().map(|(_, p)| p.eval_one().to_i64().unwrap()).sum() };
        let lhs: i64 = kl.mu(x, y).unwrap().iter().map(|(z, p)| p.eval_one().to_i64().unwrap() * rank(*z)).sum();
        prop_assert_eq!(lhs, rank(x) * rank(y));
    }

    #[test]
    fn demazure_twisted_leibniz(
        f in prop::collection::vec((0u32..4, 0u32..4, 0u32..4, -5i64..6), 1..5),
        g in prop::collection::vec((0u32..4, 0u32..4, 0u32..4, -5i64..6), 1..5),
        s in 0usize..3,
    ) {
        let r = Realization::new(&CoxeterSystem::preset("H3").unwrap()).unwrap();
        let (f, g) = (poly(&r, &f), poly(&r, &g));
        let lhs = r.demazure(s, &(&f * &g));
        let rhs = &(&r.demazure(s, &f) * &g) + &(&r.act_gen(s, &f) * &r.demazure(s, &g));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn free_model_gram_matches_element_level(word in prop::collection::vec(0u8..2, 1..5)) {
        let r = Realization::new(&CoxeterSystem::preset("B2").unwrap()).unwrap();
        let model = FreeBimodule::bott_samelson(&r, &word);
        let g = GramData::compute(&r, &BSWord::new(word.clone(), 2).unwrap());
        let d = word.len();
        prop_assert_eq!(model.rank(), 1 << d);
        // the model puts ε_1 in the top bit, masks put it in bit 0
        let mask = |i: usize| (i as u32).reverse_bits() as usize >> (32 - d);
        for i in 0..model.rank() {
            prop_assert_eq!(model.degrees()[i], g.degrees[mask(i)]);
            for j in 0..model.rank() {
                prop_assert_eq!(model.gram().get(i, j), &g.entries[mask(i)][mask(j)]);
            }
        }
    }
}

#[test]
fn decompositions_in_b3_match_characters() {
    let kl = b3();
    let t = kl.table().clone();
    let mut cache = ModelCache::new(kl).unwrap();
    for (x, y) in [("1", "1"), ("12", "21"), ("123", "3"), ("2", "232"), ("121", "12")] {
        let (x, y) = (t.parse(x).unwrap(), t.parse(y).unwrap());
        let d = cache.decompose(&[x, y]).unwrap();
        assert!(d.is_complete());
        let expected: BTreeMap<usize, BTreeMap<i32, usize>> = kl
            .graded_multiplicities(x, y)
            .unwrap()
            .into_iter()
            .map(|(z, m)| (z, m.into_iter().map(|(i, c)| (i, c.to_i64().unwrap() as usize)).collect()))
            .collect();
        assert_eq!(d.multiplicities(), expected, "{} {}", t.text(x), t.text(y));
    }
}
