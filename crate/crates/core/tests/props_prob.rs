//! Sub-distribution arithmetic properties: mass preservation under images,
//! and lifting decided with recombination-exact witnesses.

mod common;

use common::{runner, TOL};

use proptest::collection::vec;
use proptest::prelude::*;

use wnet_core::prob::{
    lift_check_elements, lift_check_subdist, product_image, SubDistribution,
};

/// A random sub-distribution over small integers; mass lands in (0, 1] and
/// is exactly 1 for roughly a third of the cases.
fn subdist() -> BoxedStrategy<SubDistribution<u32>> {
    (
        vec((0u32..6, 1u32..=100), 1..5),
        prop_oneof![2 => (1u32..=9).prop_map(|t| t as f64 / 10.0), 1 => Just(1.0)],
    )
        .prop_map(|(raw, mass)| {
            let total: u32 = raw.iter().map(|(_, w)| w).sum();
            SubDistribution::from_entries(
                raw.iter()
                    .map(|(k, w)| (*k, *w as f64 / total as f64 * mass)),
            )
            .expect("mass stays within 1")
        })
        .boxed()
}

fn small_fn() -> BoxedStrategy<Vec<u32>> {
    // a total function 0..6 -> 0..4, tabulated
    vec(0u32..4, 6).boxed()
}

#[test]
fn images_preserve_mass() {
    runner(0x11, 220)
        .run(&(subdist(), subdist(), small_fn()), |(d1, d2, table)| {
            let mapped = d1.map_image(|k| table[*k as usize]);
            prop_assert!((mapped.mass() - d1.mass()).abs() <= TOL);

            let product = product_image(|a: &u32, b: &u32| (*a, *b), &d1, &d2);
            prop_assert!((product.mass() - d1.mass() * d2.mass()).abs() <= TOL);

            // the marginals of an independent product are the two factors
            let left = product.map_image(|(a, _)| *a);
            prop_assert!(left.approx_eq(&d1.scale(d2.mass()), 1e-7));
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn lifting_along_a_function_succeeds_and_recombines() {
    runner(0x12, 220)
        .run(&(subdist(), small_fn()), |(d, table)| {
            let f = |k: &u32| table[*k as usize];
            let image = d.map_image(f);
            let rel: Vec<(u32, u32)> = (0u32..6).map(|k| (k, f(&k))).collect();
            let witness = lift_check_elements(&rel, &d, &image, TOL);
            let witness = match witness {
                Some(w) => w,
                None => return Err(TestCaseError::fail("expected lifting to hold")),
            };
            // recombination reproduces both sides exactly
            prop_assert!(witness.certifies(&d, &image, 1e-7));
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn lifting_under_the_identity_accepts_exactly_equal_distributions() {
    runner(0x13, 220)
        .run(&(subdist(), subdist()), |(d1, d2)| {
            let rel: Vec<(u32, u32)> = (0u32..6).map(|k| (k, k)).collect();
            let same = lift_check_elements(&rel, &d1, &d2, TOL).is_some();
            prop_assert_eq!(same, d1.approx_eq(&d2, TOL));
            if let Some(w) = lift_check_elements(&rel, &d1, &d1, TOL) {
                prop_assert!(w.certifies(&d1, &d1, 1e-7));
            } else {
                return Err(TestCaseError::fail("identity lifting must be reflexive"));
            }
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}

/// Rows (s, Θ_s) chosen per support element; the right side is built as the
/// exact weighted recombination, so the lifting must hold and its witness
/// must reproduce both arguments.
#[test]
fn subdistribution_lifting_recombines_its_witness() {
    let rows = vec((0u32..6, subdist()), 1..4);
    runner(0x14, 220)
        .run(&(subdist(), rows), |(d, extra)| {
            // one guaranteed row per support element: s related to Θ_s
            let mut rel: Vec<(u32, SubDistribution<u32>)> = d
                .support()
                .map(|s| (*s, SubDistribution::point(s.wrapping_mul(2) % 6)))
                .collect();
            rel.extend(extra);
            // right = Σ_s d(s) · Θ_first(s) — use the first row of each s
            let mut parts: Vec<SubDistribution<u32>> = Vec::new();
            let mut weights: Vec<f64> = Vec::new();
            for (s, w) in d.iter() {
                let (_, theta) = rel
                    .iter()
                    .find(|(r, _)| r == s)
                    .expect("a row exists for every support element");
                parts.push(theta.clone());
                weights.push(w);
            }
            let refs: Vec<&SubDistribution<u32>> = parts.iter().collect();
            let right =
                SubDistribution::weighted_sum(&weights, &refs).expect("mass bounded by left");
            let witness = match lift_check_subdist(&rel, &d, &right, 1e-7) {
                Some(w) => w,
                None => return Err(TestCaseError::fail("expected lifting to hold")),
            };
            prop_assert!(witness.certifies(&d, &right, 1e-6));
            // mass monotonicity: |left| >= |right| on success
            prop_assert!(d.mass() + TOL >= right.mass());
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}

/// Any sub-distribution is lift-related to ε once the relation pairs every
/// support element with ε.
#[test]
fn everything_lifts_to_the_empty_subdistribution() {
    runner(0x15, 220)
        .run(&subdist(), |d| {
            let rel: Vec<(u32, SubDistribution<u32>)> = d
                .support()
                .map(|s| (*s, SubDistribution::empty()))
                .collect();
            let witness = lift_check_subdist(&rel, &d, &SubDistribution::empty(), TOL);
            let witness = match witness {
                Some(w) => w,
                None => return Err(TestCaseError::fail("Δ lift ε must hold")),
            };
            prop_assert!(witness.certifies(&d, &SubDistribution::empty(), 1e-7));
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}
