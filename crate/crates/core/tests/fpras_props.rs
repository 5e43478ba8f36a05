mod common;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use common::{approx_instance, rng};
use repcount_core::fpras::{hom_images, karp_luby_count, ApproxParams, KarpLuby};
use repcount_core::model::entails;
use repcount_core::repair::{enumerate_repairs, DEFAULT_ORACLE_CAP};

#[test]
fn each_entailing_repair_is_scored_by_exactly_its_first_image() {
    let mut r = rng(0xCA11);
    for _ in 0..60 {
        let (db, sigma, q, hits) = approx_instance(&mut r);
        let images = hom_images(&q, &db, &sigma);
        let kl = KarpLuby::new(&db, &sigma, &q, None).unwrap();
        let reps = enumerate_repairs(&db, &sigma, DEFAULT_ORACLE_CAP).unwrap();
        let mut weights = vec![0usize; images.len()];
        let mut scored = vec![0usize; images.len()];
        let mut union = 0usize;
        for rep in &reps {
            let containing: Vec<usize> = (0..images.len())
                .filter(|&i| images[i].facts.is_subset(rep.fact_set()))
                .collect();
            for &i in &containing {
                weights[i] += 1;
            }
            assert_eq!(!containing.is_empty(), entails(rep, &q));
            if let Some(&first) = containing.first() {
                union += 1;
                scored[first] += 1;
            }
        }
        let expected: Vec<BigUint> = weights.iter().map(|&w| BigUint::from(w)).collect();
        assert_eq!(kl.weights(), &expected[..]);
        assert_eq!(BigUint::from(union), hits);
        // E[S * 1{canonical}] = sum_i (w_i / S) * (scored_i / w_i) * S = sum_i scored_i
        assert_eq!(scored.iter().sum::<usize>(), union);
        assert!(scored.iter().zip(&weights).all(|(s, w)| s <= w));
    }
}

#[test]
fn trial_success_rate_matches_the_canonical_fraction() {
    let mut r = rng(0x7A1);
    let (db, sigma, q, hits) = approx_instance(&mut r);
    let kl = KarpLuby::new(&db, &sigma, &q, None).unwrap();
    let total = kl.total_weight().to_f64().unwrap();
    let p = hits.to_f64().unwrap() / total;
    let n = 40_000;
    let (mut scratch, mut bits) = (Vec::new(), Vec::new());
    let successes = (0..n).filter(|_| kl.trial(&mut r, &mut scratch, &mut bits)).count() as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((successes / n as f64 - p).abs() < 5.0 * sd + 1e-9, "rate {} vs {p}", successes / n as f64);
}

#[test]
fn estimates_are_within_epsilon_most_of_the_time() {
    let mut r = rng(0xE5);
    for _ in 0..4 {
        let (db, sigma, q, hits) = approx_instance(&mut r);
        let kl = KarpLuby::new(&db, &sigma, &q, None).unwrap();
        let truth = hits.to_f64().unwrap();
        let failures = (0..100)
            .filter(|&seed| {
                let est = kl.run(&ApproxParams::new(0.25, 0.1, seed).unwrap());
                (est.raw.to_f64().unwrap() - truth).abs() > 0.25 * truth
            })
            .count();
        assert!(failures <= 12, "{failures} failures out of 100");
    }
}

#[test]
fn runs_are_reproducible() {
    let mut r = rng(0x12);
    let (db, sigma, q, _) = approx_instance(&mut r);
    let params = ApproxParams::new(0.3, 0.2, 99).unwrap();
    assert_eq!(
        karp_luby_count(&db, &sigma, &q, &params).unwrap(),
        karp_luby_count(&db, &sigma, &q, &params).unwrap()
    );
}
