use cascade_core::coverage::CoverageModel;
use cascade_core::env::{
    event_string_probs, sample_outcome_dependent, sample_outcome_independent, sample_round_independent, DependentEnv,
    DependentSpec, IndependentEnv, Scenario, SyntheticSpec, Truth,
};
use cascade_core::math::sigmoid;
use cascade_core::rng::stream;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: usize = 100_000;

fn spec(u: Vec<f64>, cap: f64) -> SyntheticSpec {
    SyntheticSpec {
        u,
        items_per_round: 10,
        budget: 4,
        horizon: 50,
        seed: 17,
        slab_cap: cap,
        catalog_size: None,
    }
}

#[test]
fn bernoulli_frequencies_are_within_three_sigma() {
    let probs = [0.03, 0.5, 0.81, 0.999];
    let mut rng = stream(5, 2);
    let mut hits = [0usize; 4];
    for _ in 0..DRAWS {
        let y = sample_outcome_independent(&probs, &mut rng);
        for (h, &b) in hits.iter_mut().zip(y.bits()) {
            *h += b as usize;
        }
    }
    for (h, p) in hits.iter().zip(probs) {
        let sd = (p * (1.0 - p) / DRAWS as f64).sqrt();
        assert!((*h as f64 / DRAWS as f64 - p).abs() <= 3.0 * sd, "p = {p}");
    }
}

#[test]
fn sampled_item_success_frequency_matches_its_probability() {
    let s = spec(vec![0.8, -0.4, 0.3], 1.0);
    let mut rng = stream(9, 1);
    let round = sample_round_independent(&s, Scenario::Vanilla.profile(4).unwrap(), &mut rng, 1).unwrap();
    let Truth::Independent(probs) = round.truth else {
        panic!("independent truth expected")
    };
    let mut outcomes = stream(9, 2);
    let hits = (0..DRAWS)
        .filter(|_| sample_outcome_independent(&probs, &mut outcomes).bits()[0])
        .count();
    let p = probs[0];
    let sd = (p * (1.0 - p) / DRAWS as f64).sqrt();
    assert!((hits as f64 / DRAWS as f64 - p).abs() <= 3.0 * sd);
}

#[test]
fn aligned_item_attains_the_cap() {
    let cap = 1.5;
    let u = [0.9, 1.2, 0.0];
    let x: Vec<f64> = u.iter().map(|v| v / cap).collect();
    let p = sigmoid(u.iter().zip(&x).map(|(a, b)| a * b).sum());
    assert!((p - sigmoid(cap)).abs() < 1e-12);
}

#[test]
fn synthetic_probabilities_stay_strictly_inside_the_link_range() {
    let cap = 1.0;
    let mut env = IndependentEnv::new(spec(vec![0.6, 0.8, 0.0], cap), Scenario::Exponential).unwrap();
    while let Some(round) = env.next_round() {
        let Truth::Independent(probs) = round.unwrap().truth else {
            unreachable!()
        };
        assert!(probs.iter().all(|&p| p > sigmoid(-cap) && p < sigmoid(cap)));
    }
}

#[test]
fn environment_streams_are_bit_reproducible() {
    let collect_ind = || {
        let mut env = IndependentEnv::new(spec(vec![0.1, 0.2, 0.3], 1.0), Scenario::Vanilla).unwrap();
        std::iter::from_fn(|| env.next_round())
            .map(Result::unwrap)
            .collect::<Vec<_>>()
    };
    assert_eq!(collect_ind(), collect_ind());
    let dep_spec = DependentSpec {
        u: vec![1.0, 0.5, 0.25, 2.0],
        catalog_size: 30,
        items_per_round: 8,
        budget: 3,
        horizon: 40,
        seed: 23,
        topic_sharpness: 2.0,
    };
    let collect_dep = || {
        let mut env = DependentEnv::new(dep_spec.clone(), Scenario::Exponential).unwrap();
        std::iter::from_fn(|| env.next_round())
            .map(Result::unwrap)
            .collect::<Vec<_>>()
    };
    assert_eq!(collect_dep(), collect_dep());
}

#[test]
fn forced_first_success() {
    let coverage = CoverageModel::new(vec![vec![1.0, 1.0], vec![0.5, 0.5], vec![0.2, 0.1]]).unwrap();
    let mut rng = stream(1, 3);
    let firsts = (0..10_000)
        .filter(|_| {
            sample_outcome_dependent(&coverage, &[40.0, 40.0], &[0, 1, 2], &mut rng)
                .unwrap()
                .observed()
                == [true]
        })
        .count();
    assert!(firsts as f64 / 10_000.0 >= 0.999);
}

#[test]
fn event_strings_follow_the_product_formulas() {
    let coverage = CoverageModel::new(vec![vec![0.6, 0.1, 0.3], vec![0.2, 0.7, 0.4], vec![0.5, 0.5, 0.1]]).unwrap();
    let u = [1.2, 0.4, 0.8];
    let played = [1, 0, 2];
    let expected = event_string_probs(&coverage, &u, &played);
    assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut counts = [0usize; 4];
    let mut rng = stream(11, 3);
    for _ in 0..DRAWS {
        let fb = sample_outcome_dependent(&coverage, &u, &played, &mut rng).unwrap();
        let cell = if fb.terminated_by_success() {
            fb.len() - 1
        } else {
            played.len()
        };
        counts[cell] += 1;
    }
    let n = DRAWS as f64;
    let mut chi2 = 0.0;
    for (c, p) in counts.iter().zip(&expected) {
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - n * p).abs() <= 3.0 * sd, "{counts:?} vs {expected:?}");
        chi2 += (*c as f64 - n * p).powi(2) / (n * p);
    }
    let p_value = 1.0 - ChiSquared::new(3.0).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi-square {chi2}, p = {p_value}");
}
