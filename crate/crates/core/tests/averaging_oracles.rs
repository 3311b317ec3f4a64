use linkmse::averaging::joint_exact_check;
use linkmse::compare::{CandidateSets, ComparisonVector, LevelTallies};
use linkmse::histories::ContingencyTable;
use linkmse::linkage::TruncationPoints;
use linkmse::mse_graphical::{
    enumerate_decomposable, posterior_n_given_m, PriorCounts, SizePrior, SizePriorKind,
};
use statrs::function::gamma::ln_gamma;

fn sets(r: usize, levels: &[u8], pairs: &[(usize, usize, Vec<u8>)], fixed: Vec<Vec<u64>>) -> CandidateSets {
    let mut tallies = LevelTallies::zeros(levels);
    tallies.counts = fixed;
    CandidateSets {
        num_records: r,
        field_names: (0..levels.len()).map(|f| format!("f{f}")).collect(),
        levels_per_field: levels.to_vec(),
        num_compared: pairs.len() as u64,
        candidates: pairs
            .iter()
            .map(|(i, j, g)| ComparisonVector { i: *i, j: *j, levels: g.iter().map(|&l| Some(l)).collect() })
            .collect(),
        fixed_pairs: 0,
        fixed: tallies,
        components: Vec::new(),
    }
}

fn independence(table: &ContingencyTable) -> linkmse::Result<linkmse::mse_graphical::SizePosterior> {
    let m = &enumerate_decomposable(table.k())?[0];
    let alpha = PriorCounts::constant(table.k(), 1.0)?;
    posterior_n_given_m(table, m, &alpha, &SizePrior { kind: SizePriorKind::Reciprocal, n_max: 60 })
}

#[test]
fn theorem_identity_on_tiny_instances() {
    let battery = vec![
        (sets(2, &[1], &[(0, 1, vec![0])], vec![vec![1, 6]]), vec![0, 1], 2),
        (sets(3, &[1], &[(0, 1, vec![0]), (0, 2, vec![1]), (1, 2, vec![0])], vec![vec![2, 9]]), vec![0, 1, 1], 2),
        (
            sets(
                4,
                &[2, 1],
                &[(0, 1, vec![0, 0]), (0, 2, vec![1, 0]), (1, 3, vec![2, 1]), (2, 3, vec![0, 1]), (1, 2, vec![1, 1])],
                vec![vec![1, 3, 15], vec![6, 13]],
            ),
            vec![0, 1, 2, 2],
            3,
        ),
    ];
    for (s, membership, k) in &battery {
        let lambda = TruncationPoints::new(
            s.levels_per_field.iter().map(|&l| vec![0.4; l as usize]).collect(),
            &s.levels_per_field,
        )
        .unwrap();
        let check = joint_exact_check(s, &lambda, membership, *k, independence).unwrap();
        assert!(check.sup_distance < 1e-12, "{}", check.sup_distance);
        assert!((check.p_la.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn single_partition_reduces_to_its_conditional() {
    // no candidate pairs: only the all-singleton partition is feasible
    let s = sets(3, &[1], &[], vec![vec![0, 3]]);
    let check = joint_exact_check(&s, &TruncationPoints::flat(&[1]), &[0, 1, 1], 2, independence).unwrap();
    let t = ContingencyTable::from_counts(2, [(0b01, 1), (0b10, 2)]).unwrap();
    assert_eq!(check.p_la, independence(&t).unwrap());
}

#[test]
fn three_records_hand_expansion() {
    // records: a in list 1, b and c in list 2; all pairs are candidates with
    // one binary field and flat priors
    let levels = [(0usize, 1usize, 0u8), (0, 2, 1), (1, 2, 0)];
    let pairs: Vec<_> = levels.iter().map(|&(i, j, l)| (i, j, vec![l])).collect();
    let s = sets(3, &[1], &pairs, vec![vec![1, 4]]);
    let check = joint_exact_check(&s, &TruncationPoints::flat(&[1]), &[0, 1, 1], 2, independence).unwrap();

    // partitions: {a}{b}{c}, {ab}{c}, {ac}{b}, {a}{bc}, {abc}
    let lnb = |a: f64, b: f64| ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0);
    // (linked agree, linked disagree) for each partition; the rest join the
    // fixed non-coreferent tallies (1 agree, 4 disagree)
    let linked: [(f64, f64); 5] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (2.0, 1.0)];
    let weights: Vec<f64> = linked
        .iter()
        .map(|&(la, ld)| {
            let (ua, ud) = (1.0 + 2.0 - la, 4.0 + 1.0 - ld);
            (lnb(la, ld) + lnb(ua, ud)).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    // capture histories (n10, n01, n11) per partition
    let tables = [
        [(0b01, 1), (0b10, 2), (0b11, 0)],
        [(0b01, 0), (0b10, 1), (0b11, 1)],
        [(0b01, 0), (0b10, 1), (0b11, 1)],
        [(0b01, 1), (0b10, 1), (0b11, 0)],
        [(0b01, 0), (0b10, 0), (0b11, 1)],
    ];
    // two independent lists with Beta(2,2) capture probabilities, p(N) ∝ 1/N
    let cond = |t: &[(u32, u64); 3]| {
        let (n1, n2, n12) = (t[0].1 as f64, t[1].1 as f64, t[2].1 as f64);
        let obs = n1 + n2 + n12;
        let (c1, c2) = (n1 + n12, n2 + n12);
        let lnbeta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        let logs: Vec<f64> = (obs.max(1.0) as u64..=60)
            .map(|n| {
                let nf = n as f64;
                ln_gamma(nf + 1.0) - ln_gamma(nf - obs + 1.0) - nf.ln()
                    + lnbeta(2.0 + c1, 2.0 + nf - c1)
                    + lnbeta(2.0 + c2, 2.0 + nf - c2)
            })
            .collect();
        let z: f64 = logs.iter().map(|l| l.exp()).sum();
        let start = obs.max(1.0) as u64;
        move |n: u64| if n < start { 0.0 } else { logs[(n - start) as usize].exp() / z }
    };
    let conds: Vec<_> = tables.iter().map(cond).collect();
    for n in 1..=60u64 {
        let oracle: f64 = conds.iter().zip(&weights).map(|(c, w)| c(n) * w / total).sum();
        assert!((check.p_la.prob(n) - oracle).abs() < 1e-12, "N={n}");
    }
}
