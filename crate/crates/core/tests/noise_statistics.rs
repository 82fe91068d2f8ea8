use sfde_core::noise::NoiseGrid;
use sfde_core::stats;
use sfde_core::tolerances::KS_SIGNIFICANCE;

const SEEDS: u64 = 98;

fn level10_increments(horizon: f64, coord: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for seed in 0..SEEDS {
        let g = NoiseGrid::generate(m, horizon, 10, seed).unwrap();
        out.extend((0..g.cells()).map(|j| g.point(j + 1)[coord] - g.point(j)[coord]));
    }
    out
}

#[test]
fn increment_variance_matches_spacing() {
    let t = 2.0;
    for coord in 0..2 {
        let inc = level10_increments(t, coord, 2);
        assert!(inc.len() >= 100_000);
        let var = stats::variance(&inc);
        let target = t / 1024.0;
        assert!(var >= 0.9 * target && var <= 1.1 * target, "coord {coord}: {var} vs {target}");
    }
}

#[test]
fn increments_are_gaussian() {
    let t = 1.0;
    let scale = (1024.0f64 / t).sqrt();
    let z: Vec<f64> = level10_increments(t, 0, 1).iter().map(|x| x * scale).collect();
    let (d, p) = stats::ks_standard_normal(&z);
    assert!(p > KS_SIGNIFICANCE, "KS D = {d}, p = {p}");
}

#[test]
fn bridge_children_are_uncorrelated_halves() {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut delta = 0.0;
    for seed in 0..SEEDS {
        let coarse = NoiseGrid::generate(1, 1.0, 10, seed).unwrap();
        delta = coarse.spacing();
        let fine = coarse.refine();
        for j in 0..coarse.cells() {
            let (a, mid, b) = (fine.point(2 * j)[0], fine.point(2 * j + 1)[0], fine.point(2 * j + 2)[0]);
            left.push(mid - a);
            right.push(b - mid);
        }
    }
    assert!(left.len() >= 100_000);
    let half = 0.5 * delta;
    for v in [stats::variance(&left), stats::variance(&right)] {
        assert!((v / half - 1.0).abs() <= 0.1, "{v} vs {half}");
    }
    let (ml, mr) = (stats::mean(&left), stats::mean(&right));
    let cov = stats::mean(&left.iter().zip(&right).map(|(a, b)| (a - ml) * (b - mr)).collect::<Vec<_>>());
    assert!(cov.abs() <= 0.1 * half, "cov {cov}");
}

#[test]
fn refinement_children_sum_to_parent() {
    let coarse = NoiseGrid::generate(2, 3.0, 6, 17).unwrap();
    let fine = coarse.refine().refine();
    let agg = fine.increments_at_level(6).unwrap();
    for j in 0..coarse.cells() {
        for c in 0..2 {
            let parent = coarse.point(j + 1)[c] - coarse.point(j)[c];
            assert!((agg[j * 2 + c] - parent).abs() <= 1e-14);
        }
    }
}
