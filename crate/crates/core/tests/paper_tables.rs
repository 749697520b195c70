//! Published mBERT and MiniLM matrices, checked through the matrix and
//! report code paths against the orderings and values they report.

use embgeom::{FamilyMap, FamilyReport, LabeledMatrix, MatrixKind};

// Γ, mBERT
const MBERT_GAMMA: &str = "\
lang,ar,bg,de,el,en,es,fr,hi,ru,sw,th,tr,ur,vi,zh\n\
ar,2.455,1.377,1.295,1.427,1.272,1.375,1.278,1.374,1.389,1.119,1.325,1.277,1.384,1.251,0.552\n\
bg,1.377,2.455,1.483,1.519,1.409,1.485,1.43,1.361,1.652,1.121,1.262,1.358,1.232,1.389,0.523\n\
de,1.295,1.483,2.455,1.439,1.595,1.541,1.498,1.297,1.527,1.106,1.144,1.345,1.211,1.398,0.584\n\
el,1.427,1.519,1.439,2.455,1.351,1.498,1.425,1.379,1.475,1.196,1.323,1.364,1.273,1.456,0.539\n\
en,1.272,1.409,1.595,1.351,2.455,1.59,1.574,1.236,1.495,1.048,1.096,1.283,1.173,1.473,0.606\n\
es,1.375,1.485,1.541,1.498,1.59,2.455,1.592,1.272,1.564,1.147,1.197,1.376,1.188,1.451,0.612\n\
fr,1.278,1.43,1.498,1.425,1.574,1.592,2.455,1.266,1.487,1.019,1.197,1.301,1.154,1.423,0.563\n\
hi,1.374,1.361,1.297,1.379,1.236,1.272,1.266,2.455,1.354,1.122,1.263,1.311,1.448,1.302,0.418\n\
ru,1.389,1.652,1.527,1.475,1.495,1.564,1.487,1.354,2.455,1.045,1.226,1.3,1.212,1.447,0.552\n\
sw,1.119,1.121,1.106,1.196,1.048,1.147,1.019,1.122,1.045,2.455,1.167,1.206,1.235,1.143,0.367\n\
th,1.325,1.262,1.144,1.323,1.096,1.197,1.197,1.263,1.226,1.167,2.455,1.214,1.214,1.219,0.364\n\
tr,1.277,1.358,1.345,1.364,1.283,1.376,1.301,1.311,1.3,1.206,1.214,2.455,1.254,1.343,0.563\n\
ur,1.384,1.232,1.211,1.273,1.173,1.188,1.154,1.448,1.212,1.235,1.214,1.254,2.455,1.159,0.392\n\
vi,1.251,1.389,1.398,1.456,1.473,1.451,1.423,1.302,1.447,1.143,1.219,1.343,1.159,2.455,0.593\n\
zh,0.552,0.523,0.584,0.539,0.606,0.612,0.563,0.418,0.552,0.367,0.364,0.563,0.392,0.593,2.455\n\
";

// Φ, mBERT
const MBERT_PHI: &str = "\
lang,ar,bg,de,el,en,es,fr,hi,ru,sw,th,tr,ur,vi,zh\n\
ar,1.0,0.986,0.987,0.985,0.989,0.985,0.988,0.991,0.986,0.991,0.988,0.99,0.991,0.991,0.989\n\
bg,0.986,1.0,0.96,0.963,0.967,0.963,0.966,0.989,0.876,0.983,0.983,0.975,0.994,0.977,0.983\n\
de,0.987,0.96,1.0,0.965,0.904,0.929,0.934,0.989,0.963,0.967,0.975,0.954,0.992,0.957,0.976\n\
el,0.985,0.963,0.965,1.0,0.967,0.952,0.962,0.991,0.979,0.98,0.978,0.969,0.994,0.963,0.984\n\
en,0.989,0.967,0.904,0.967,1.0,0.9,0.905,0.989,0.969,0.968,0.974,0.949,0.992,0.945,0.978\n\
es,0.985,0.963,0.929,0.952,0.9,1.0,0.869,0.99,0.958,0.969,0.978,0.958,0.993,0.952,0.975\n\
fr,0.988,0.966,0.934,0.962,0.905,0.869,1.0,0.99,0.967,0.973,0.978,0.964,0.993,0.953,0.976\n\
hi,0.991,0.989,0.989,0.991,0.989,0.99,0.99,1.0,0.993,0.99,0.991,0.986,0.979,0.989,0.99\n\
ru,0.986,0.876,0.963,0.979,0.969,0.958,0.967,0.993,1.0,0.995,0.993,0.985,0.996,0.982,0.985\n\
sw,0.991,0.983,0.967,0.98,0.968,0.969,0.973,0.99,0.995,1.0,0.974,0.964,0.992,0.971,0.985\n\
th,0.988,0.983,0.975,0.978,0.974,0.978,0.978,0.991,0.993,0.974,1.0,0.971,0.994,0.981,0.96\n\
tr,0.99,0.975,0.954,0.969,0.949,0.958,0.964,0.986,0.985,0.964,0.971,1.0,0.99,0.962,0.966\n\
ur,0.991,0.994,0.992,0.994,0.992,0.993,0.993,0.979,0.996,0.992,0.994,0.99,1.0,0.995,0.995\n\
vi,0.991,0.977,0.957,0.963,0.945,0.952,0.953,0.989,0.982,0.971,0.981,0.962,0.995,1.0,0.972\n\
zh,0.989,0.983,0.976,0.984,0.978,0.975,0.976,0.99,0.985,0.985,0.96,0.966,0.995,0.972,1.0\n\
";

// Φ, MiniLM
const MINILM_PHI: &str = "\
lang,ar,bg,de,el,en,es,fr,hi,ru,sw,th,tr,ur,vi,zh\n\
ar,1.0,0.821,0.859,0.831,0.814,0.841,0.85,0.893,0.833,0.894,0.871,0.895,0.887,0.89,0.911\n\
bg,0.821,1.0,0.685,0.684,0.681,0.687,0.726,0.876,0.536,0.883,0.898,0.833,0.895,0.868,0.927\n\
de,0.859,0.685,1.0,0.764,0.615,0.703,0.712,0.884,0.707,0.874,0.896,0.817,0.899,0.863,0.919\n\
el,0.831,0.684,0.764,1.0,0.726,0.704,0.726,0.892,0.742,0.895,0.916,0.867,0.912,0.859,0.95\n\
en,0.814,0.681,0.615,0.726,1.0,0.602,0.634,0.847,0.71,0.847,0.882,0.787,0.872,0.787,0.912\n\
es,0.841,0.687,0.703,0.704,0.602,1.0,0.576,0.895,0.746,0.855,0.918,0.84,0.908,0.833,0.943\n\
fr,0.85,0.726,0.712,0.726,0.634,0.576,1.0,0.899,0.764,0.871,0.921,0.858,0.913,0.853,0.945\n\
hi,0.893,0.876,0.884,0.892,0.847,0.895,0.899,1.0,0.875,0.937,0.911,0.859,0.696,0.922,0.931\n\
ru,0.833,0.536,0.707,0.742,0.71,0.746,0.764,0.875,1.0,0.905,0.89,0.84,0.908,0.874,0.902\n\
sw,0.894,0.883,0.874,0.895,0.847,0.855,0.871,0.937,0.905,1.0,0.922,0.894,0.932,0.905,0.946\n\
th,0.871,0.898,0.896,0.916,0.882,0.918,0.921,0.911,0.89,0.922,1.0,0.887,0.939,0.901,0.732\n\
tr,0.895,0.833,0.817,0.867,0.787,0.84,0.858,0.859,0.84,0.894,0.887,1.0,0.882,0.891,0.896\n\
ur,0.887,0.895,0.899,0.912,0.872,0.908,0.913,0.696,0.908,0.932,0.939,0.882,1.0,0.933,0.955\n\
vi,0.89,0.868,0.863,0.859,0.787,0.833,0.853,0.922,0.874,0.905,0.901,0.891,0.933,1.0,0.94\n\
zh,0.911,0.927,0.919,0.95,0.912,0.943,0.945,0.931,0.902,0.946,0.732,0.896,0.955,0.94,1.0\n\
";

fn table(text: &str, kind: MatrixKind) -> LabeledMatrix {
    LabeledMatrix::read_csv(text.as_bytes(), kind)
        .expect("published table parses as a symmetric matrix")
}

fn entry(m: &LabeledMatrix, a: &str, b: &str) -> f64 {
    m.get_by_code(a, b).unwrap()
}

/// Off-diagonal entries of `code`'s row, excluding `skip`.
fn row_except<'a>(
    m: &'a LabeledMatrix,
    code: &'a str,
    skip: &'a [&str],
) -> impl Iterator<Item = f64> + 'a {
    let i = m.index_of(code).unwrap();
    m.codes()
        .iter()
        .enumerate()
        .filter(move |(j, c)| *j != i && !skip.contains(&c.as_str()))
        .map(move |(j, _)| m.get(i, j))
}

fn mbert_report() -> FamilyReport {
    let gamma = table(MBERT_GAMMA, MatrixKind::Gamma);
    let phi = table(MBERT_PHI, MatrixKind::Phi);
    FamilyReport::build(&gamma, &phi, 1.0 / 2.455, &FamilyMap::xnli15()).unwrap()
}

#[test]
fn mbert_gamma_diagonal_is_constant() {
    let gamma = table(MBERT_GAMMA, MatrixKind::Gamma);
    assert_eq!(gamma.size(), 15);
    for i in 0..15 {
        assert_eq!(gamma.get(i, i), 2.455);
    }
}

#[test]
fn mbert_gamma_orderings() {
    let gamma = table(MBERT_GAMMA, MatrixKind::Gamma);
    assert_eq!(entry(&gamma, "en", "de"), 1.595);
    assert_eq!(entry(&gamma, "en", "sw"), 1.048);
    assert!(entry(&gamma, "en", "de") > entry(&gamma, "en", "sw"));
    assert_eq!(entry(&gamma, "hi", "ur"), 1.448);
    assert_eq!(entry(&gamma, "hi", "zh"), 0.418);
    assert!(entry(&gamma, "hi", "ur") > entry(&gamma, "hi", "zh"));
}

#[test]
fn hindustani_intra_gamma_is_the_single_pair() {
    let report = mbert_report();
    let hindustani = report.family("Hindustani").unwrap();
    assert_eq!(hindustani.languages, ["hi", "ur"]);
    assert_eq!(hindustani.intra_gamma_mean, Some(1.448));
    assert_eq!(report.family("Chinese").unwrap().intra_gamma_mean, None);
}

#[test]
fn swahili_trails_the_non_chinese_languages() {
    let report = mbert_report();
    let ranking: Vec<&str> = report
        .gamma_ranking
        .iter()
        .map(|l| l.code.as_str())
        .filter(|&c| c != "zh")
        .collect();
    assert!(ranking[..2].contains(&"sw"), "ranking {ranking:?}");
    assert_eq!(report.gamma_ranking[0].code, "zh");
}

#[test]
fn slavic_pair_is_least_separable_for_bulgarian() {
    let phi = table(MBERT_PHI, MatrixKind::Phi);
    let bg_ru = entry(&phi, "bg", "ru");
    assert_eq!(bg_ru, 0.876);
    assert!(row_except(&phi, "bg", &["ru"]).all(|v| v > bg_ru));
}

#[test]
fn hindustani_pair_is_least_separable_for_urdu() {
    let phi = table(MBERT_PHI, MatrixKind::Phi);
    let ur_hi = entry(&phi, "ur", "hi");
    assert_eq!(ur_hi, 0.979);
    assert!(row_except(&phi, "ur", &["hi"]).all(|v| v >= 0.99));
}

#[test]
fn romance_pair_is_among_lowest_minilm_phi() {
    let phi = table(MINILM_PHI, MatrixKind::Phi);
    let es_fr = entry(&phi, "es", "fr");
    assert_eq!(es_fr, 0.576);
    let mut off: Vec<f64> = (0..15)
        .flat_map(|i| (i + 1..15).map(move |j| (i, j)))
        .map(|(i, j)| phi.get(i, j))
        .collect();
    off.sort_by(f64::total_cmp);
    let rank = off.iter().position(|&v| v == es_fr).unwrap();
    assert!(rank < 3, "es-fr ranks {rank} of {}", off.len());
}

#[test]
fn mbert_es_fr_is_below_median_phi() {
    let phi = table(MBERT_PHI, MatrixKind::Phi);
    let mut off: Vec<f64> = (0..15)
        .flat_map(|i| (i + 1..15).map(move |j| (i, j)))
        .map(|(i, j)| phi.get(i, j))
        .collect();
    off.sort_by(f64::total_cmp);
    assert!(entry(&phi, "es", "fr") < off[off.len() / 2]);
}
