//! Aggregation of Γ and Φ matrices by linguistic family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::FamilyMap;
use crate::matrix::LabeledMatrix;
use crate::sum;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("family map has no entry for: {}", .0.join(", "))]
    MissingFamilies(Vec<String>),
    #[error("gamma and phi matrices list different languages")]
    CodeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub family: String,
    pub languages: Vec<String>,
    /// Mean over distinct-language pairs; `None` for singleton families.
    pub intra_gamma_mean: Option<f64>,
    pub intra_phi_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub inter_family_gamma_mean: Option<f64>,
    pub inter_family_phi_mean: Option<f64>,
    pub anisotropy: f64,
}

/// Mean off-diagonal Γ of one language. A derived diagnostic, not one of
/// the published metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageGamma {
    pub code: String,
    pub mean_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub families: Vec<FamilyStats>,
    pub global: GlobalStats,
    /// Ascending by mean off-diagonal Γ, ties by code.
    pub gamma_ranking: Vec<LanguageGamma>,
}

fn pair_means(m: &LabeledMatrix, families: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n_fam = families.iter().copied().max().map_or(0, |x| x + 1);
    let mut intra = vec![Vec::new(); n_fam];
    let mut inter = Vec::new();
    for i in 0..m.size() {
        for j in i + 1..m.size() {
            if families[i] == families[j] {
                intra[families[i]].push(m.get(i, j));
            } else {
                inter.push(m.get(i, j));
            }
        }
    }
    (intra, inter)
}

impl FamilyReport {
    pub fn build(
        gamma: &LabeledMatrix,
        phi: &LabeledMatrix,
        anisotropy: f64,
        map: &FamilyMap,
    ) -> Result<Self, ReportError> {
        if gamma.codes() != phi.codes() {
            return Err(ReportError::CodeMismatch);
        }
        let codes = gamma.codes();
        let missing = map.missing(codes.iter().map(String::as_str));
        if !missing.is_empty() {
            return Err(ReportError::MissingFamilies(missing));
        }

        // families in order of first appearance
        let mut names: Vec<&str> = Vec::new();
        let mut family_of = Vec::with_capacity(codes.len());
        for code in codes {
            let f = map.family(code).expect("checked above");
            let idx = names.iter().position(|n| *n == f).unwrap_or_else(|| {
                names.push(f);
                names.len() - 1
            });
            family_of.push(idx);
        }

        let (g_intra, g_inter) = pair_means(gamma, &family_of);
        let (p_intra, p_inter) = pair_means(phi, &family_of);
        let families = names
            .iter()
            .enumerate()
            .map(|(fi, name)| FamilyStats {
                family: name.to_string(),
                languages: codes
                    .iter()
                    .zip(&family_of)
                    .filter(|(_, &f)| f == fi)
                    .map(|(c, _)| c.clone())
                    .collect(),
                intra_gamma_mean: sum::mean(&g_intra[fi]),
                intra_phi_mean: sum::mean(&p_intra[fi]),
            })
            .collect();

        let mut gamma_ranking: Vec<LanguageGamma> = (0..codes.len())
            .filter(|_| codes.len() > 1)
            .map(|i| {
                let row: Vec<f64> = (0..codes.len())
                    .filter(|&j| j != i)
                    .map(|j| gamma.get(i, j))
                    .collect();
                LanguageGamma {
                    code: codes[i].clone(),
                    mean_gamma: sum::mean(&row).expect("at least two languages"),
                }
            })
            .collect();
        gamma_ranking.sort_by(|a, b| {
            a.mean_gamma
                .total_cmp(&b.mean_gamma)
                .then_with(|| a.code.cmp(&b.code))
        });

        Ok(Self {
            families,
            global: GlobalStats {
                inter_family_gamma_mean: sum::mean(&g_inter),
                inter_family_phi_mean: sum::mean(&p_inter),
                anisotropy,
            },
            gamma_ranking,
        })
    }

    /// Copy with every real value rounded to `digits` decimals.
    pub fn rounded(&self, digits: u32) -> Self {
        let scale = 10f64.powi(digits as i32);
        let r = |v: f64| (v * scale).round() / scale;
        let mut out = self.clone();
        for f in &mut out.families {
            f.intra_gamma_mean = f.intra_gamma_mean.map(r);
            f.intra_phi_mean = f.intra_phi_mean.map(r);
        }
        out.global.inter_family_gamma_mean = out.global.inter_family_gamma_mean.map(r);
        out.global.inter_family_phi_mean = out.global.inter_family_phi_mean.map(r);
        out.global.anisotropy = r(out.global.anisotropy);
        for l in &mut out.gamma_ranking {
            l.mean_gamma = r(l.mean_gamma);
        }
        out
    }

    pub fn family(&self, name: &str) -> Option<&FamilyStats> {
        self.families.iter().find(|f| f.family == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixKind;

    fn matrix(kind: MatrixKind, codes: &[&str], rows: &[&[f64]]) -> LabeledMatrix {
        LabeledMatrix::new(
            kind,
            codes.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn small() -> (LabeledMatrix, LabeledMatrix) {
        let codes = ["en", "de", "sw"];
        let g = matrix(
            MatrixKind::Gamma,
            &codes,
            &[&[2.0, 1.5, 1.0], &[1.5, 2.0, 1.2], &[1.0, 1.2, 2.0]],
        );
        let p = matrix(
            MatrixKind::Phi,
            &codes,
            &[&[1.0, 0.6, 0.9], &[0.6, 1.0, 0.95], &[0.9, 0.95, 1.0]],
        );
        (g, p)
    }

    #[test]
    fn family_means_and_singletons() {
        let (g, p) = small();
        let r = FamilyReport::build(&g, &p, 0.5, &FamilyMap::xnli15()).unwrap();
        let germanic = r.family("Germanic").unwrap();
        assert_eq!(germanic.languages, vec!["en", "de"]);
        assert_eq!(germanic.intra_gamma_mean, Some(1.5));
        assert_eq!(germanic.intra_phi_mean, Some(0.6));
        let nc = r.family("Niger-Congo").unwrap();
        assert_eq!(nc.intra_gamma_mean, None);
        assert_eq!(r.global.inter_family_gamma_mean, Some(1.1));
        assert_eq!(r.global.inter_family_phi_mean, Some(0.925));
        let order: Vec<_> = r.gamma_ranking.iter().map(|l| l.code.as_str()).collect();
        assert_eq!(order, vec!["sw", "en", "de"]);
    }

    #[test]
    fn missing_family_is_named() {
        let (g, p) = small();
        let mut map = FamilyMap::xnli15();
        map.remove("sw");
        assert_eq!(
            FamilyReport::build(&g, &p, 0.5, &map),
            Err(ReportError::MissingFamilies(vec!["sw".into()]))
        );
    }

    #[test]
    fn rounding() {
        let (g, p) = small();
        let r = FamilyReport::build(&g, &p, 0.40733, &FamilyMap::xnli15()).unwrap();
        assert_eq!(r.rounded(3).global.anisotropy, 0.407);
    }
}
