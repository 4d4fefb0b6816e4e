//! Published spin-squeezing experiments and the sample sizes they would need.
//!
//! The builtin entries carry only the published integers: system size,
//! measurements performed, and the measurements required for a 5% upper bound
//! on the p-value with `mu_perp = 0` and `mu_perp = 0.1`. The summary
//! statistics behind those requirements were not published, so recomputing
//! them needs user-supplied summaries.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{required_m_bernstein_c, TangentSearch};
use crate::error::{Error, Result};
use crate::estimators::{wineland_xi2, SummaryForm, SummaryGamma};
use crate::lowerbound::LowerBoundModel;
use crate::model::ExperimentEntry;

/// (author, year, citation key, N, measurements, M(mu_perp = 0), M(mu_perp = 0.1))
const PUBLISHED: [(&str, u32, &str, u32, u64, u64, u64); 19] = [
    ("Meyer", 2001, "meyer2001", 2, 10000, 21200, 23320),
    ("Bornet", 2023, "Bornet2023", 4, 400, 3260, 3668),
    ("Bornet", 2023, "Bornet2023", 9, 400, 4160, 4840),
    ("Franke", 2023, "Franke2023", 12, 1200, 728, 842),
    ("Bornet", 2023, "Bornet2023", 16, 400, 5420, 6420),
    ("Bohnet", 2016, "Bohnet2016", 21, 400, 8800, 10460),
    ("Bornet", 2023, "Bornet2023", 36, 400, 6760, 8080),
    ("Bohnet", 2016, "Bohnet2016", 58, 400, 5340, 6400),
    ("Bornet", 2023, "Bornet2023", 64, 400, 10900, 13040),
    ("Bohnet", 2016, "Bohnet2016", 100, 400, 15600, 18800),
    ("Strobel", 2014, "Strobel2014", 144, 2180, 13000, 15600),
    ("Strobel", 2014, "Strobel2014", 470, 32500, 19970, 24120),
    ("Riedel", 2010, "Riedel2010", 1250, 740, 113800, 137400),
    ("Ockeloen", 2013, "Ockeloen2013", 1400, 240, 145800, 176400),
    ("Schleier-Smith", 2010, "SchleierSmith2010", 33000, 200, 2204400, 2670400),
    ("Leroux", 2010, "Leroux2010", 50000, 200, 1710400, 2070400),
    ("Louchet-Chauvet", 2010, "LouchetChauvet2010", 90000, 9600, 8504400, 10270400),
    ("Bohnet", 2014, "Bohnet2014", 480000, 200, 21070400, 25470400),
    ("Sewell", 2012, "Sewell2012", 740000, 2180, 118504400, 144070400),
];

pub fn builtin_catalog() -> Vec<ExperimentEntry> {
    PUBLISHED
        .iter()
        .map(|&(author, year, key, n, m, m0, m01)| ExperimentEntry {
            name: format!("{author} et al. ({year}), N={n}"),
            citation_key: key.to_string(),
            n_spins: n,
            m_reported: m,
            summary: None,
            m_required_mu0: Some(m0),
            m_required_mu01: Some(m01),
            xi2_observed: None,
            q_par_sq_observed: None,
        })
        .collect()
}

/// Parses a catalog JSON array; errors name the offending field path.
pub fn parse_catalog(text: &str) -> Result<Vec<ExperimentEntry>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let entries: Vec<ExperimentEntry> = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        Error::Parse(format!(
            "field `{}` (line {}, column {}): {}",
            e.path(),
            inner.line(),
            inner.column(),
            inner
        ))
    })?;
    for entry in &entries {
        entry.check()?;
    }
    Ok(entries)
}

pub fn load_catalog(path: &Path) -> Result<Vec<ExperimentEntry>> {
    parse_catalog(&fs::read_to_string(path)?)
}

pub fn save_catalog(path: &Path, entries: &[ExperimentEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Where a required-M value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Published,
    Computed,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Published => "published",
            Self::Computed => "computed",
        }
    }
}

/// Required `M` for an entry: its tabulated `M(mu_perp = 0)` when present,
/// otherwise the optimized Bernstein bound computed from its summary.
pub fn required_m(
    entry: &ExperimentEntry,
    p_target: f64,
    search: &TangentSearch,
) -> Result<Option<(u64, Source)>> {
    if let Some(m) = entry.m_required_mu0 {
        return Ok(Some((m, Source::Published)));
    }
    let Some(stats) = entry.summary else {
        return Ok(None);
    };
    let source = SummaryGamma::new(stats, SummaryForm::Full);
    match required_m_bernstein_c(p_target, &source, stats.n_spins, search) {
        Ok(m) => Ok(Some((m, Source::Computed))),
        Err(Error::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitRow {
    pub name: String,
    pub n_spins: u32,
    pub m_reported: u64,
    pub m_required: u64,
    pub ratio: f64,
    pub source: Source,
}

/// How far each experiment falls short: `ratio = M_required / M_reported`.
pub fn deficit_report(
    entries: &[ExperimentEntry],
    p_target: f64,
    search: &TangentSearch,
) -> Result<Vec<DeficitRow>> {
    entries
        .iter()
        .map(|e| {
            let (m_required, source) =
                required_m(e, p_target, search)?.ok_or_else(|| Error::MissingField {
                    entry: e.name.clone(),
                    field: "m_required_mu0",
                })?;
            Ok(DeficitRow {
                name: e.name.clone(),
                n_spins: e.n_spins,
                m_reported: e.m_reported,
                m_required,
                ratio: m_required as f64 / e.m_reported as f64,
                source,
            })
        })
        .collect()
}

/// One experiment with its sufficient (upper-bound) and necessary
/// (lower-bound) measurement counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub name: String,
    pub n_spins: u32,
    pub m_reported: u64,
    pub m_upper_sufficient: Option<u64>,
    pub m_lower_necessary: Option<u64>,
    pub xi2_observed: Option<f64>,
    pub source: Option<Source>,
}

/// Observed `(xi2, <Q_n>^2)`: explicit fields first, then the summary.
fn observed_moments(entry: &ExperimentEntry) -> Option<(f64, f64)> {
    match (entry.xi2_observed, entry.q_par_sq_observed, entry.summary) {
        (Some(x), Some(q), _) => Some((x, q)),
        (x, q, Some(s)) => {
            let xi2 = x.or_else(|| wineland_xi2(&s).ok())?;
            Some((xi2, q.unwrap_or(s.mu_par * s.mu_par)))
        }
        _ => None,
    }
}

pub fn figure_rows(
    entries: &[ExperimentEntry],
    p_target: f64,
    search: &TangentSearch,
) -> Result<Vec<FigureRow>> {
    entries
        .iter()
        .map(|e| {
            let upper = required_m(e, p_target, search)?;
            let observed = observed_moments(e);
            let lower = observed.and_then(|(xi2, q2)| {
                LowerBoundModel::new(xi2, q2, e.n_spins)
                    .and_then(|model| model.min_m(p_target))
                    .ok()
            });
            Ok(FigureRow {
                name: e.name.clone(),
                n_spins: e.n_spins,
                m_reported: e.m_reported,
                m_upper_sufficient: upper.map(|u| u.0),
                m_lower_necessary: lower,
                xi2_observed: e.xi2_observed.or(observed.map(|o| o.0)),
                source: upper.map(|u| u.1),
            })
        })
        .collect()
}
