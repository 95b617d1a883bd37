//! On-disk constraint reports and amplitude tables.

use fbs_core::cycles::{character, Analysis, CycleSource};
use fbs_core::diffraction::{AmplitudeVector, Estimator, WaveVector};
use fbs_core::fbs::FbsComplex;
use fbs_core::laurent::graded_lex;
use fbs_core::rational::format_q;
use fbs_core::tilings::DecoratedPattern;
use fbs_core::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const CONSTRAINTS_FORMAT: &str = "fbs-constraints/1";
pub const AMPLITUDES_FORMAT: &str = "fbs-amplitudes/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Term {
    /// Integer coefficient, decimal.
    pub coeff: String,
    pub lattice: Vec<i64>,
    /// Rational frequency coordinates of the offset y_p.
    pub offset: Vec<String>,
    /// Physical position l + y_p.
    pub position: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Component {
    pub species: String,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub components: Vec<Component>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub format: String,
    pub dimension: usize,
    pub species: Vec<String>,
    pub lattice: Vec<Vec<String>>,
    pub cycle_source: String,
    pub generic_rank: usize,
    pub constraint_count: usize,
    pub generators: Vec<Generator>,
}

impl ConstraintReport {
    pub fn new(f: &FbsComplex, an: &Analysis) -> Self {
        let species = f.species();
        let generators = an
            .generators
            .iter()
            .enumerate()
            .map(|(j, comps)| Generator {
                name: an.basis.names.get(j).cloned().unwrap_or_else(|| format!("z{}", j + 1)),
                components: comps
                    .iter()
                    .map(|g| {
                        let mut terms: Vec<_> = g.terms.iter().collect();
                        terms.sort_by(|a, b| graded_lex(&a.lattice, &b.lattice).then_with(|| a.offset.cmp(&b.offset)));
                        Component {
                            species: g.species.clone(),
                            terms: terms
                                .into_iter()
                                .map(|t| Term {
                                    coeff: t.coeff.to_string(),
                                    lattice: t.lattice.clone(),
                                    offset: t.offset.iter().map(format_q).collect(),
                                    position: t.position_f.clone(),
                                })
                                .collect(),
                        }
                    })
                    .collect(),
            })
            .collect();
        ConstraintReport {
            format: CONSTRAINTS_FORMAT.into(),
            dimension: f.dim(),
            lattice: an.lattice.lattice.gens.iter().map(|g| g.iter().map(format_q).collect()).collect(),
            cycle_source: match an.basis.source {
                CycleSource::Supplied => "supplied".into(),
                CycleSource::Computed => "computed".into(),
            },
            generic_rank: an.basis.generic_rank,
            constraint_count: species.len().saturating_sub(an.basis.generic_rank),
            species,
            generators,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ConstraintReport = serde_json::from_str(text).map_err(|e| Error::Parse(format!("constraint report: {e}")))?;
        if r.format != CONSTRAINTS_FORMAT {
            return Err(Error::Parse(format!("constraint report: unknown format '{}'", r.format)));
        }
        for g in &r.generators {
            if g.components.len() != r.species.len() {
                return Err(Error::Parse(format!("constraint report: generator {} has {} components", g.name, g.components.len())));
            }
            for (c, s) in g.components.iter().zip(&r.species) {
                if &c.species != s {
                    return Err(Error::Parse(format!("constraint report: component '{}' out of order", c.species)));
                }
                if let Some(t) = c.terms.iter().find(|t| t.position.len() != r.dimension || t.coeff.parse::<f64>().is_err()) {
                    return Err(Error::Parse(format!("constraint report: bad term {t:?}")));
                }
            }
        }
        Ok(r)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// m × |J| matrix of the generator components at k.
    pub fn generator_matrix(&self, k: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.species.len(), self.generators.len(), |p, j| {
            self.generators[j].components[p]
                .terms
                .iter()
                .map(|t| character(k, &t.position) * t.coeff.parse::<f64>().unwrap_or(0.0))
                .sum()
        })
    }

    pub fn summary(&self) -> String {
        let terms: usize = self.generators.iter().flat_map(|g| &g.components).map(|c| c.terms.len()).sum();
        format!(
            "generators: {}\ngeneric rank: {}\ndecorations: {}\nconstraint count: {}\nterms: {}\ncycle source: {}\n",
            self.generators.len(),
            self.generic_rank,
            self.species.len(),
            self.constraint_count,
            terms,
            self.cycle_source
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplitudeRow {
    pub k: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Vec<i64>>,
    /// One `[re, im]` pair per species.
    pub values: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplitudeTable {
    pub format: String,
    pub dimension: usize,
    pub species: Vec<String>,
    pub radius: f64,
    pub estimator: String,
    /// Points per species inside the ball.
    pub points: Vec<usize>,
    pub noise_floor: f64,
    pub rows: Vec<AmplitudeRow>,
}

pub fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::HardBall => "hard-ball",
        Estimator::Taper => "taper",
    }
}

impl AmplitudeTable {
    pub fn new(p: &DecoratedPattern, est: Estimator, rows: &[(WaveVector, AmplitudeVector)]) -> Self {
        AmplitudeTable {
            format: AMPLITUDES_FORMAT.into(),
            dimension: p.dim,
            species: p.species.clone(),
            radius: p.radius,
            estimator: estimator_name(est).into(),
            points: (0..p.species.len()).map(|s| p.count(s)).collect(),
            noise_floor: fbs_core::diffraction::noise_floor(p),
            rows: rows
                .iter()
                .map(|(w, a)| AmplitudeRow {
                    k: w.k.clone(),
                    label: w.label.clone(),
                    values: a.values.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: AmplitudeTable = serde_json::from_str(text).map_err(|e| Error::Parse(format!("amplitude table: {e}")))?;
        if t.format != AMPLITUDES_FORMAT {
            return Err(Error::Parse(format!("amplitude table: unknown format '{}'", t.format)));
        }
        t.estimator()?;
        if let Some(r) = t.rows.iter().find(|r| r.k.len() != t.dimension || r.values.len() != t.species.len()) {
            return Err(Error::Parse(format!("amplitude table: malformed row at k = {:?}", r.k)));
        }
        Ok(t)
    }

    pub fn estimator(&self) -> Result<Estimator> {
        match self.estimator.as_str() {
            "hard-ball" => Ok(Estimator::HardBall),
            "taper" => Ok(Estimator::Taper),
            s => Err(Error::Parse(format!("amplitude table: unknown estimator '{s}'"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn entries(&self) -> Result<Vec<(WaveVector, AmplitudeVector)>> {
        let est = self.estimator()?;
        Ok(self
            .rows
            .iter()
            .map(|r| {
                let w = WaveVector { k: r.k.clone(), label: r.label.clone(), internal: None };
                let a = AmplitudeVector {
                    k: r.k.clone(),
                    values: r.values.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
                    radius: self.radius,
                    estimator: est,
                };
                (w, a)
            })
            .collect())
    }
}
