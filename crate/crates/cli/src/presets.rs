//! Named experiment presets. Each expands to one or more labelled runs.

use chronos_core::model::{EstimatePlacement, EstimatesSpec, ScenarioConfig, Tolerances};
use chronos_core::{CostModel, PriorSpec};

use crate::config::{OffsetName, OffsetSpec, RefineParams, RunConfig};
use crate::error::CliError;

pub struct Preset {
    pub name: String,
    pub runs: Vec<(String, RunConfig)>,
}

pub const TABLE_TWO_ROWS: [(usize, usize); 6] = [(1, 1), (2, 1), (3, 1), (4, 1), (1, 2), (2, 2)];

pub fn names() -> Vec<String> {
    let mut v = vec!["tableI".to_string(), "tableII".to_string()];
    v.extend(TABLE_TWO_ROWS.iter().map(|(n, t)| format!("tableII-N{n}-t{t}")));
    v.extend(["fig2", "fig4", "fig6"].map(String::from));
    v
}

struct Gaussian {
    sigma: f64,
    atoms: usize,
    queries: usize,
    cost: CostModel,
    d: usize,
    m: usize,
    k: usize,
}

impl Gaussian {
    fn config(&self) -> RunConfig {
        RunConfig {
            scenario: ScenarioConfig {
                atoms: self.atoms,
                queries: self.queries,
                prior: PriorSpec::gaussian(0.0, self.sigma),
                cost: self.cost,
                d: Some(self.d),
                estimates: EstimatesSpec::Auto { count: self.m, method: EstimatePlacement::OptimalWidth },
                seed: 1,
                samples: self.k,
                tolerances: Tolerances::default(),
            },
            offset: OffsetSpec::Named(OffsetName::Midpoint),
            stages: 2,
            refine: None,
            compare: false,
        }
    }
}

fn table_two_row(atoms: usize, queries: usize) -> (String, RunConfig) {
    let mut cfg = Gaussian { sigma: 1.0, atoms, queries, cost: CostModel::Quadratic, d: 15, m: 25, k: 100 }.config();
    cfg.refine = Some(RefineParams::default());
    (format!("tableII-N{atoms}-t{queries}"), cfg)
}

pub fn preset(name: &str) -> Result<Preset, CliError> {
    let runs = match name {
        "tableI" => [0.25, 0.75, 1.25, 1.75, 2.25]
            .iter()
            .map(|&sigma| {
                let g = Gaussian { sigma, atoms: 2, queries: 1, cost: CostModel::Periodic, d: 15, m: 20, k: 100 };
                (format!("tableI-sigma{sigma}"), g.config())
            })
            .collect(),
        "tableII" => TABLE_TWO_ROWS.iter().map(|&(n, t)| table_two_row(n, t)).collect(),
        "fig2" => {
            let mut runs = Vec::new();
            for atoms in [1, 2] {
                for i in 1..=12 {
                    let sigma = 0.25 * i as f64;
                    let g = Gaussian { sigma, atoms, queries: 1, cost: CostModel::Periodic, d: 15, m: 20, k: 100 };
                    runs.push((format!("fig2-N{atoms}-sigma{sigma}"), g.config()));
                }
            }
            runs
        }
        "fig4" => {
            (1..=6)
                .map(|i| {
                    let sigma = 0.5 * i as f64;
                    let g = Gaussian { sigma, atoms: 2, queries: 1, cost: CostModel::Quadratic, d: 15, m: 25, k: 100 };
                    (format!("fig4-sigma{sigma}"), RunConfig { compare: true, ..g.config() })
                })
                .collect()
        }
        "fig6" => [7, 11, 15, 21, 31]
            .iter()
            .map(|&d| {
                let g = Gaussian { sigma: 1.875, atoms: 4, queries: 1, cost: CostModel::Quadratic, d, m: 20, k: 32 };
                (format!("fig6-d{d}"), g.config())
            })
            .collect(),
        other => {
            let row = TABLE_TWO_ROWS.iter().find(|(n, t)| other == format!("tableII-N{n}-t{t}"));
            match row {
                Some(&(n, t)) => vec![table_two_row(n, t)],
                None => return Err(CliError::Config(format!("unknown preset `{other}` (known: {})", names().join(", ")))),
            }
        }
    };
    Ok(Preset { name: name.to_string(), runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    #[test]
    fn every_preset_resolves() {
        for name in names() {
            let p = preset(&name).unwrap();
            assert!(!p.runs.is_empty());
            for (_, cfg) in p.runs {
                cfg.resolve(&Overrides::default()).unwrap();
            }
        }
        assert!(matches!(preset("tableIII"), Err(CliError::Config(_))));
    }

    #[test]
    fn table_rows_refine_first() {
        let p = preset("tableII-N2-t1").unwrap();
        assert_eq!(p.runs.len(), 1);
        let cfg = &p.runs[0].1;
        assert!(cfg.refine.is_some());
        assert_eq!((cfg.scenario.atoms, cfg.scenario.queries, cfg.scenario.samples), (2, 1, 100));
    }
}
