//! Named sweep presets for the homogeneous and non-homogeneous Gaussian designs.

use crate::engine::McSettings;
use crate::error::{Error, Result};
use crate::procedures::{PriorBounds, ProcedureKind};
use crate::stream_models::{Model, SignalConfig};

use super::sweep::SweepSpec;

/// Names and one-line descriptions of the shipped presets.
pub const RECIPES: [(&str, &str); 3] = [
    (
        "homo-gap",
        "K=10 Gaussian streams, mu=0.5, known count l=u=m for m in {1,3,5,7,9}",
    ),
    (
        "homo-gapinter",
        "K=10 Gaussian streams, mu=0.5, bounds l=3, u=7, |A| in {3..7}",
    ),
    (
        "nonhomo",
        "K=4 Gaussian streams, mu=0.5 scaled by 0.5 in streams 1-2; A in {1},{3},{1,2},{1,3} with l=u=|A| and with l=1, u=3",
    ),
];

/// Free-parameter grid shared by the presets: 2, 3, ..., 22 nats, which
/// takes every worst-case error rate from above 10^-1 to below 10^-8.
pub fn default_grid() -> Vec<f64> {
    (2..=22).map(f64::from).collect()
}

/// A preset expanded into labelled sweeps.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
    pub sweeps: Vec<(String, SweepSpec)>,
}

fn homogeneous(k: usize, mu: f64) -> Result<Vec<Model>> {
    Ok(vec![Model::gaussian(mu)?; k])
}

/// Streams `1..=K/2` have mean `scale * mu`, the rest `mu`.
pub fn nonhomogeneous_models(k: usize, mu: f64, scale: f64) -> Result<Vec<Model>> {
    (0..k)
        .map(|j| Model::gaussian(if j < k / 2 { scale * mu } else { mu }))
        .collect()
}

fn sweep(models: Vec<Model>, prior: PriorBounds, configs: Vec<SignalConfig>, settings: &McSettings) -> SweepSpec {
    SweepSpec::new(
        ProcedureKind::ALL.to_vec(),
        models,
        prior,
        configs,
        default_grid(),
        *settings,
    )
}

/// Expands the preset `name` with the given Monte Carlo settings.
pub fn recipe(name: &str, settings: &McSettings) -> Result<Recipe> {
    let (name, description) = RECIPES
        .iter()
        .copied()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| {
            let known: Vec<&str> = RECIPES.iter().map(|r| r.0).collect();
            Error::config(format!("unknown recipe {name:?}; known: {}", known.join(", ")))
        })?;
    let sweeps = match name {
        "homo-gap" => [1, 3, 5, 7, 9]
            .into_iter()
            .map(|m| {
                let prior = PriorBounds::new(m, m, 10)?;
                Ok((
                    format!("m{m}"),
                    sweep(homogeneous(10, 0.5)?, prior, vec![SignalConfig::canonical(10, m)], settings),
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        "homo-gapinter" => {
            let prior = PriorBounds::new(3, 7, 10)?;
            vec![(
                "l3_u7".to_string(),
                sweep(homogeneous(10, 0.5)?, prior, SweepSpec::all_sizes(&prior), settings),
            )]
        }
        _ => {
            let models = nonhomogeneous_models(4, 0.5, 0.5)?;
            let cases: Vec<SignalConfig> = [&[0usize][..], &[2], &[0, 1], &[0, 2]]
                .iter()
                .map(|idx| SignalConfig::from_indices(4, idx))
                .collect::<Result<_>>()?;
            let mut out = Vec::new();
            for m in [1, 2] {
                let configs: Vec<SignalConfig> =
                    cases.iter().filter(|c| c.size() == m).cloned().collect();
                out.push((
                    format!("known_m{m}"),
                    sweep(models.clone(), PriorBounds::new(m, m, 4)?, configs, settings),
                ));
            }
            out.push((
                "l1_u3".to_string(),
                sweep(models, PriorBounds::new(1, 3, 4)?, cases, settings),
            ));
            out
        }
    };
    Ok(Recipe {
        name,
        description,
        sweeps,
    })
}
