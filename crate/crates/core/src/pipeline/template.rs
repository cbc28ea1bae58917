//! Scenario templates for the four 2030 capacity visions, with synthetic
//! hourly profiles.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::system::{Bus, OperatingConfig, PowerSystem, RenewablePlant, StorageKind, StorageUnit, ThermalUnit};
use crate::timeseries::save_horizon;
use crate::HorizonData;

use super::{PipelineError, ScenarioConfig};

/// Installed capacity per vision, MW: gas, hard coal, hydro, nuclear,
/// others non-RES, others RES, solar, wind.
pub const VISION_CAPACITY_MW: [[f64; 8]; 4] = [
    [24948.0, 5900.0, 23450.0, 7120.0, 10480.0, 2400.0, 16800.0, 35750.0],
    [21572.0, 5900.0, 23450.0, 7120.0, 10480.0, 2400.0, 33150.0, 27650.0],
    [29208.0, 4160.0, 25050.0, 7120.0, 12210.0, 5100.0, 25000.0, 39300.0],
    [29208.0, 4160.0, 25635.0, 7120.0, 12210.0, 5100.0, 54130.0, 40604.0],
];

pub const TECHS: [&str; 8] = [
    "gas",
    "hard_coal",
    "hydro",
    "nuclear",
    "others_non_res",
    "others_res",
    "solar",
    "wind",
];

const HOURS_PER_YEAR: f64 = 8760.0;
/// Battery investment cost per year, k€/GW.
const BATTERY_COST_PER_YEAR: f64 = 20_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateOptions {
    pub vision: usize,
    pub hours: usize,
    /// Multiplies every capacity and the demand; capacities are otherwise
    /// the vision's MW figures expressed in GW.
    pub scale: f64,
    pub seed: u64,
}

impl Default for TemplateOptions {
    fn default() -> Self {
        Self {
            vision: 1,
            hours: 2184,
            scale: 0.1,
            seed: 1,
        }
    }
}

pub struct ScenarioTemplate {
    pub config: ScenarioConfig,
    pub system: PowerSystem,
    pub data: HorizonData,
}

/// (tech, fuel k€/MJ, heat rate MJ/GWh, no-load MJ/h per GW, startup MJ per
/// GW, minimum output fraction, 10-minute ramp fraction)
const THERMAL: [(&str, f64, f64, f64, f64, f64, f64); 4] = [
    ("nuclear", 1.0e-6, 10.0e6, 0.2e6, 20.0e6, 0.5, 0.02),
    ("hard_coal", 3.0e-6, 9.5e6, 0.8e6, 15.0e6, 0.4, 0.05),
    ("gas", 8.0e-6, 7.0e6, 0.5e6, 5.0e6, 0.3, 0.15),
    ("others_non_res", 9.0e-6, 10.0e6, 0.4e6, 2.0e6, 0.2, 0.15),
];

fn capacity(vision: usize, tech: &str) -> f64 {
    let i = TECHS.iter().position(|t| *t == tech).expect("known tech");
    VISION_CAPACITY_MW[vision - 1][i] / 1000.0
}

/// Single-bus system for `vision` (1..=4) with one aggregated unit per
/// thermal technology, a long-term hydro reservoir and an investable
/// short-term battery.
pub fn template_system(options: &TemplateOptions) -> Result<PowerSystem, PipelineError> {
    let v = options.vision;
    if !(1..=4).contains(&v) {
        return Err(PipelineError::Config(format!("vision must be 1..=4, got {v}")));
    }
    if !(options.scale > 0.0) {
        return Err(PipelineError::Config("scale must be positive".into()));
    }
    let s = options.scale;
    let thermal = THERMAL
        .iter()
        .map(|&(tech, fuel, alpha, beta, gamma, qmin, ramp)| {
            let cap = capacity(v, tech) * s;
            ThermalUnit {
                id: tech.to_string(),
                bus: "ES".into(),
                tech: tech.to_string(),
                fuel_cost: fuel,
                alpha,
                beta: beta * cap,
                gamma: gamma * cap,
                om_cost: 2.0,
                q_max: cap,
                q_min: qmin * cap,
                ramp_10min: ramp * cap,
            }
        })
        .collect();
    let hydro = capacity(v, "hydro") * s;
    let reservoir = hydro * 1000.0;
    let storage = vec![
        StorageUnit {
            id: "hydro".into(),
            bus: "ES".into(),
            kind: StorageKind::LongTerm,
            tech: "hydro".into(),
            w0: 0.5 * reservoir,
            w_max: reservoir,
            w_min: 0.05 * reservoir,
            w_fin: 0.5 * reservoir,
            efficiency: 1.0,
            q_max: hydro,
            b_max: 0.0,
            inv_cost: 0.0,
            epr_max: 0.0,
            epr_min: 0.0,
            investable: false,
        },
        StorageUnit {
            id: "battery".into(),
            bus: "ES".into(),
            kind: StorageKind::ShortTerm,
            tech: "battery".into(),
            w0: 5.0 * s,
            w_max: 10.0 * s,
            w_min: 0.0,
            w_fin: 5.0 * s,
            efficiency: 0.9,
            q_max: 1.0 * s,
            b_max: 1.0 * s,
            inv_cost: BATTERY_COST_PER_YEAR * options.hours as f64 / HOURS_PER_YEAR,
            epr_max: 4.0,
            epr_min: 0.0,
            investable: true,
        },
    ];
    let renewables = ["others_res", "solar", "wind"]
        .iter()
        .map(|t| RenewablePlant {
            bus: "ES".into(),
            tech: t.to_string(),
            capacity: capacity(v, t) * s,
        })
        .collect();
    Ok(PowerSystem {
        buses: vec![Bus {
            id: "ES".into(),
            slack: true,
        }],
        circuits: Vec::new(),
        isf: None,
        thermal,
        storage,
        config: OperatingConfig {
            reserve_fraction: 0.03,
            pns_penalty: 3000.0,
            spill_penalty: 0.001,
            initial_commitment: BTreeMap::from([("nuclear".to_string(), 1)]),
        },
        renewables,
    })
}

/// Demand: daily sinusoid with a weekend dip and a seasonal swing. Solar:
/// a daylight arch dimmed by a daily cloud factor. Wind: a bounded random
/// walk of the capacity factor. Hydro inflow: seasonal with daily noise.
pub fn synthetic_profiles(system: &PowerSystem, options: &TemplateOptions) -> HorizonData {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let hours = options.hours;
    let peak = 40.0 * options.scale;
    let plant = |tech: &str| {
        system
            .renewables
            .iter()
            .filter(|r| r.tech == tech)
            .map(|r| r.capacity)
            .sum::<f64>()
    };
    let (solar, wind, other) = (plant("solar"), plant("wind"), plant("others_res"));

    let mut demand = Array2::zeros((hours, 1));
    let mut renewable = Array2::zeros((hours, 1));
    let mut inflows = Array2::zeros((hours, system.storage.len()));
    let mut wind_cf: f64 = 0.35;
    let mut cloud = 1.0;
    let mut wet = 1.0;
    for p in 0..hours {
        let hod = (p % 24) as f64;
        let day = p / 24;
        if p % 24 == 0 {
            cloud = rng.random_range(0.55..1.0);
            wet = rng.random_range(0.8..1.2);
        }
        let season = (2.0 * PI * p as f64 / HOURS_PER_YEAR).cos();
        let daily = 0.8 + 0.2 * (2.0 * PI * (hod - 9.0) / 24.0).sin();
        let weekly = if day % 7 >= 5 { 0.88 } else { 1.0 };
        let noise = rng.random_range(-0.02..0.02);
        demand[[p, 0]] = peak * daily * weekly * (0.9 + 0.1 * season) * (1.0 + noise);

        let sun = if (6.0..18.0).contains(&hod) {
            (PI * (hod - 6.0) / 12.0).sin() * cloud
        } else {
            0.0
        };
        wind_cf = (wind_cf + rng.random_range(-0.05..0.05)).clamp(0.05, 0.9);
        renewable[[p, 0]] = solar * sun + wind * wind_cf + other * 0.5;

        for (i, h) in system.storage.iter().enumerate() {
            if h.kind == StorageKind::LongTerm {
                inflows[[p, i]] = 0.2 * h.q_max * (1.0 + 0.5 * season) * wet;
            }
        }
    }
    HorizonData {
        nodes: vec!["ES".into()],
        storage_units: system.storage.iter().map(|h| h.id.clone()).collect(),
        demand,
        renewable,
        inflows,
    }
}

pub fn scenario_template(options: &TemplateOptions) -> Result<ScenarioTemplate, PipelineError> {
    if options.hours == 0 || !options.hours.is_multiple_of(24) {
        return Err(PipelineError::Config(format!(
            "template horizon must be whole days, got {} h",
            options.hours
        )));
    }
    let system = template_system(options)?;
    let data = synthetic_profiles(&system, options);
    let days = options.hours / 24;
    let config = ScenarioConfig {
        name: format!("vision{}", options.vision),
        seed: options.seed,
        rep_periods: 9.min(days),
        states: 48.min(options.hours / 4).max(1),
        tmci: crate::formulations::TmciOptions {
            window: 168.min(options.hours),
            ..Default::default()
        },
        state_window: None,
        ..Default::default()
    };
    Ok(ScenarioTemplate { config, system, data })
}

/// Write `scenario.toml`, `system.json` and `data/` into `dir`.
pub fn emit_scenario_template(options: &TemplateOptions, dir: &Path) -> Result<ScenarioTemplate, PipelineError> {
    let t = scenario_template(options)?;
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    t.system.save(&dir.join(&t.config.system))?;
    save_horizon(&dir.join(&t.config.data), &t.data)?;
    let path = dir.join("scenario.toml");
    std::fs::write(&path, t.config.to_toml()).map_err(|e| PipelineError::io(&path, e))?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::validate_system;

    #[test]
    fn capacity_proportions_follow_the_vision() {
        let o = TemplateOptions {
            vision: 1,
            hours: 48,
            ..Default::default()
        };
        let sys = template_system(&o).unwrap();
        let gas = sys.thermal.iter().find(|t| t.tech == "gas").unwrap().q_max;
        let wind = sys.renewables.iter().find(|r| r.tech == "wind").unwrap().capacity;
        assert!((gas / wind - 24948.0 / 35750.0).abs() < 1e-12);
    }

    #[test]
    fn vision_four_has_the_most_solar() {
        let solar = |v| {
            let sys = template_system(&TemplateOptions {
                vision: v,
                ..Default::default()
            })
            .unwrap();
            sys.renewables.iter().find(|r| r.tech == "solar").unwrap().capacity
        };
        assert!((1..4).all(|v| solar(v) < solar(4)));
    }

    #[test]
    fn every_vision_validates() {
        for v in 1..=4 {
            let t = scenario_template(&TemplateOptions {
                vision: v,
                hours: 168,
                ..Default::default()
            })
            .unwrap();
            let report = validate_system(&t.system, &t.data);
            assert!(report.is_empty(), "{report}");
            t.data.validate().unwrap();
        }
    }

    #[test]
    fn bad_vision_is_a_config_error() {
        let o = TemplateOptions {
            vision: 5,
            ..Default::default()
        };
        assert!(matches!(template_system(&o), Err(PipelineError::Config(_))));
    }
}
