//! JSON configuration documents. Every field name carries its unit; rates
//! are written in packets/ms and converted to packets/μs on the way in.

use epon_gls::model::{ServiceKind, ServiceTimeDist, SystemConfig};
use epon_gls::optimizer::{recommend, DEFAULT_EPSILON};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const PER_MS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onus: Option<usize>,
    pub guard_us: f64,
    pub service: ServiceDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_pkts_per_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates_pkts_per_ms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscribed_rate_pkts_per_ms: Option<f64>,
    #[serde(default)]
    pub window_limit_pkts: WindowDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceDoc {
    Deterministic { value_us: f64 },
    Exponential { mean_us: f64 },
    Empirical { values_us: Vec<f64>, probabilities: Vec<f64> },
}

/// `window_limit_pkts`: a packet count, `null` for gated service, or `"auto"`
/// for the Gaussian-approximation size at the subscribed rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WindowDoc {
    #[default]
    Gated,
    Fixed(u32),
    Auto,
}

impl Serialize for WindowDoc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WindowDoc::Gated => s.serialize_none(),
            WindowDoc::Fixed(m) => s.serialize_u32(*m),
            WindowDoc::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for WindowDoc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u32),
            Word(String),
        }
        match Option::<Raw>::deserialize(d)? {
            None => Ok(WindowDoc::Gated),
            Some(Raw::Count(m)) => Ok(WindowDoc::Fixed(m)),
            Some(Raw::Word(w)) if w == "auto" => Ok(WindowDoc::Auto),
            Some(Raw::Word(w)) => Err(serde::de::Error::custom(format!(
                "window_limit_pkts must be a packet count, null or \"auto\", got \"{w}\""
            ))),
        }
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let doc: ConfigDoc = serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
    })?;
    doc.into_config()
}

impl ConfigDoc {
    pub fn into_config(self) -> Result<SystemConfig> {
        let service = match &self.service {
            ServiceDoc::Deterministic { value_us } => ServiceTimeDist::deterministic(*value_us),
            ServiceDoc::Exponential { mean_us } => ServiceTimeDist::exponential(*mean_us),
            ServiceDoc::Empirical {
                values_us,
                probabilities,
            } => ServiceTimeDist::empirical(values_us.clone(), probabilities.clone()),
        }
        .map_err(|e| field_error("service", e))?;

        let rates: Vec<f64> = match (&self.rate_pkts_per_ms, &self.rates_pkts_per_ms, self.onus) {
            (Some(_), Some(_), _) => {
                return Err(CliError::Config(
                    "give either rate_pkts_per_ms (with onus) or rates_pkts_per_ms, not both".into(),
                ))
            }
            (Some(r), None, Some(n)) => vec![r / PER_MS; n],
            (Some(_), None, None) => {
                return Err(CliError::Config("onus: required together with rate_pkts_per_ms".into()))
            }
            (None, Some(list), n) => {
                if let Some(n) = n.filter(|&n| n != list.len()) {
                    return Err(CliError::Config(format!(
                        "onus: {n} does not match the {} entries of rates_pkts_per_ms",
                        list.len()
                    )));
                }
                list.iter().map(|r| r / PER_MS).collect()
            }
            (None, None, _) => {
                return Err(CliError::Config(
                    "rate_pkts_per_ms: missing (or give rates_pkts_per_ms per ONU)".into(),
                ))
            }
        };

        let subscribed = match self.subscribed_rate_pkts_per_ms {
            Some(r) => r / PER_MS,
            None if rates.windows(2).all(|w| w[0] == w[1]) => rates.first().copied().unwrap_or(0.0),
            None => {
                return Err(CliError::Config(
                    "subscribed_rate_pkts_per_ms: required when ONU rates differ".into(),
                ))
            }
        };

        let epsilon = self.epsilon.unwrap_or_else(|| {
            warn!("epsilon not given; using the default {DEFAULT_EPSILON}");
            DEFAULT_EPSILON
        });

        let onus = rates.len();
        let config = SystemConfig {
            onus,
            guard: self.guard_us,
            service,
            subscribed_rate: subscribed,
            rates,
            window_limit: match self.window_limit_pkts {
                WindowDoc::Fixed(m) => Some(m),
                _ => None,
            },
            epsilon,
        };
        validate_named(&config)?;
        if self.window_limit_pkts == WindowDoc::Auto {
            let m = recommend(&config)?.recommended();
            return config
                .with_window_limit(Some(m))
                .map_err(|e| field_error("window_limit_pkts", e));
        }
        Ok(config)
    }
}

/// Validate with diagnostics phrased in terms of document fields.
fn validate_named(config: &SystemConfig) -> Result<()> {
    use epon_gls::ModelError;
    match config.validate() {
        Ok(()) => Ok(()),
        Err(ModelError::Saturated { load }) => {
            let (field, what) = if config.offered_load() >= 1.0 {
                ("rate_pkts_per_ms", "offered load")
            } else {
                ("subscribed_rate_pkts_per_ms", "subscribed load")
            };
            Err(CliError::Config(format!(
                "{field}: {what} rho_E = {} must be below 1",
                crate::format::sig(load)
            )))
        }
        Err(ModelError::InvalidParameter { name, reason }) => {
            let field = match name {
                "guard" => "guard_us",
                "rates" => "rates_pkts_per_ms",
                "subscribed_rate" => "subscribed_rate_pkts_per_ms",
                "window_limit" => "window_limit_pkts",
                other => other,
            };
            Err(CliError::Config(format!("{field}: {reason}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn field_error(field: &str, e: epon_gls::ModelError) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

/// Document that parses back to exactly `config`.
pub fn to_doc(config: &SystemConfig) -> ConfigDoc {
    let homogeneous = config.is_homogeneous();
    let service = match config.service.kind() {
        ServiceKind::Deterministic { value } => ServiceDoc::Deterministic { value_us: *value },
        ServiceKind::Exponential { mean } => ServiceDoc::Exponential { mean_us: *mean },
        ServiceKind::Empirical {
            values,
            probabilities,
        } => ServiceDoc::Empirical {
            values_us: values.clone(),
            probabilities: probabilities.clone(),
        },
    };
    ConfigDoc {
        onus: Some(config.onus),
        guard_us: config.guard,
        service,
        rate_pkts_per_ms: homogeneous.then(|| per_ms(config.rates[0])),
        rates_pkts_per_ms: (!homogeneous).then(|| config.rates.iter().map(|&r| per_ms(r)).collect()),
        subscribed_rate_pkts_per_ms: Some(per_ms(config.subscribed_rate)),
        window_limit_pkts: config.window_limit.map_or(WindowDoc::Gated, WindowDoc::Fixed),
        epsilon: Some(config.epsilon),
    }
}

pub fn emit_config(config: &SystemConfig) -> String {
    serde_json::to_string_pretty(&to_doc(config)).expect("config documents always serialize")
}

/// A packets/ms value `v` with `v / 1000 == rate` exactly, so that emitted
/// documents re-parse bit-for-bit.
pub fn per_ms(rate: f64) -> f64 {
    let guess = rate * PER_MS;
    if guess / PER_MS == rate || !guess.is_finite() {
        return guess;
    }
    let mut candidate = guess;
    for _ in 0..8 {
        candidate = if candidate / PER_MS < rate {
            candidate.next_up()
        } else {
            candidate.next_down()
        };
        if candidate / PER_MS == rate {
            return candidate;
        }
    }
    guess
}
