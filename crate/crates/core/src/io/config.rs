use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::profile_bvp::GlParams;
use crate::reaction_network::{DiffusionMatrix, ReactionNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    PmeBarenblatt,
    PmeMixing,
    RdsProfile,
    RdsSimulate,
    TurbulenceExact,
    TurbulenceSimulate,
    GlProfile,
    GlSimulate,
}

impl Problem {
    pub fn is_simulation(self) -> bool {
        matches!(
            self,
            Problem::RdsSimulate | Problem::TurbulenceSimulate | Problem::GlSimulate
        )
    }

    pub fn tag(self) -> &'static str {
        match self {
            Problem::PmeBarenblatt => "pme_barenblatt",
            Problem::PmeMixing => "pme_mixing",
            Problem::RdsProfile => "rds_profile",
            Problem::RdsSimulate => "rds_simulate",
            Problem::TurbulenceExact => "turbulence_exact",
            Problem::TurbulenceSimulate => "turbulence_simulate",
            Problem::GlProfile => "gl_profile",
            Problem::GlSimulate => "gl_simulate",
        }
    }
}

fn one_kappa() -> f64 {
    1.0
}

/// Built-in network by variant name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "network", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    TwoSpecies {
        beta: f64,
        gamma: f64,
        #[serde(default = "one_kappa")]
        kappa: f64,
    },
    ThreeSpeciesBinary {
        #[serde(default = "one_kappa")]
        kappa: f64,
    },
    TwoReactionChain {
        #[serde(default = "one_kappa")]
        k1: f64,
        #[serde(default = "one_kappa")]
        k2: f64,
    },
}

impl NetworkSpec {
    pub fn build(&self) -> Result<ReactionNetwork> {
        match *self {
            NetworkSpec::TwoSpecies { beta, gamma, kappa } => ReactionNetwork::two_species(beta, gamma, kappa),
            NetworkSpec::ThreeSpeciesBinary { kappa } => ReactionNetwork::three_species_binary(kappa),
            NetworkSpec::TwoReactionChain { k1, k2 } => ReactionNetwork::two_reaction_chain(k1, k2),
        }
    }
}

/// Initial data for turbulence runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TurbulenceInitial {
    /// The exact piecewise solution with half-width `A`.
    #[default]
    Exact,
    /// Compact shear layer with finite energy and zero-flux ends.
    Compact,
}

/// Accepts a number or an array of numbers.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

/// Declarative problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    /// PME exponent(s); several values give several profiles.
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<f64>>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub mass_parameter: Option<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub u_minus: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub u_plus: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub c_minus: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub c_plus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_plus: Option<f64>,
    /// Turbulence half-width `A`.
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub turbulence_half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbulence_initial: Option<TurbulenceInitial>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, rename = "X", skip_serializing_if = "Option::is_none")]
    pub domain_half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Minimal config for `problem` with every parameter unset.
    pub fn empty(problem: Problem) -> Self {
        Self {
            problem,
            label: None,
            network: None,
            m: None,
            mass_parameter: None,
            u_minus: None,
            u_plus: None,
            c_minus: None,
            c_plus: None,
            d: None,
            eta_minus: None,
            eta_plus: None,
            phi_minus: None,
            phi_plus: None,
            turbulence_half_width: None,
            turbulence_initial: None,
            half_width: None,
            n: None,
            domain_half_width: None,
            n_x: None,
            final_time: None,
            snapshots: None,
            dt: None,
            tol: None,
            max_iter: None,
            continuation_steps: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks that every parameter the problem needs is present and valid.
    pub fn validate(&self) -> Result<()> {
        let need = |name: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(Error::validation(name, format!("required for problem '{}'", self.problem.tag())))
            }
        };
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(Error::validation(name, format!("must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("L", self.half_width)?;
        positive("X", self.domain_half_width)?;
        positive("T", self.final_time)?;
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        positive("A", self.turbulence_half_width)?;
        if let Some(n) = self.n {
            if n < 3 || n % 2 == 0 {
                return Err(Error::validation("n", format!("grid node count must be odd and at least 3, got {n}")));
            }
        }
        if let Some(n) = self.n_x {
            if n < 3 {
                return Err(Error::validation("n_x", format!("need at least 3 nodes, got {n}")));
            }
        }
        if let Some(d) = &self.d {
            if let Some((j, v)) = d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::validation(
                    "d",
                    format!("diffusion constant d{} = {v} must be positive", j + 1),
                ));
            }
        }
        for (name, v) in [
            ("u_minus", &self.u_minus),
            ("u_plus", &self.u_plus),
            ("c_minus", &self.c_minus),
            ("c_plus", &self.c_plus),
        ] {
            if let Some(v) = v {
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::validation(name, "entries must be finite and nonnegative"));
                }
            }
        }
        if let Some(ms) = &self.m {
            if ms.is_empty() || ms.iter().any(|m| !(m.is_finite() && *m >= 1.0)) {
                return Err(Error::validation("m", "PME exponents must satisfy m ≥ 1"));
            }
        }
        if let Some(n) = self.mass_parameter {
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::validation("N", format!("mass parameter must be nonnegative, got {n}")));
            }
        }
        if let Some(s) = &self.snapshots {
            if s.windows(2).any(|w| !(w[1] > w[0])) || s.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::validation("snapshots", "times must be positive and strictly increasing"));
            }
        }
        match self.problem {
            Problem::PmeBarenblatt => {
                need("m", self.m.is_some())?;
                need("N", self.mass_parameter.is_some())?;
            }
            Problem::PmeMixing => {
                need("m", self.m.is_some())?;
                need("u_minus", self.u_minus.is_some())?;
                need("u_plus", self.u_plus.is_some())?;
                for name in ["u_minus", "u_plus"] {
                    let v = if name == "u_minus" { &self.u_minus } else { &self.u_plus };
                    if v.as_ref().map_or(0, Vec::len) != 1 {
                        return Err(Error::validation(name, "PME mixing takes a scalar boundary value"));
                    }
                }
            }
            Problem::RdsProfile | Problem::RdsSimulate => {
                need("network", self.network.is_some())?;
                need("d", self.d.is_some())?;
                let net = self.network.as_ref().expect("checked").build()?;
                let d = self.d.as_ref().expect("checked");
                if d.len() != net.species_count() {
                    return Err(Error::validation(
                        "d",
                        format!("{} diffusion constants for {} species", d.len(), net.species_count()),
                    ));
                }
                DiffusionMatrix::new(d.clone())?;
                let by_u = self.u_minus.is_some() && self.u_plus.is_some();
                let by_c = self.c_minus.is_some() && self.c_plus.is_some();
                if !(by_u || by_c) {
                    return Err(Error::validation(
                        "u_minus",
                        "give either u_minus/u_plus or c_minus/c_plus",
                    ));
                }
                let (expect, pairs) = if by_u {
                    (net.conserved_count(), [("u_minus", &self.u_minus), ("u_plus", &self.u_plus)])
                } else {
                    (net.species_count(), [("c_minus", &self.c_minus), ("c_plus", &self.c_plus)])
                };
                for (name, v) in pairs {
                    let len = v.as_ref().map_or(0, Vec::len);
                    if len != expect {
                        return Err(Error::validation(name, format!("expected {expect} entries, got {len}")));
                    }
                }
                if self.problem == Problem::RdsSimulate {
                    need("T", self.final_time.is_some())?;
                }
            }
            Problem::TurbulenceExact => need("A", self.turbulence_half_width.is_some())?,
            Problem::TurbulenceSimulate => {
                need("T", self.final_time.is_some())?;
                if self.turbulence_initial.unwrap_or_default() == TurbulenceInitial::Exact {
                    need("A", self.turbulence_half_width.is_some())?;
                }
            }
            Problem::GlProfile | Problem::GlSimulate => {
                need("eta_minus", self.eta_minus.is_some())?;
                need("eta_plus", self.eta_plus.is_some())?;
                self.gl_params()?;
                if self.problem == Problem::GlSimulate {
                    need("T", self.final_time.is_some())?;
                }
            }
        }
        Ok(())
    }

    pub fn gl_params(&self) -> Result<GlParams> {
        let params = GlParams {
            eta_minus: self.eta_minus.unwrap_or(0.0),
            eta_plus: self.eta_plus.unwrap_or(0.0),
            phi_minus: self.phi_minus.unwrap_or(0.0),
            phi_plus: self.phi_plus.unwrap_or(0.0),
        };
        params.validate().map_err(|e| match e {
            Error::Domain(msg) => {
                let name = if msg.starts_with("eta_minus") { "eta_minus" } else { "eta_plus" };
                Error::validation(name, msg)
            }
            other => other,
        })?;
        Ok(params)
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.problem.tag().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_json(text)
    }

    #[test]
    fn parses_network_and_scalars() {
        let c = parse(
            r#"{"problem":"rds_profile","network":{"network":"two_species","beta":1,"gamma":2},
                "d":[1,1],"u_minus":1,"u_plus":6,"L":10,"n":401}"#,
        )
        .unwrap();
        assert_eq!(c.u_minus, Some(vec![1.0]));
        assert_eq!(
            c.network,
            Some(NetworkSpec::TwoSpecies {
                beta: 1.0,
                gamma: 2.0,
                kappa: 1.0
            })
        );
        assert!(parse(r#"{"problem":"rds_profile","network":{"network":"three_species_binary"},"d":[2,2,10],"c_minus":[5.3,0.3,1.6],"c_plus":[0.3,5.3,1.6]}"#).is_ok());
        assert!(parse(r#"{"problem":"rds_profile","network":{"network":"two_reaction_chain","k1":1,"k2":1},"d":[1,1,1],"u_minus":1,"u_plus":2}"#).is_ok());
    }

    #[test]
    fn rejections_name_the_parameter() {
        let cases = [
            (r#"{"problem":"gl_profile","eta_minus":0.6,"eta_plus":0.3}"#, "eta_minus"),
            (r#"{"problem":"gl_profile","eta_minus":0.3,"eta_plus":-0.7}"#, "eta_plus"),
            (
                r#"{"problem":"rds_profile","network":{"network":"two_species","beta":1,"gamma":1},"d":[1,-0.5],"u_minus":1,"u_plus":2}"#,
                "d",
            ),
            (r#"{"problem":"pme_barenblatt","m":2,"N":1,"n":4000}"#, "n"),
            (r#"{"problem":"pme_barenblatt","m":2}"#, "N"),
        ];
        for (text, param) in cases {
            match parse(text) {
                Err(Error::Validation { parameter, .. }) => assert_eq!(parameter, param, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        let err = parse(r#"{"problem":"gl_profile","eta_minus":0.6,"eta_plus":0.3}"#).unwrap_err();
        assert!(err.to_string().contains("Eckhaus"));
    }

    #[test]
    fn unknown_fields_and_tags_are_parse_errors() {
        assert!(matches!(parse(r#"{"problem":"nope"}"#), Err(Error::Parse(_))));
        assert!(matches!(
            parse(r#"{"problem":"pme_barenblatt","m":2,"N":1,"bogus":1}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn serialises_back() {
        let c = parse(r#"{"problem":"pme_barenblatt","m":[1.25,2,3],"N":1}"#).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["N"], 1.0);
        assert_eq!(v["m"].as_array().unwrap().len(), 3);
        assert!(v.get("network").is_none());
    }
}
