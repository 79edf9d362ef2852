//! Ramification bookkeeping for lisse sheaves on `G_m`: Euler characteristics
//! by Grothendieck-Ogg-Shafarevich, bad-character counts and Deligne constants.
//!
//! Profiles are declared data. Nothing here computes a Swan conductor.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RamificationError {
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid profile: {0}")]
    Invalid(String),
    #[error("malformed profile JSON: {0}")]
    Json(String),
}

/// A singular point inside `G_m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinitePoint {
    pub label: String,
    pub drop: u32,
    pub swan: u32,
}

/// Largest slope at a point at infinity of the ambient curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slope {
    pub label: String,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamificationProfile {
    pub name: String,
    #[serde(rename = "rank")]
    pub generic_rank: u32,
    pub swan0: u32,
    pub swan_inf: u32,
    #[serde(default, with = "finite_points_serde")]
    pub finite_points: Vec<FinitePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "slopes_serde")]
    pub slopes: Option<Vec<Slope>>,
    #[serde(default)]
    pub genus: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub name: String,
    pub euler_char: u64,
    pub tannakian_dim: u64,
    pub bad_char_bound: u64,
    #[serde(with = "opt_rational_serde")]
    pub deligne_constant: Option<Rational>,
}

impl RamificationProfile {
    pub fn new(name: &str, generic_rank: u32, swan0: u32, swan_inf: u32) -> Self {
        RamificationProfile {
            name: name.to_string(),
            generic_rank,
            swan0,
            swan_inf,
            finite_points: Vec::new(),
            slopes: None,
            genus: 0,
        }
    }

    pub fn with_point(mut self, label: &str, drop: u32, swan: u32) -> Self {
        self.finite_points.push(FinitePoint { label: label.to_string(), drop, swan });
        self
    }

    pub fn with_slopes(mut self, slopes: &[(&str, Rational)]) -> Self {
        self.slopes = Some(slopes.iter().map(|(l, v)| Slope { label: l.to_string(), value: *v }).collect());
        self
    }

    pub fn validate(&self) -> Result<(), RamificationError> {
        for pt in &self.finite_points {
            if pt.drop > self.generic_rank {
                return Err(RamificationError::Invalid(format!(
                    "drop {} at `{}` exceeds generic rank {}",
                    pt.drop, pt.label, self.generic_rank
                )));
            }
        }
        if let Some(slopes) = &self.slopes {
            if let Some(s) = slopes.iter().find(|s| s.value < Rational::from_integer(0)) {
                return Err(RamificationError::Invalid(format!("negative slope {} at `{}`", s.value, s.label)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RamificationError> {
        let profile: RamificationProfile = serde_json::from_str(text).map_err(|e| RamificationError::Json(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn euler_characteristic(&self) -> u64 {
        euler_characteristic(self)
    }

    pub fn report(&self) -> Result<DimensionReport, RamificationError> {
        self.validate()?;
        let euler = euler_characteristic(self);
        Ok(DimensionReport {
            name: self.name.clone(),
            euler_char: euler,
            tannakian_dim: euler,
            bad_char_bound: bad_character_bound(self),
            deligne_constant: self.slopes.as_ref().map(|s| {
                let slopes: Vec<Rational> = s.iter().map(|s| s.value).collect();
                deligne_constant(self.genus, &slopes)
            }),
        })
    }
}

/// `Sw_0 + Sw_inf + sum (drop_x + Sw_x)`.
pub fn euler_characteristic(profile: &RamificationProfile) -> u64 {
    profile.swan0 as u64
        + profile.swan_inf as u64
        + profile.finite_points.iter().map(|p| p.drop as u64 + p.swan as u64).sum::<u64>()
}

/// Euler characteristic of the shifted object on a curve of genus `genus` with
/// `punctures` points removed: `-rank (2 - 2g - N) + sum Sw + sum (drop + Sw)`.
/// Reduces to [`euler_characteristic`] for `g = 0`, `N = 2`.
pub fn euler_characteristic_general(
    generic_rank: u32,
    genus: u32,
    puncture_swans: &[u32],
    finite_points: &[FinitePoint],
) -> i64 {
    let chi_u = 2 - 2 * genus as i64 - puncture_swans.len() as i64;
    -(generic_rank as i64) * chi_u
        + puncture_swans.iter().map(|&s| s as i64).sum::<i64>()
        + finite_points.iter().map(|p| p.drop as i64 + p.swan as i64).sum::<i64>()
}

pub fn bad_character_bound(profile: &RamificationProfile) -> u64 {
    2 * profile.generic_rank as u64
}

/// `2g - 2 + N + sum r_i`, with `N` the number of slopes given.
pub fn deligne_constant(genus: u32, slopes: &[Rational]) -> Rational {
    let base = Rational::from_integer(2 * genus as i64 - 2 + slopes.len() as i64);
    slopes.iter().fold(base, |acc, r| acc + r)
}

fn kloosterman_profile(n: u32) -> RamificationProfile {
    RamificationProfile::new(&format!("kloosterman({n})"), n, 0, 1)
        .with_slopes(&[("0", Rational::from_integer(0)), ("inf", Rational::new(1, n as i64))])
}

/// Largest `n` listed by [`builtin_profiles`]; [`builtin_profile`] accepts any `n >= 1`.
pub const LISTED_KLOOSTERMAN_MAX: u32 = 8;

pub fn builtin_profiles() -> BTreeMap<String, RamificationProfile> {
    let mut map = BTreeMap::new();
    map.insert("gauss".to_string(), RamificationProfile::new("gauss", 1, 0, 1));
    map.insert("evans".to_string(), RamificationProfile::new("evans", 1, 1, 1));
    map.insert("rudnick".to_string(), RamificationProfile::new("rudnick", 1, 0, 0).with_point("1", 1, 1));
    for n in 1..=LISTED_KLOOSTERMAN_MAX {
        let p = kloosterman_profile(n);
        map.insert(p.name.clone(), p);
    }
    map
}

/// Looks up `gauss`, `evans`, `rudnick`, `kloosterman(n)` or the short form `kln`.
pub fn builtin_profile(name: &str) -> Result<RamificationProfile, RamificationError> {
    let unknown = || RamificationError::UnknownProfile(name.to_string());
    let name = name.trim();
    let kl_n = name
        .strip_prefix("kloosterman(")
        .and_then(|s| s.strip_suffix(')'))
        .or_else(|| name.strip_prefix("kl"));
    if let Some(n) = kl_n {
        let n: u32 = n.trim().parse().map_err(|_| unknown())?;
        if n == 0 {
            return Err(unknown());
        }
        return Ok(kloosterman_profile(n));
    }
    builtin_profiles().remove(name).ok_or_else(unknown)
}

impl fmt::Display for DimensionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: euler={} tannakian_dim={} bad_chars<={} deligne={}",
            self.name,
            self.euler_char,
            self.tannakian_dim,
            self.bad_char_bound,
            self.deligne_constant.map(|c| c.to_string()).unwrap_or_else(|| "-".into())
        )
    }
}

fn rational_to_json(r: &Rational) -> serde_json::Value {
    if r.is_integer() {
        serde_json::Value::from(*r.numer())
    } else {
        serde_json::Value::from(format!("{}/{}", r.numer(), r.denom()))
    }
}

fn rational_from_json(v: &serde_json::Value) -> Result<Rational, String> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().map(Rational::from_integer).ok_or_else(|| format!("slope {n} is not an integer or a/b")),
        serde_json::Value::String(s) => {
            let (num, den) = match s.split_once('/') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (s.trim(), "1"),
            };
            let num: i64 = num.parse().map_err(|_| format!("bad slope `{s}`"))?;
            let den: i64 = den.parse().map_err(|_| format!("bad slope `{s}`"))?;
            if den == 0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(Rational::new(num, den))
        }
        other => Err(format!("slope {other} is not an integer or a/b")),
    }
}

mod finite_points_serde {
    use super::*;

    pub fn serialize<S: Serializer>(points: &[FinitePoint], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(&str, u32, u32)> = points.iter().map(|p| (p.label.as_str(), p.drop, p.swan)).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<FinitePoint>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Row {
            Tuple(String, u32, u32),
            Object { label: String, drop: u32, swan: u32 },
        }
        let rows: Vec<Row> = Vec::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| match r {
                Row::Tuple(label, drop, swan) | Row::Object { label, drop, swan } => FinitePoint { label, drop, swan },
            })
            .collect())
    }
}

mod slopes_serde {
    use super::*;

    pub fn serialize<S: Serializer>(slopes: &Option<Vec<Slope>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Option<Vec<(String, serde_json::Value)>> =
            slopes.as_ref().map(|v| v.iter().map(|sl| (sl.label.clone(), rational_to_json(&sl.value))).collect());
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Slope>>, D::Error> {
        let rows: Option<Vec<(String, serde_json::Value)>> = Option::deserialize(d)?;
        rows.map(|rows| {
            rows.into_iter()
                .map(|(label, v)| Ok(Slope { label, value: rational_from_json(&v).map_err(de::Error::custom)? }))
                .collect()
        })
        .transpose()
    }
}

mod opt_rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        r.as_ref().map(rational_to_json).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let v: Option<serde_json::Value> = Option::deserialize(d)?;
        v.map(|v| rational_from_json(&v).map_err(de::Error::custom)).transpose()
    }
}
