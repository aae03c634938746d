//! Market specifications and the JSON form used by scenarios.

use serde::{Deserialize, Serialize};

use crate::cournot::AspatialMarket;
use crate::error::{Error, Result};
use crate::spatial::SpatialMarket;

/// Either a single market or a set of spatially separated ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Market {
    Aspatial(AspatialMarket),
    Spatial(SpatialMarket),
}

impl From<AspatialMarket> for Market {
    fn from(m: AspatialMarket) -> Self {
        Self::Aspatial(m)
    }
}

impl From<SpatialMarket> for Market {
    fn from(m: SpatialMarket) -> Self {
        Self::Spatial(m)
    }
}

impl Market {
    pub fn n(&self) -> usize {
        match self {
            Self::Aspatial(m) => m.n,
            Self::Spatial(m) => m.n(),
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, Self::Spatial(_))
    }

    /// A single-market problem is a one-node spatial problem with free shipping.
    pub fn to_spatial(&self) -> SpatialMarket {
        match self {
            Self::Aspatial(m) => m.as_spatial(),
            Self::Spatial(m) => m.clone(),
        }
    }

    /// Shipping columns reordered so firm `i` becomes firm `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        match self {
            Self::Aspatial(m) => Self::Aspatial(*m),
            Self::Spatial(m) => {
                let shipping = m
                    .shipping
                    .iter()
                    .map(|row| {
                        let mut out = vec![0.0; row.len()];
                        for (i, &s) in row.iter().enumerate() {
                            out[perm[i]] = s;
                        }
                        out
                    })
                    .collect();
                Self::Spatial(SpatialMarket {
                    alpha: m.alpha.clone(),
                    shipping,
                })
            }
        }
    }
}

/// Scalar or per-entry values; scalars broadcast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOr<T> {
    Scalar(f64),
    Values(T),
}

/// JSON market description:
/// `{"alpha": 103 | [..], "shipping": 1 | [[..], ..], "nodes": v}`.
///
/// Without `shipping`, `nodes`, or an `alpha` array the market is aspatial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub alpha: ScalarOr<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shipping: Option<ScalarOr<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
}

impl MarketSpec {
    pub fn build(&self, n: usize) -> Result<Market> {
        let spatial = self.shipping.is_some()
            || self.nodes.is_some()
            || matches!(self.alpha, ScalarOr::Values(_));
        if !spatial {
            let ScalarOr::Scalar(alpha) = self.alpha else {
                unreachable!()
            };
            return Ok(AspatialMarket::new(alpha, n)?.into());
        }

        let rows_from_shipping = match &self.shipping {
            Some(ScalarOr::Values(rows)) => Some(rows.len()),
            _ => None,
        };
        let rows_from_alpha = match &self.alpha {
            ScalarOr::Values(a) => Some(a.len()),
            ScalarOr::Scalar(_) => None,
        };
        let candidates = [self.nodes, rows_from_alpha, rows_from_shipping];
        let v = candidates.iter().flatten().copied().next().unwrap_or(1);
        if let Some(bad) = candidates.iter().flatten().find(|&&x| x != v) {
            return Err(Error::Invalid(format!(
                "inconsistent node counts in market spec ({v} vs {bad})"
            )));
        }
        let alpha = match &self.alpha {
            ScalarOr::Scalar(a) => vec![*a; v],
            ScalarOr::Values(a) => a.clone(),
        };
        let shipping = match &self.shipping {
            None => vec![vec![0.0; n]; v],
            Some(ScalarOr::Scalar(s)) => vec![vec![*s; n]; v],
            Some(ScalarOr::Values(rows)) => rows.clone(),
        };
        Ok(SpatialMarket::new(alpha, shipping, n)?.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> MarketSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn scalar_market_is_aspatial() {
        let m = spec(r#"{"alpha": 10}"#).build(3).unwrap();
        assert_eq!(m, Market::Aspatial(AspatialMarket { alpha: 10.0, n: 3 }));
    }

    #[test]
    fn broadcasting() {
        let m = spec(r#"{"alpha": 103, "shipping": 1, "nodes": 2}"#)
            .build(5)
            .unwrap();
        let Market::Spatial(s) = m else { panic!() };
        assert_eq!(s.alpha, vec![103.0, 103.0]);
        assert_eq!(s.shipping, vec![vec![1.0; 5]; 2]);

        let m = spec(r#"{"alpha": [10, 20]}"#).build(2).unwrap();
        assert_eq!(m.to_spatial().shipping, vec![vec![0.0; 2]; 2]);
    }

    #[test]
    fn shape_errors() {
        assert!(spec(r#"{"alpha": [10, 20], "nodes": 3}"#).build(2).is_err());
        assert!(spec(r#"{"alpha": 10, "shipping": [[1, 2, 3]]}"#)
            .build(2)
            .is_err());
        assert!(spec(r#"{"alpha": -1}"#).build(2).is_err());
        assert!(spec(r#"{"alpha": 5, "shipping": -1}"#).build(2).is_err());
    }
}
