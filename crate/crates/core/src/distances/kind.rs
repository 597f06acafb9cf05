use std::fmt;

use crate::features::rice_bins;
use crate::image::NeighborhoodSpec;

use super::DistanceError;

/// Ridge added to the covariance matrices before inversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ridge {
    /// `factor * trace(pooled) / C`; falls back to `factor` when the trace is zero.
    Relative(f64),
    Absolute(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-6)
    }
}

impl Ridge {
    pub fn amount(&self, pooled_trace: f64, channels: usize) -> f64 {
        match *self {
            Ridge::Absolute(eps) => eps,
            Ridge::Relative(factor) => {
                let scale = pooled_trace / channels as f64;
                if scale > 0.0 {
                    factor * scale
                } else {
                    factor
                }
            }
        }
    }

    fn validate(&self) -> Result<(), DistanceError> {
        let v = match *self {
            Ridge::Relative(v) | Ridge::Absolute(v) => v,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(DistanceError::InvalidParameter(format!("ridge must be non-negative, got {v}")))
        }
    }
}

/// Which pixel distance to use, with the parameters it needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistanceKind {
    /// Squared Euclidean distance between single attribute vectors.
    EuclideanSq,
    /// Per-channel local histograms compared with the quadratic-form distance.
    /// `bins: None` applies the Rice rule to the window size.
    QfHistogram {
        neighborhood: NeighborhoodSpec,
        bins: Option<usize>,
    },
    Bhattacharyya {
        neighborhood: NeighborhoodSpec,
        ridge: Ridge,
    },
    Chamfer { neighborhood: NeighborhoodSpec },
    Hausdorff { neighborhood: NeighborhoodSpec },
    HausdorffMedian { neighborhood: NeighborhoodSpec },
    Ssd { neighborhood: NeighborhoodSpec },
}

impl DistanceKind {
    pub const TAGS: [&'static str; 7] = [
        "euclidean-sq",
        "qf-histogram",
        "bhattacharyya",
        "chamfer",
        "hausdorff",
        "hausdorff-median",
        "ssd",
    ];

    /// Builds a kind from its tag with default parameters for the given window.
    pub fn from_tag(tag: &str, neighborhood: NeighborhoodSpec) -> Result<Self, DistanceError> {
        Ok(match tag {
            "euclidean-sq" => DistanceKind::EuclideanSq,
            "qf-histogram" => DistanceKind::QfHistogram {
                neighborhood,
                bins: None,
            },
            "bhattacharyya" => DistanceKind::Bhattacharyya {
                neighborhood,
                ridge: Ridge::default(),
            },
            "chamfer" => DistanceKind::Chamfer { neighborhood },
            "hausdorff" => DistanceKind::Hausdorff { neighborhood },
            "hausdorff-median" => DistanceKind::HausdorffMedian { neighborhood },
            "ssd" => DistanceKind::Ssd { neighborhood },
            other => {
                return Err(DistanceError::InvalidParameter(format!(
                    "unknown distance kind '{other}' (expected one of {})",
                    Self::TAGS.join(", ")
                )))
            }
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            DistanceKind::EuclideanSq => "euclidean-sq",
            DistanceKind::QfHistogram { .. } => "qf-histogram",
            DistanceKind::Bhattacharyya { .. } => "bhattacharyya",
            DistanceKind::Chamfer { .. } => "chamfer",
            DistanceKind::Hausdorff { .. } => "hausdorff",
            DistanceKind::HausdorffMedian { .. } => "hausdorff-median",
            DistanceKind::Ssd { .. } => "ssd",
        }
    }

    /// The window for texture-aware kinds; `None` for the baseline.
    pub fn neighborhood(&self) -> Option<&NeighborhoodSpec> {
        match self {
            DistanceKind::EuclideanSq => None,
            DistanceKind::QfHistogram { neighborhood, .. }
            | DistanceKind::Bhattacharyya { neighborhood, .. }
            | DistanceKind::Chamfer { neighborhood }
            | DistanceKind::Hausdorff { neighborhood }
            | DistanceKind::HausdorffMedian { neighborhood }
            | DistanceKind::Ssd { neighborhood } => Some(neighborhood),
        }
    }

    /// Histogram bin count for the QF kind.
    pub fn bins(&self) -> Option<usize> {
        match self {
            DistanceKind::QfHistogram { neighborhood, bins } => {
                Some(bins.unwrap_or_else(|| rice_bins(neighborhood.size())))
            }
            _ => None,
        }
    }

    pub fn is_point_cloud(&self) -> bool {
        matches!(
            self,
            DistanceKind::Chamfer { .. }
                | DistanceKind::Hausdorff { .. }
                | DistanceKind::HausdorffMedian { .. }
                | DistanceKind::Ssd { .. }
        )
    }

    pub fn validate(&self) -> Result<(), DistanceError> {
        if let Some(n) = self.neighborhood() {
            n.validate()?;
        }
        match self {
            DistanceKind::QfHistogram { bins: Some(0), .. } => Err(DistanceError::InvalidParameter(
                "histogram bin count must be positive".into(),
            )),
            DistanceKind::Bhattacharyya { ridge, .. } => ridge.validate(),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())?;
        if let Some(n) = self.neighborhood() {
            write!(f, "(eta={}", n.radius)?;
            if let Some(sigma) = n.effective_sigma() {
                write!(f, ", gaussian sigma={sigma}")?;
            }
            if let Some(b) = self.bins() {
                write!(f, ", B={b}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        let n = NeighborhoodSpec::uniform(1);
        for tag in DistanceKind::TAGS {
            assert_eq!(DistanceKind::from_tag(tag, n).unwrap().tag(), tag);
        }
        assert!(DistanceKind::from_tag("emd", n).is_err());
    }

    #[test]
    fn params_present_only_where_needed() {
        let n = NeighborhoodSpec::uniform(1);
        assert_eq!(DistanceKind::EuclideanSq.neighborhood(), None);
        assert_eq!(DistanceKind::from_tag("qf-histogram", n).unwrap().bins(), Some(5));
        assert_eq!(DistanceKind::from_tag("chamfer", n).unwrap().bins(), None);
        let bad = DistanceKind::Bhattacharyya {
            neighborhood: n,
            ridge: Ridge::Absolute(-1.0),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn relative_ridge_scales_with_trace() {
        let r = Ridge::Relative(1e-6);
        assert_eq!(r.amount(4.0, 2), 2e-6);
        assert_eq!(r.amount(0.0, 2), 1e-6);
        assert_eq!(Ridge::Absolute(0.5).amount(100.0, 3), 0.5);
    }
}
