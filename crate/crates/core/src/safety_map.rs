//! Region grid colored by safety band.

use serde::{Deserialize, Serialize};

use crate::ids::Id;
use crate::scoring::{classify_band, Band, BandPolicy, ScoreError, Scores};

/// A map region and the stations located in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub region_id: Id,
    #[serde(default)]
    pub station_ids: Vec<Id>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapBand {
    Green,
    Yellow,
    Red,
    /// No station contributes a score.
    Gray,
}

impl From<Band> for MapBand {
    fn from(band: Band) -> Self {
        match band {
            Band::Green => MapBand::Green,
            Band::Yellow => MapBand::Yellow,
            Band::Red => MapBand::Red,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub region_id: Id,
    pub station_ids: Vec<Id>,
    pub score: Option<f64>,
    pub band: MapBand,
}

/// Each region scores the mean of its stations' scores. Stations without
/// a score are ignored; a region left with none is gray.
pub fn safety_map(scores: &Scores, regions: &[Region], policy: &BandPolicy) -> Result<Vec<MapCell>, ScoreError> {
    policy.check()?;
    regions
        .iter()
        .map(|region| {
            let members: Vec<f64> = region
                .station_ids
                .iter()
                .filter_map(|s| scores.station_scores.get(s).copied())
                .collect();
            let (score, band) = if members.is_empty() {
                (None, MapBand::Gray)
            } else {
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                (Some(mean), classify_band(mean.clamp(0.0, 100.0), policy)?.into())
            };
            Ok(MapCell {
                region_id: region.region_id.clone(),
                station_ids: region.station_ids.clone(),
                score,
                band,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(stations: &[(&str, f64)]) -> Scores {
        Scores {
            station_scores: stations.iter().map(|(id, s)| (Id::from(*id), *s)).collect(),
            ..Scores::default()
        }
    }

    fn region(id: &str, stations: &[&str]) -> Region {
        Region {
            region_id: id.into(),
            station_ids: stations.iter().map(|s| Id::from(*s)).collect(),
        }
    }

    #[test]
    fn bands_per_region() {
        let s = scores(&[("S1", 90.0), ("S2", 60.0), ("S3", 80.0)]);
        let cells = safety_map(
            &s,
            &[region("A", &["S1"]), region("B", &[]), region("C", &["S2", "S3"])],
            &BandPolicy::default(),
        )
        .unwrap();
        assert_eq!(cells[0].band, MapBand::Green);
        assert_eq!(cells[1].band, MapBand::Gray);
        assert_eq!(cells[1].score, None);
        assert_eq!(cells[2].score, Some(70.0));
        assert_eq!(cells[2].band, MapBand::Yellow);
    }
}
