use serde::{Deserialize, Serialize};

use super::GazetteerError;
use crate::geo::{haversine_distance, GeoPoint};

pub const NOISE: i32 = -1;
const UNVISITED: i32 = -2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanParams {
    pub eps_km: f64,
    /// Neighbourhood size, counting the point itself, needed for a core point.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps_km: 25.0,
            min_pts: 2,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<(), GazetteerError> {
        if !(self.eps_km.is_finite() && self.eps_km > 0.0) {
            return Err(GazetteerError::InvalidParams(format!(
                "eps must be a positive distance, got {}",
                self.eps_km
            )));
        }
        if self.min_pts == 0 {
            return Err(GazetteerError::InvalidParams(
                "min_pts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn neighbours(points: &[GeoPoint], i: usize, eps: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&j| haversine_distance(points[i], points[j]).km() <= eps)
        .collect()
}

/// DBSCAN under the haversine metric. Clusters are numbered from 0 in the
/// order their first core point appears; a border point reachable from
/// several clusters keeps the first one. Unreached points get [`NOISE`].
pub fn dbscan(points: &[GeoPoint], params: &DbscanParams) -> Result<Vec<i32>, GazetteerError> {
    params.validate()?;
    let mut labels = vec![UNVISITED; points.len()];
    let mut next = 0;
    for i in 0..points.len() {
        if labels[i] != UNVISITED {
            continue;
        }
        let seeds = neighbours(points, i, params.eps_km);
        if seeds.len() < params.min_pts {
            labels[i] = NOISE;
            continue;
        }
        let cluster = next;
        next += 1;
        labels[i] = cluster;
        let mut queue = seeds;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            match labels[j] {
                NOISE => labels[j] = cluster,
                UNVISITED => {
                    labels[j] = cluster;
                    let around = neighbours(points, j, params.eps_km);
                    if around.len() >= params.min_pts {
                        queue.extend(around);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(labels)
}
