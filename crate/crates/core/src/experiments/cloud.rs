use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::model::NeuronModel;

/// One unit at one time: position `|b_j| a_j` and the sign of its output
/// weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub t: f64,
    pub unit: usize,
    pub x: f64,
    pub y: f64,
    pub sign: f64,
}

/// Unit positions along a trajectory. Needs two-dimensional inputs and a
/// scalar output, so that every unit is a point in the plane.
pub fn neuron_cloud<M: NeuronModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
) -> Result<Vec<CloudPoint>> {
    if model.input_dim() != 2 || model.output_dim() != 1 {
        return Err(Error::invalid(format!(
            "neuron clouds need d = 2 and k = 1, got d = {} and k = {}",
            model.input_dim(),
            model.output_dim()
        )));
    }
    let mut out = Vec::new();
    for s in &traj.samples {
        for (j, n) in model.neurons(&s.w).into_iter().enumerate() {
            let b = n.sign * n.outer[0];
            out.push(CloudPoint {
                t: s.t,
                unit: j,
                x: b.abs() * n.inner[0],
                y: b.abs() * n.inner[1],
                sign: if b >= 0.0 { 1.0 } else { -1.0 },
            });
        }
    }
    Ok(out)
}

/// Writes `t,unit,x,y,sign` for every recorded state.
pub fn export_neuron_cloud<M: NeuronModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    path: &Path,
) -> Result<()> {
    let points = neuron_cloud(model, traj)?;
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["t", "unit", "x", "y", "sign"])?;
    for p in points {
        wtr.write_record(&[
            p.t.to_string(),
            p.unit.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.sign.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
