use std::io::Write;

use super::Trajectory;
use crate::error::Result;
use crate::scalar::Real;

pub const CSV_HEADER: [&str; 10] = ["t", "x", "y", "theta", "rho", "delta", "gamma", "v", "omega", "V"];

impl<T: Real> Trajectory<T> {
    /// Writes one row per recorded sample. `V` is left empty when no
    /// Lyapunov function was attached.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for i in 0..self.len() {
            let (p, q, u) = (&self.states[i], &self.cartesian[i], &self.inputs[i]);
            let v = self.lyapunov.get(i).map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                self.times[i].to_string(),
                q.x.to_string(),
                q.y.to_string(),
                q.theta.to_string(),
                p.rho.to_string(),
                p.delta.to_string(),
                p.gamma.to_string(),
                u.v.to_string(),
                u.omega.to_string(),
                v,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
