//! Per-step records and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::geom::{RotationMatrix, Vec3};

use super::SimError;

/// One closed-loop sample. Angles in rad, energies in J, forces in N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    pub omega: Vec3,
    pub r: RotationMatrix,
    pub x_d: Vec3,
    pub r_dc: RotationMatrix,
    pub e_x_norm: f64,
    pub e_v_norm: f64,
    pub e_r_norm: f64,
    pub e_omega_norm: f64,
    /// Ψ of `R` against the desired `R_d`.
    pub psi_d: f64,
    /// Planner error of `R_dc` against `R_d` (gain `K_dc`).
    pub psi_dc: f64,
    /// Ψ of `R` against `R_dc`; drives the force scaling.
    pub psi: f64,
    pub c: f64,
    pub cos_theta_d: f64,
    pub cos_theta: f64,
    pub f_c_norm: f64,
    pub e_f: Vec3,
    /// Angle between `e3` and the body third axis.
    pub alpha_tilt: f64,
    /// Angle between `e3` and the desired third axis.
    pub alpha_tilt_d: f64,
    /// `½ e_ωᵀ I e_ω + Ψ`
    pub v_r: f64,
    pub v_x: f64,
    pub v_total: f64,
    pub projection_active: bool,
    /// Body-frame control force.
    pub f_c: Vec3,
    /// `‖b_r3^p‖`
    pub bp_norm: f64,
    /// Body-frame reference rate `ω_dc`.
    pub omega_dc: Vec3,
}

#[rustfmt::skip]
pub const HEADER: [&str; 58] = [
    "t", "x1", "x2", "x3", "v1", "v2", "v3", "w1", "w2", "w3",
    "R11", "R12", "R13", "R21", "R22", "R23", "R31", "R32", "R33",
    "xd1", "xd2", "xd3",
    "Rdc11", "Rdc12", "Rdc13", "Rdc21", "Rdc22", "Rdc23", "Rdc31", "Rdc32", "Rdc33",
    "ex_norm", "ev_norm", "eR_norm", "ew_norm",
    "psi_d", "psi_dc", "psi", "c", "cos_theta_d", "cos_theta", "fc_norm",
    "ef1", "ef2", "ef3", "alpha_tilt", "alpha_tilt_d", "V_R", "V_x", "V", "projection_active",
    "fc1", "fc2", "fc3", "bp_norm", "wdc1", "wdc2", "wdc3",
];

/// Column names in file order.
pub fn header() -> &'static [&'static str] {
    &HEADER
}

impl TelemetryRecord {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(header().len());
        out.push(self.t);
        out.extend(self.x.iter());
        out.extend(self.v.iter());
        out.extend(self.omega.iter());
        out.extend(self.r.to_row_array());
        out.extend(self.x_d.iter());
        out.extend(self.r_dc.to_row_array());
        out.extend([
            self.e_x_norm,
            self.e_v_norm,
            self.e_r_norm,
            self.e_omega_norm,
            self.psi_d,
            self.psi_dc,
            self.psi,
            self.c,
            self.cos_theta_d,
            self.cos_theta,
            self.f_c_norm,
        ]);
        out.extend(self.e_f.iter());
        out.extend([self.alpha_tilt, self.alpha_tilt_d, self.v_r, self.v_x, self.v_total]);
        out.push(if self.projection_active { 1.0 } else { 0.0 });
        out.extend(self.f_c.iter());
        out.push(self.bp_norm);
        out.extend(self.omega_dc.iter());
        out
    }
}

fn format_value(v: f64) -> String {
    // 17 significant digits round-trip every finite double.
    format!("{v:.16e}")
}

pub fn write_csv_to<W: Write>(records: &[TelemetryRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(header())?;
    for rec in records {
        let fields: Vec<String> = rec
            .values()
            .into_iter()
            .enumerate()
            .map(|(i, v)| if header()[i] == "projection_active" { format!("{}", v as u8) } else { format_value(v) })
            .collect();
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[TelemetryRecord], path: &Path) -> Result<(), SimError> {
    let io = |e: std::io::Error| SimError::Io { path: path.to_path_buf(), message: e.to_string() };
    let file = std::fs::File::create(path).map_err(io)?;
    write_csv_to(records, std::io::BufWriter::new(file))
        .map_err(|e| SimError::Io { path: path.to_path_buf(), message: e.to_string() })
}

/// Parses a telemetry file back into rows of numbers keyed by [`header`].
pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>, SimError> {
    let bad = |m: String| SimError::Io { path: path.to_path_buf(), message: m };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let head: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if head != header() {
        return Err(bad("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("`{f}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::exp_so3;

    fn sample(t: f64) -> TelemetryRecord {
        TelemetryRecord {
            t,
            x: Vec3::new(0.1, 1.0 / 3.0, -2.5e-17),
            v: Vec3::new(1e300, -0.0, 7.0),
            omega: Vec3::new(std::f64::consts::PI, 0.2, 0.3),
            r: exp_so3(&Vec3::new(0.3, -0.2, 0.1)),
            x_d: Vec3::zeros(),
            r_dc: RotationMatrix::identity(),
            e_x_norm: 0.1,
            e_v_norm: 0.2,
            e_r_norm: 0.3,
            e_omega_norm: 0.4,
            psi_d: 1.0,
            psi_dc: 2.0,
            psi: 3.0,
            c: 0.9,
            cos_theta_d: 0.7,
            cos_theta: 0.7,
            f_c_norm: 18.6,
            e_f: Vec3::new(1e-9, 2e-9, 3e-9),
            alpha_tilt: 0.5,
            alpha_tilt_d: 0.6,
            v_r: 4.0,
            v_x: 5.0,
            v_total: 9.0,
            projection_active: true,
            f_c: Vec3::new(0.0, 0.1, 18.6),
            bp_norm: 0.25,
            omega_dc: Vec3::new(0.0, 0.5, -0.5),
        }
    }

    #[test]
    fn header_matches_values() {
        assert_eq!(header().len(), 58);
        assert_eq!(sample(0.0).values().len(), header().len());
    }

    #[test]
    fn empty_is_header_only() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{}\n", header().join(",")));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let recs = [sample(0.0), sample(1e-3)];
        write_csv(&recs, &path).unwrap();
        let rows = read_csv(&path).unwrap();
        for (rec, row) in recs.iter().zip(&rows) {
            for (a, b) in rec.values().iter().zip(row) {
                assert_eq!(a.to_bits(), b.to_bits(), "{a} vs {b}");
            }
        }
        assert!(std::fs::read_to_string(&path).unwrap().ends_with('\n'));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let path = Path::new("/nonexistent-dir/t.csv");
        let e = write_csv(&[], path).unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/t.csv"));
    }
}
