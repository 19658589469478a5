//! CSV output for simulation runs.
//!
//! The file starts with the comment line `# format=1`, then a header row,
//! then one row per recorded step. Values are written with 17 significant
//! digits so a row can be fed back in as an explicit initial state and
//! reproduce the run bit for bit.
//!
//! Column order: `t`, `a1_1..a1_N`, `p1_1..p1_N`, `a2_1..a2_N`,
//! `p2_1..p2_N`, `omega1..omega3`, `q1..q4`, `V`, `Vdot`,
//! `gamma1..gamma3`, `decay_residual`, `y`, `q_drift`, `dist_X`,
//! `u1..u3`, `taug1..taug3`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::sim::{DiagnosticsRecord, RecordSink};

/// One row's worth of column names for a run with `n_modes` modes per plane.
pub fn csv_header(n_modes: usize) -> String {
    let mut cols = Vec::with_capacity(4 * n_modes + 23);
    cols.push("t".to_string());
    for block in ["a1", "p1", "a2", "p2"] {
        for k in 1..=n_modes {
            cols.push(format!("{block}_{k}"));
        }
    }
    for name in ["omega1", "omega2", "omega3", "q1", "q2", "q3", "q4", "V", "Vdot"] {
        cols.push(name.to_string());
    }
    for name in ["gamma1", "gamma2", "gamma3", "decay_residual", "y", "q_drift", "dist_X"] {
        cols.push(name.to_string());
    }
    for name in ["u1", "u2", "u3", "taug1", "taug2", "taug3"] {
        cols.push(name.to_string());
    }
    cols.join(",")
}

/// The numeric fields of one record, in header order.
pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    let beam = &rec.state.beam;
    let rigid = &rec.state.rigid;
    let mut vals = Vec::with_capacity(4 * beam.n_modes() + 23);
    vals.push(rec.t);
    for block in [&beam.a1, &beam.p1, &beam.a2, &beam.p2] {
        vals.extend(block.iter().copied());
    }
    vals.extend([rigid.omega.x, rigid.omega.y, rigid.omega.z]);
    vals.extend([rigid.q.v.x, rigid.q.v.y, rigid.q.v.z, rigid.q.s]);
    vals.extend([rec.v, rec.vdot]);
    vals.extend([rec.gamma.gamma1, rec.gamma.gamma2, rec.gamma.gamma3]);
    vals.extend([rec.decay_residual, rec.y, rec.q_drift, rec.dist_x]);
    vals.extend([rec.u.components.x, rec.u.components.y, rec.u.components.z]);
    vals.extend([rec.tau_g.components.x, rec.tau_g.components.y, rec.tau_g.components.z]);
    let mut line = String::with_capacity(vals.len() * 26);
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v:.16e}");
    }
    line
}

/// Streams records to a writer as CSV. The preamble (format tag plus header)
/// is written on construction.
pub struct CsvSink<W: Write> {
    writer: W,
    n_modes: usize,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut writer: W, n_modes: usize) -> Result<Self> {
        writeln!(writer, "# format=1")?;
        writeln!(writer, "{}", csv_header(n_modes))?;
        Ok(CsvSink { writer, n_modes })
    }

    /// Flushes and hands back the writer.
    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        Ok(self.writer)
    }
}

impl<W: Write> RecordSink for CsvSink<W> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        debug_assert_eq!(rec.state.n_modes(), self.n_modes);
        writeln!(self.writer, "{}", csv_row(rec))?;
        Ok(())
    }
}

/// Opens `path` for writing (truncating) and wraps it in a buffered sink.
pub fn create_csv_sink(
    path: &Path,
    n_modes: usize,
) -> Result<CsvSink<std::io::BufWriter<std::fs::File>>> {
    let file = std::fs::File::create(path)?;
    CsvSink::new(std::io::BufWriter::new(file), n_modes)
}

/// Splits one data row into its values. Rejects rows with the wrong count.
pub fn parse_csv_row(line: &str, n_modes: usize) -> Result<Vec<f64>> {
    let expected = 4 * n_modes + 23;
    let mut vals = Vec::with_capacity(expected);
    for tok in line.split(',') {
        vals.push(tok.trim().parse::<f64>().map_err(|_| {
            crate::error::Error::Parse { line: 0, msg: format!("bad CSV field `{tok}`") }
        })?);
    }
    if vals.len() != expected {
        return Err(crate::error::Error::Parse {
            line: 0,
            msg: format!("expected {expected} CSV fields, got {}", vals.len()),
        });
    }
    Ok(vals)
}

/// Index range of the flat state (a1 | p1 | a2 | p2 | omega | q) within a
/// parsed row.
pub fn state_column_range(n_modes: usize) -> std::ops::Range<usize> {
    1..4 * n_modes + 8
}
