use std::io::Write;
use std::path::Path;

use super::{ScenarioError, SimLog};

/// Column names: `t`, then `y_i, y_i_ref` per output, `u_j, u_j_nom` per
/// control, `dy_i`, `du_j`, `F_j_est`, `F_j_valid`, `clamp_j`.
pub fn csv_header(outputs: usize, channels: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=outputs {
        h.push(format!("y{i}"));
        h.push(format!("y{i}_ref"));
    }
    for j in 1..=channels {
        h.push(format!("u{j}"));
        h.push(format!("u{j}_nom"));
    }
    h.extend((1..=outputs).map(|i| format!("dy{i}")));
    h.extend((1..=channels).map(|j| format!("du{j}")));
    h.extend((1..=channels).map(|j| format!("F{j}_est")));
    h.extend((1..=channels).map(|j| format!("F{j}_valid")));
    h.extend((1..=channels).map(|j| format!("clamp{j}")));
    h
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Writes the log as CSV; floats carry 17 significant digits so they round-trip.
pub fn write_csv(log: &SimLog, out: impl Write) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(log.outputs, log.channels))?;
    for r in &log.records {
        let mut row = vec![num(r.t)];
        for i in 0..log.outputs {
            row.push(num(r.y[i]));
            row.push(num(r.y_ref[i]));
        }
        for j in 0..log.channels {
            row.push(num(r.u[j]));
            row.push(num(r.u_nominal[j]));
        }
        row.extend(r.dy.iter().map(|&v| num(v)));
        row.extend(r.du.iter().map(|&v| num(v)));
        row.extend(r.f_est.iter().map(|&v| num(v)));
        row.extend(r.f_valid.iter().map(|&b| flag(b)));
        row.extend(r.clamped.iter().map(|&b| flag(b)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(log: &SimLog, path: &Path) -> Result<(), ScenarioError> {
    let file = std::fs::File::create(path)?;
    write_csv(log, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin, run_scenario};

    #[test]
    fn header_for_two_by_two() {
        assert_eq!(
            csv_header(2, 2).join(","),
            "t,y1,y1_ref,y2,y2_ref,u1,u1_nom,u2,u2_nom,dy1,dy2,du1,du2,F1_est,F2_est,F1_valid,F2_valid,clamp1,clamp2"
        );
    }

    #[test]
    fn values_round_trip() {
        let mut s = builtin("ultra-local").unwrap();
        s.timing.duration = 0.5;
        let log = run_scenario(&s).unwrap();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), log.len());
        for (row, rec) in rows.iter().zip(&log.records) {
            assert_eq!(row[0].parse::<f64>().unwrap(), rec.t);
            assert_eq!(row[1].parse::<f64>().unwrap(), rec.y[0]);
            assert_eq!(row[3].parse::<f64>().unwrap(), rec.u[0]);
            assert_eq!(&row[8], if rec.f_valid[0] { "1" } else { "0" });
        }
    }
}
