use std::io::{self, Write};

use super::Trajectory;

/// Digits after the point in scientific notation; 17 significant digits in total.
pub const CSV_PRECISION: usize = 16;

fn num(v: f64) -> String {
    format!("{v:.prec$e}", prec = CSV_PRECISION)
}

/// `t,x0..xn,u0..un,d_target,d_unsafe,active_i,V_active`, one row per record.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let m = traj.records.first().map_or(0, |r| r.x.len());
    let mut head = vec!["t".to_string()];
    head.extend((0..m).map(|k| format!("x{k}")));
    head.extend((0..m).map(|k| format!("u{k}")));
    head.extend(["d_target", "d_unsafe", "active_i", "V_active"].map(String::from));
    let omega = traj.records.first().is_some_and(|r| r.omega.is_some());
    if omega {
        head.extend((0..3).map(|k| format!("w{k}")));
    }
    writeln!(w, "{}", head.join(","))?;
    for r in &traj.records {
        let mut row = vec![num(r.t)];
        row.extend(r.x.iter().map(|&v| num(v)));
        row.extend(r.u.iter().map(|&v| num(v)));
        row.push(num(r.d_target));
        row.push(num(r.d_unsafe));
        row.push(r.active_i.map_or(String::new(), |i| i.to_string()));
        row.push(r.v_active.map_or(String::new(), num));
        if let Some(om) = &r.omega {
            row.extend(om.iter().map(|&v| num(v)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Long-format plot data `ic_id,t,d_target,d_unsafe` over several trajectories.
pub fn write_long_csv<'a, W, I>(runs: I, mut w: W) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a Trajectory)>,
{
    writeln!(w, "ic_id,t,d_target,d_unsafe")?;
    for (id, tr) in runs {
        for r in &tr.records {
            writeln!(w, "{id},{},{},{}", num(r.t), num(r.d_target), num(r.d_unsafe))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Termination, TrajectoryRecord, Verdict};
    use crate::geometry::UnitPoint;
    use nalgebra::DVector;

    #[test]
    fn rows_round_trip_at_full_precision() {
        let x = UnitPoint::from_slice(&[0.6, 0.8, 0.0]).unwrap();
        let rec = TrajectoryRecord {
            t: 0.1,
            x: x.clone(),
            u: DVector::from_column_slice(&[1.0 / 3.0, 0.0, -2.0]),
            d_target: 0.4,
            d_unsafe: 1e-17,
            active_i: Some(2),
            v_active: None,
            omega: None,
        };
        let tr = Trajectory {
            records: vec![rec],
            verdict: Verdict {
                termination: Termination::MaxTime,
                safe: true,
                min_margin: 0.0,
                t_final: 0.1,
                final_d_target: 0.4,
            },
        };
        let mut buf = Vec::new();
        write_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x0,x1,x2,u0,u1,u2,d_target,d_unsafe,active_i,V_active");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[4].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[9], "2");
        assert_eq!(row[10], "");
    }
}
