//! Regenerates the seed-pinned CSV fixtures under `tests/fixtures`.
//!
//! cargo run -p energy-calib-cli --example make_fixtures

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Weekday};
use energy_calib::mrcal::{Buckets, MrOptions};
use energy_calib::simulate::{
    simulate_joint, simulate_mr_realworld, simulate_sp_realworld, CorrStructure, JointMember,
};
use energy_calib::spotprompt::SPParams;
use energy_calib::timeseries::parse_timestamp;
use energy_calib::{Granularity, LevelGranularity, MRParams, Transform};

fn weekdays(start: &str, days: i64) -> Vec<NaiveDateTime> {
    let t0 = parse_timestamp(start).unwrap();
    (0..days)
        .map(|k| t0 + Duration::days(k))
        .filter(|t| !matches!(t.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

fn seasonal(a: f64) -> MRParams {
    let mut p = MRParams::constant(a, a * 4f64.ln(), 1.0, Transform::Log);
    p.buckets = Buckets {
        level: LevelGranularity::CalendarMonth,
        vol: Granularity::Monthly,
    };
    let flat = p.sigma[&0];
    p.sigma = (1..=12u32)
        .map(|m| {
            let mut v = flat;
            v.sigma = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * m as f64 / 12.0).cos();
            (m, v)
        })
        .collect();
    for (k, th) in p.theta.iter_mut() {
        *th = a
            * (4.0 + 0.6 * (2.0 * std::f64::consts::PI * (k.month as f64 - 1.0) / 12.0).sin()).ln();
    }
    p
}

fn write(path: &Path, grid: &[NaiveDateTime], cols: &[(&str, Vec<f64>)]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let header: Vec<&str> = std::iter::once("date")
        .chain(cols.iter().map(|c| c.0))
        .collect();
    w.write_record(&header).unwrap();
    for (k, t) in grid.iter().enumerate() {
        let mut row = vec![t.date().to_string()];
        row.extend(cols.iter().map(|c| c.1[k].to_string()));
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    println!("wrote {}", path.display());
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).unwrap();

    // one-factor, a = 40, ten years of weekdays
    let grid = weekdays("2011-01-01", 10 * 365 + 2);
    let p = seasonal(40.0);
    let x = simulate_mr_realworld(&p, &grid, 4f64.ln(), 1, 40, false).unwrap();
    let price: Vec<f64> = x
        .set("x")
        .unwrap()
        .path(0)
        .iter()
        .map(|v| v.exp())
        .collect();
    write(&dir.join("mr_a40.csv"), &grid, &[("price", price)]);

    // two one-factor series with correlated drivers, rho = 0.7
    let members = vec![
        JointMember::Mr {
            label: "gas".into(),
            params: MRParams::constant(30.0, 30.0 * 3f64.ln(), 0.8, Transform::Log),
            x0: 3f64.ln(),
        },
        JointMember::Mr {
            label: "power".into(),
            params: MRParams::constant(60.0, 60.0 * 40f64.ln(), 1.2, Transform::Log),
            x0: 40f64.ln(),
        },
    ];
    let corr = CorrStructure::pair("gas", "power", 0.7);
    let out = simulate_joint(&members, &corr, &grid, 1, 70, false).unwrap();
    let col = |l: &str| {
        out.set(l)
            .unwrap()
            .path(0)
            .iter()
            .map(|v| v.exp())
            .collect::<Vec<f64>>()
    };
    write(&dir.join("gas.csv"), &grid, &[("price", col("gas"))]);
    write(&dir.join("power.csv"), &grid, &[("price", col("power"))]);

    // spot and prompt index, two years daily
    let t0 = parse_timestamp("2018-01-01").unwrap();
    let daily: Vec<NaiveDateTime> = (0..731).map(|k| t0 + Duration::days(k)).collect();
    let sp = SPParams::constant(150.0, 0.02, 0.05, 0.8, 0.5, 0.3);
    let out = simulate_sp_realworld(&sp, &daily, 20.0, 21.0, 1, 150, false).unwrap();
    write(
        &dir.join("spot_index.csv"),
        &daily,
        &[
            ("spot", out.set("spot").unwrap().path(0).to_vec()),
            ("index", out.set("index").unwrap().path(0).to_vec()),
        ],
    );

    // sanity figures for the fixture bounds used by the tests
    let s = energy_calib::timeseries::load_csv(dir.join("mr_a40.csv"), "price").unwrap();
    let opts = MrOptions {
        buckets: Buckets {
            level: LevelGranularity::CalendarMonth,
            vol: Granularity::Monthly,
        },
        ..Default::default()
    };
    let cal = energy_calib::mrcal::calibrate(&s, Transform::Log, &opts).unwrap();
    println!("mr_a40: a = {} +- {:?}", cal.params.a, cal.params.a_stderr);
}
