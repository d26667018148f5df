//! Full report for a bundled configuration written to a directory.

use corrlab::asymptotics::Budget;
use corrlab::lab::config::bundled;
use corrlab::lab::{emit_report, Experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "schottky-pair".into());
    let out = args.next().unwrap_or_else(|| "corrlab-report".into());
    let mut cfg = bundled(&name).ok_or("unknown bundled configuration")?;
    cfg.max_word_length = 9;
    let exp = Experiment::prepare(cfg, std::path::Path::new("."), None)?;
    let an = exp.analyze()?;
    let report = exp.report(&an, &Budget::default())?;
    emit_report(&exp, &report, std::path::Path::new(&out))?;
    print!("{}", report.summary);
    println!("artifacts written to {out}");
    Ok(())
}
