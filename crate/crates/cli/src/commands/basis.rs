use std::io::Write;

use anyhow::Result;
use clap::Args;

use sparse_pce::basis::enumerate_basis;

use crate::config::ConfigMap;

#[derive(Args)]
pub struct BasisArgs {
    /// Input dimension d.
    #[arg(long)]
    dim: Option<usize>,
    /// Total polynomial order p.
    #[arg(long)]
    order: Option<usize>,
}

pub fn run(args: BasisArgs, config: &ConfigMap) -> Result<i32> {
    let dim: usize = config.resolve_required(args.dim, "dim")?;
    let order: usize = config.resolve_required(args.order, "order")?;
    let basis = enumerate_basis(dim, order)?;

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mut emit = || -> std::io::Result<()> {
        writeln!(out, "P={}", basis.cardinality())?;
        let header: Vec<String> = ["index".to_string(), "total".to_string()]
            .into_iter()
            .chain((1..=dim).map(|k| format!("i{k}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (j, idx) in basis.indices().iter().enumerate() {
            write!(out, "{j},{}", idx.total())?;
            for d in idx.degrees() {
                write!(out, ",{d}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    match emit() {
        Ok(()) => Ok(0),
        // A closed pipe (e.g. `| head`) is not an error for CSV output.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(0),
        Err(e) => Err(e.into()),
    }
}
