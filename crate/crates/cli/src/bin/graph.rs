use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graph_sync::posegraph::{read_graph, PoseGraph};
use graph_sync::proxy::{build_proxy, kron_reduce, kron_select_or_alternate, laplacian, prune_to_radius, ProxyGraph, ProxyParams};
use graph_sync::spectral::{eigendecompose, spectrum_csv, wavelet_features, FilterBank, DEFAULT_SCALE_COUNT};
use graph_sync_cli::{finish, CliError};

#[derive(Parser)]
#[command(name = "graph", about = "Proxy-graph debugging tools; all output is CSV on stdout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kron-reduce the proxy graph and print the kept edges.
    Reduce {
        #[command(flatten)]
        input: Input,
        /// Keep every fill-in edge instead of pruning to the radius.
        #[arg(long)]
        keep_fill_in: bool,
    },
    /// Laplacian eigenvalues and the filter-bank response at each.
    Spectrum {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_SCALE_COUNT)]
        scales: usize,
    },
    /// Wavelet coefficients of the distance-to-first-node signal.
    Wavelets {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_SCALE_COUNT)]
        scales: usize,
    },
}

#[derive(Args)]
struct Input {
    /// Pose graph file.
    #[arg(long)]
    input: PathBuf,
    /// Neighbor radius, meters.
    #[arg(long, default_value_t = 7.0)]
    radius: f64,
    #[arg(long)]
    squared_distance: bool,
}

impl Input {
    fn load(&self) -> Result<(PoseGraph, ProxyGraph), CliError> {
        let g = read_graph(&self.input)?;
        let mut params = ProxyParams::with_radius(self.radius);
        params.squared_distance = self.squared_distance;
        let p = build_proxy(g.nodes(), &params)?;
        Ok((g, p))
    }
}

fn edges_csv(p: &ProxyGraph) -> String {
    let mut out = String::from("i,j,source_i,source_j,weight\n");
    let a = p.adjacency();
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if a[(i, j)] != 0.0 {
                let _ = writeln!(
                    out,
                    "{i},{j},{},{},{}",
                    p.node(i).source_node_id,
                    p.node(j).source_node_id,
                    a[(i, j)]
                );
            }
        }
    }
    out
}

fn reduce(input: Input, keep_fill_in: bool) -> Result<(), CliError> {
    let (_, p) = input.load()?;
    let keep = kron_select_or_alternate(&laplacian(&p))?;
    let mut r = kron_reduce(&p, &keep)?;
    if !keep_fill_in {
        r = prune_to_radius(&r);
    }
    eprintln!("kept {} of {} nodes, {} edges", r.len(), p.len(), r.edge_count());
    print!("{}", edges_csv(&r));
    Ok(())
}

fn bank_for(p: &ProxyGraph, scales: usize) -> Result<(graph_sync::spectral::SpectralBasis, FilterBank), CliError> {
    let basis = eigendecompose(&laplacian(p))?;
    if basis.lambda_max() <= 0.0 {
        return Err(CliError::Invalid("graph has no edges".into()));
    }
    let bank = FilterBank::meyer(basis.lambda_max(), scales)?;
    Ok((basis, bank))
}

fn spectrum(input: Input, scales: usize) -> Result<(), CliError> {
    let (_, p) = input.load()?;
    let (basis, bank) = bank_for(&p, scales)?;
    print!("{}", spectrum_csv(&basis, &bank));
    Ok(())
}

fn wavelets(input: Input, scales: usize) -> Result<(), CliError> {
    let (g, p) = input.load()?;
    let (basis, bank) = bank_for(&p, scales)?;
    let origin = p.node(0).position;
    let f: Vec<f64> = p.nodes().iter().map(|n| (n.position - origin).norm()).collect();
    let feats = wavelet_features(&basis, &bank, &f)?;
    let mut out = String::from("index,node_id,signal");
    for j in 0..bank.channel_count() {
        let _ = write!(out, ",w_s{j}");
    }
    out.push('\n');
    for (feat, n) in feats.iter().zip(g.nodes()) {
        let _ = write!(out, "{},{},{}", feat.node_index, n.node_id, f[feat.node_index]);
        for c in &feat.coefficients {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    finish(match cli.command {
        Command::Reduce { input, keep_fill_in } => reduce(input, keep_fill_in),
        Command::Spectrum { input, scales } => spectrum(input, scales),
        Command::Wavelets { input, scales } => wavelets(input, scales),
    })
}
