use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use htplus::base::derive_seed;
use htplus::codec::{join_stripes, split_stripes, Decoder};
use htplus::gf::{FieldSpec, Symbol};
use htplus::params::{DEFAULT_SEED, DEFAULT_THETA};
use htplus::report::{self, BenchEntry, CSV_HEADER};
use htplus::shard::{self, shard_file_name, ShardHeader};
use htplus::verifier::{exhaustive_repair_check, verify_mds, verify_plus_mds, MdsReport};
use htplus::{encode, execute_repair, plan_repair, CodeParams, DataBlock, Error, PlusCode};

/// HashTag+ erasure codes: build, encode, decode, repair, verify, bench.
#[derive(Parser, Debug)]
#[command(name = "htplus", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a code and print its descriptor as JSON
    GenCode(CodeFlags),
    /// Split a file into n shard files
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        code: CodeFlags,
    },
    /// Rebuild a file from any k shards
    Decode {
        /// A shard directory or a list of shard files
        #[arg(long, num_args = 1.., required = true)]
        shards: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Regenerate one lost shard from the others
    Repair {
        #[arg(long)]
        shards: PathBuf,
        #[arg(long)]
        failed: usize,
        /// Print the plan without reading shard data
        #[arg(long)]
        dry_run: bool,
        /// Where to write the rebuilt shard (default: inside the shard directory)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the MDS property and the repair bounds
    Verify {
        #[arg(long)]
        mds: bool,
        #[arg(long)]
        bounds: bool,
        /// JSON list of {n, k, alpha_base, ...} entries to sweep
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt: bool,
        #[command(flatten)]
        code: OptCodeFlags,
    },
    /// Average repair traffic per code
    Bench {
        /// JSON list of {n, k, alpha_base, ...}; defaults to the published points at alpha_base 8
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Args, Debug, Clone)]
struct CodeFlags {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    alpha_base: usize,
    #[arg(long, default_value_t = 8)]
    field_w: u8,
    /// Reduction polynomial including the leading term, e.g. 25, 0x19 or 0b11001
    #[arg(long, value_parser = parse_u32)]
    poly: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_THETA.0)]
    theta: u16,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct OptCodeFlags {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha_base: Option<usize>,
    #[arg(long, default_value_t = 8)]
    field_w: u8,
    #[arg(long, value_parser = parse_u32)]
    poly: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_THETA.0)]
    theta: u16,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

fn parse_u32(s: &str) -> Result<u32, String> {
    let parsed = if let Some(hex) = s.strip_prefix("0x") {
        u32::from_str_radix(hex, 16)
    } else if let Some(bin) = s.strip_prefix("0b") {
        u32::from_str_radix(bin, 2)
    } else {
        s.parse()
    };
    parsed.map_err(|e| e.to_string())
}

impl CodeFlags {
    fn params(&self) -> Result<CodeParams, Failure> {
        let field = match self.poly {
            Some(p) => FieldSpec::new(self.field_w, p)?,
            None => FieldSpec::with_default_poly(self.field_w)?,
        };
        Ok(CodeParams::new(self.n, self.k, self.alpha_base, field, Symbol(self.theta), self.seed)?)
    }
}

impl OptCodeFlags {
    fn resolve(&self) -> Option<CodeFlags> {
        Some(CodeFlags {
            n: self.n?,
            k: self.k?,
            alpha_base: self.alpha_base?,
            field_w: self.field_w,
            poly: self.poly,
            theta: self.theta,
            seed: self.seed,
        })
    }
}

/// A command failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            Error::NotEnoughShards { .. } | Error::MissingRead { .. } => 4,
            Error::HeaderMismatch(_)
            | Error::CorruptHeader(_)
            | Error::TruncatedPayload { .. }
            | Error::UnsupportedVersion(_) => 5,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(3, format!("{}: {e}", path.display()))
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("reports serialize"));
}

fn params_json(p: &CodeParams) -> serde_json::Value {
    json!({
        "n": p.n,
        "k": p.k,
        "alpha_base": p.alpha_b,
        "alpha": p.alpha(),
        "field_w": p.field.w,
        "poly": p.field.poly,
        "theta": p.theta.0,
        "seed": p.seed,
    })
}

fn gen_code(flags: &CodeFlags) -> Result<(), Failure> {
    let params = flags.params()?;
    let code = PlusCode::build(&params)?;
    let base = code.base();
    print_json(&json!({
        "params": params_json(&params),
        "r": params.r(),
        "strategy": format!("{:?}", base.indexes.partition.strategy),
        "mds": base.mds.mode,
        "subsets_checked": base.mds.subsets_checked,
        "coefficient_attempt": base.attempt,
        "coefficient_seed": derive_seed(params.seed, base.attempt),
    }));
    Ok(())
}

fn encode_file(input: &Path, out_dir: &Path, flags: &CodeFlags) -> Result<(), Failure> {
    let params = flags.params()?;
    let code = PlusCode::build(&params)?;
    let bytes = fs::read(input).map_err(|e| io_failure(input, e))?;
    let stripes = split_stripes(&code, &bytes);
    let words = stripes
        .iter()
        .map(|b| encode(&code, b))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out_dir).map_err(|e| io_failure(out_dir, e))?;
    for m in 0..params.n {
        let header = ShardHeader::new(&params, m, words.len(), bytes.len() as u64)?;
        let cols: Vec<Vec<Symbol>> = words.iter().map(|w| w.node(m).to_vec()).collect();
        let path = out_dir.join(shard_file_name(m));
        fs::write(&path, shard::shard_bytes(&header, &cols)?).map_err(|e| io_failure(&path, e))?;
    }
    println!(
        "wrote {} shards of {} stripes ({} bytes)",
        params.n,
        words.len(),
        bytes.len()
    );
    Ok(())
}

type Shard = (ShardHeader, Vec<Vec<Symbol>>);

fn shard_paths(args: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    if let [dir] = args {
        if dir.is_dir() {
            let mut out = Vec::new();
            for entry in fs::read_dir(dir).map_err(|e| io_failure(dir, e))? {
                let path = entry.map_err(|e| io_failure(dir, e))?.path();
                let is_shard = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("shard_"));
                if is_shard && path.is_file() {
                    out.push(path);
                }
            }
            out.sort();
            return Ok(out);
        }
    }
    Ok(args.to_vec())
}

/// Reads shards, keeps one per node and checks they come from one run.
fn load_shards(paths: &[PathBuf]) -> Result<Vec<Shard>, Failure> {
    let mut shards: Vec<Shard> = Vec::new();
    for path in paths {
        let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
        let (h, cols) = shard::read_shard(&bytes).map_err(|e| {
            let f = Failure::from(e);
            Failure::new(f.code, format!("{}: {}", path.display(), f.message))
        })?;
        if let Some((first, _)) = shards.first() {
            if !first.same_run(&h) {
                return Err(Error::HeaderMismatch(format!(
                    "{} does not belong to the same encode run",
                    path.display()
                ))
                .into());
            }
        }
        if !shards.iter().any(|(o, _)| o.node_id == h.node_id) {
            shards.push((h, cols));
        }
    }
    shards.sort_by_key(|(h, _)| h.node_id);
    Ok(shards)
}

fn decode_file(args: &[PathBuf], output: &Path) -> Result<(), Failure> {
    let shards = load_shards(&shard_paths(args)?)?;
    let Some((header, _)) = shards.first() else {
        return Err(Failure::new(4, "no shards found"));
    };
    let params = header.params()?;
    let code = PlusCode::build(&params)?;
    let ids: Vec<usize> = shards.iter().map(|(h, _)| h.node_id as usize).collect();
    let dec = Decoder::new(&code, &ids)?;
    let blocks = (0..header.stripe_count as usize)
        .map(|s| {
            dec.decode(&code, |m| {
                shards
                    .iter()
                    .find(|(h, _)| h.node_id as usize == m)
                    .map(|(_, cols)| cols[s].as_slice())
            })
        })
        .collect::<Result<Vec<DataBlock>, _>>()?;
    let bytes = join_stripes(&code, &blocks, header.payload_len as usize);
    fs::write(output, &bytes).map_err(|e| io_failure(output, e))?;
    println!(
        "decoded {} bytes from nodes {:?}{}",
        bytes.len(),
        dec.nodes(),
        if dec.is_systematic() { " (systematic)" } else { "" }
    );
    Ok(())
}

fn repair_shard(dir: &Path, failed: usize, dry_run: bool, output: Option<&Path>) -> Result<(), Failure> {
    let shards: Vec<Shard> = load_shards(&shard_paths(&[dir.to_path_buf()])?)?
        .into_iter()
        .filter(|(h, _)| h.node_id as usize != failed)
        .collect();
    let Some((header, _)) = shards.first() else {
        return Err(Failure::new(4, "no helper shards found"));
    };
    let params = header.params()?;
    if failed >= params.n {
        return Err(Error::InvalidNode { node: failed }.into());
    }
    let code = PlusCode::build(&params)?;
    let plan = plan_repair(&code, failed)?;
    let m = params.stripe_symbols();
    let line = format!(
        "reads={} symbols ({:.1}% of M) transferred={} per stripe",
        plan.symbols_accessed(),
        100.0 * plan.symbols_transferred() as f64 / m as f64,
        plan.symbols_transferred()
    );
    if dry_run {
        print_json(&plan);
        println!("{line}");
        return Ok(());
    }
    let mut cols = Vec::with_capacity(header.stripe_count as usize);
    for s in 0..header.stripe_count as usize {
        let view: Vec<Option<&[Symbol]>> = (0..params.n)
            .map(|node| {
                shards
                    .iter()
                    .find(|(h, _)| h.node_id as usize == node)
                    .map(|(_, c)| c[s].as_slice())
            })
            .collect();
        cols.push(execute_repair(&code, &plan, &view)?);
    }
    let out_header = ShardHeader { node_id: failed as u8, ..*header };
    let path = output.map_or_else(|| dir.join(shard_file_name(failed)), Path::to_path_buf);
    fs::write(&path, shard::shard_bytes(&out_header, &cols)?).map_err(|e| io_failure(&path, e))?;
    println!("{line}");
    println!(
        "repaired node {failed}: {} stripes, {} symbols read in total",
        cols.len(),
        plan.symbols_transferred() * cols.len()
    );
    Ok(())
}

fn read_entries(path: &Path) -> Result<Vec<BenchEntry>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

/// One code's verification verdict.
fn verify_one(params: &CodeParams, mds: bool, bounds: bool, corrupt: bool) -> Result<(bool, serde_json::Value), Failure> {
    let code = PlusCode::build(params)?;
    let mut out = json!({ "params": params_json(params) });
    let mut passed = true;
    if mds {
        let report: MdsReport = if corrupt {
            // drop one data coefficient from the first parity row
            let mut gen = code.base().generator();
            gen.parity_row_mut(params.k, 0).retain(|&(v, _)| v != 0);
            verify_mds(code.field(), &gen)
        } else {
            verify_plus_mds(&code)
        };
        passed &= report.passed();
        out["mds"] = serde_json::to_value(&report).expect("serializable");
    }
    if bounds {
        let check = exhaustive_repair_check(&code, params.seed)?;
        passed &= check.passed();
        out["repair"] = json!({
            "passed": check.passed(),
            "violations": check.violations(),
            "avg_fraction": check.bandwidth.avg_fraction,
            "access_optimal": check.bandwidth.access_optimal(),
        });
    }
    out["passed"] = json!(passed);
    Ok((passed, out))
}

fn verify(
    mds: bool,
    bounds: bool,
    params_file: Option<&Path>,
    corrupt: bool,
    code: &OptCodeFlags,
) -> Result<(), Failure> {
    let (mds, bounds) = if mds || bounds { (mds, bounds) } else { (true, true) };
    let list: Vec<CodeParams> = match (params_file, code.resolve()) {
        (Some(path), _) => read_entries(path)?
            .iter()
            .map(|e| e.params())
            .collect::<Result<_, _>>()?,
        (None, Some(flags)) => vec![flags.params()?],
        (None, None) => return Err(Failure::new(2, "give --n, --k and --alpha-base, or --params-file")),
    };
    let mut all = true;
    let mut results = Vec::new();
    for p in &list {
        let (ok, v) = verify_one(p, mds, bounds, corrupt)?;
        all &= ok;
        results.push(v);
    }
    if results.len() == 1 {
        print_json(&results[0]);
    } else {
        print_json(&json!({ "passed": all, "results": results }));
    }
    if all {
        Ok(())
    } else {
        Err(Failure::new(6, "property violation"))
    }
}

fn bench(params_file: Option<&Path>, format: Format) -> Result<(), Failure> {
    let entries = match params_file {
        Some(path) => read_entries(path)?,
        None => report::PUBLISHED
            .iter()
            .map(|&(n, k, ..)| BenchEntry::new(n, k, 8))
            .collect(),
    };
    let reports = entries
        .iter()
        .map(report::bench)
        .collect::<Result<Vec<_>, _>>()?;
    match format {
        Format::Json => print_json(&reports),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let io = |e: csv::Error| Failure::new(3, e.to_string());
            w.write_record(CSV_HEADER).map_err(io)?;
            for r in &reports {
                w.write_record(report::csv_row(r)).map_err(io)?;
            }
            w.flush().map_err(|e| Failure::new(3, e.to_string()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::GenCode(flags) => gen_code(&flags),
        Command::Encode { input, out_dir, code } => encode_file(&input, &out_dir, &code),
        Command::Decode { shards, output } => decode_file(&shards, &output),
        Command::Repair {
            shards,
            failed,
            dry_run,
            output,
        } => repair_shard(&shards, failed, dry_run, output.as_deref()),
        Command::Verify {
            mds,
            bounds,
            params_file,
            corrupt,
            code,
        } => verify(mds, bounds, params_file.as_deref(), corrupt, &code),
        Command::Bench { params_file, format } => bench(params_file.as_deref(), format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
