//! Command implementations behind the `qdiff` binary.
//!
//! Every command renders into a caller-supplied writer and reports failure
//! as a [`CliError`] carrying its exit code, so the binary is a thin shell
//! and the commands can be driven in-process by tests.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qdiff_core::likelihood::StatisticKind;
use qdiff_core::lr_inference::{acceptance_grid, lr_test};
use qdiff_core::sim::{self, Distribution, ScenarioSpec};
use qdiff_core::{difference_interval, ConfidenceInterval, Error, Method, OrderedSample, QuantileSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{method}: {message}")]
    Degenerate { method: String, message: String },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Degenerate { .. } => EXIT_DEGENERATE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    /// Classifies a library error raised while running `method`.
    fn from_core(method: &str, e: Error) -> Self {
        match e {
            Error::InsufficientSample(msg) => CliError::Degenerate {
                method: method.to_string(),
                message: format!("insufficient sample: {msg}"),
            },
            Error::DegenerateRegion => CliError::Degenerate {
                method: method.to_string(),
                message: e.to_string(),
            },
            Error::Numerical(_) => CliError::Internal(format!("{method}: {e}")),
            _ => CliError::Input(format!("{method}: {e}")),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Internal(format!("write failed: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "qdiff", version, about = "Confidence intervals and tests for a difference in quantiles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Confidence intervals for tau_t - tau_c
    Ci(CiArgs),
    /// Likelihood-ratio test of tau_t = tau_c + d
    Test(TestArgs),
    /// Export the acceptance region grid in index space
    Region(RegionArgs),
    /// Run a seeded Monte Carlo coverage study
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Control sample: one number per line; `-` reads stdin
    #[arg(long)]
    pub control: PathBuf,
    /// Treatment sample: one number per line; `-` reads stdin
    #[arg(long)]
    pub treatment: PathBuf,
    /// Skip the first line of each input file
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct LevelArgs {
    /// Quantile level, in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Significance level, in (0, 1)
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

impl LevelArgs {
    fn spec(&self) -> CliResult<QuantileSpec> {
        QuantileSpec::new(self.q, self.alpha).map_err(|e| CliError::Input(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct StatisticArgs {
    /// Use the exact binomial statistic (default when both samples have at
    /// most 10000 observations)
    #[arg(long, conflicts_with = "asymptotic")]
    pub exact: bool,
    /// Use the normal-limit quadratic statistic (default above 10000
    /// observations)
    #[arg(long)]
    pub asymptotic: bool,
}

impl StatisticArgs {
    fn kind(&self, n_c: usize, n_t: usize) -> StatisticKind {
        if self.exact {
            StatisticKind::Exact
        } else if self.asymptotic {
            StatisticKind::Asymptotic
        } else {
            StatisticKind::default_for(n_c, n_t)
        }
    }
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    /// Comma-separated list of lr_conservative, lr_two_step, price_bonnet,
    /// donner_zou, or `all`
    #[arg(long, default_value = "all")]
    pub methods: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    /// Hypothesized difference tau_t - tau_c
    #[arg(long, allow_negative_numbers = true)]
    pub d: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Control sample; its size sets n_c
    #[arg(long, requires = "treatment", conflicts_with_all = ["n_c", "n_t"])]
    pub control: Option<PathBuf>,
    /// Treatment sample; its size sets n_t
    #[arg(long, requires = "control")]
    pub treatment: Option<PathBuf>,
    /// Skip the first line of each input file
    #[arg(long)]
    pub header: bool,
    /// Control sample size, when no files are given
    #[arg(long, requires = "n_t", required_unless_present = "control")]
    pub n_c: Option<usize>,
    /// Treatment sample size, when no files are given
    #[arg(long, requires = "n_c")]
    pub n_t: Option<usize>,
    #[command(flatten)]
    pub level: LevelArgs,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Control distribution: normal:MEAN:SD, lognormal:MU:SIGMA,
    /// exponential:RATE or uniform:LOW:HIGH
    #[arg(long, default_value = "normal:0:1", allow_hyphen_values = true)]
    pub dist_c: String,
    /// Treatment distribution, same syntax as --dist-c
    #[arg(long, default_value = "normal:0:1", allow_hyphen_values = true)]
    pub dist_t: String,
    #[arg(long, default_value_t = 500)]
    pub n_c: usize,
    #[arg(long, default_value_t = 500)]
    pub n_t: usize,
    #[command(flatten)]
    pub level: LevelArgs,
    #[arg(long, default_value_t = 5000)]
    pub replications: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated method list or `all`
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// Worker threads; 0 uses one per core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Parses `all` or a comma-separated list of difference methods, keeping
/// the first occurrence of each.
pub fn parse_methods(text: &str) -> CliResult<Vec<Method>> {
    if text.trim() == "all" {
        return Ok(Method::DIFFERENCE.to_vec());
    }
    let mut methods = Vec::new();
    for token in text.split(',').map(str::trim) {
        let method: Method = token
            .parse()
            .map_err(|_| CliError::Input(format!("unknown method '{token}'")))?;
        if !Method::DIFFERENCE.contains(&method) {
            return Err(CliError::Input(format!("'{token}' is not a two-sample method")));
        }
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    Ok(methods)
}

/// Reads a single-column numeric sample. Blank lines are skipped; anything
/// else that is not a finite number is reported with its file and line.
pub fn read_sample<R: BufRead>(reader: R, name: &str, header: bool) -> CliResult<OrderedSample> {
    let mut values = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| CliError::Input(format!("{name}:{line_no}: {e}")))?;
        if header && k == 0 {
            continue;
        }
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(CliError::Input(format!("{name}:{line_no}: non-finite value '{token}'"))),
            Err(_) => return Err(CliError::Input(format!("{name}:{line_no}: cannot parse '{token}' as a number"))),
        }
    }
    if values.is_empty() {
        return Err(CliError::Input(format!("{name}: no observations")));
    }
    OrderedSample::new(values).map_err(|e| CliError::Input(format!("{name}: {e}")))
}

fn load(path: &PathBuf, header: bool, stdin: &mut Option<&mut dyn Read>) -> CliResult<OrderedSample> {
    let name = path.display().to_string();
    if name == "-" {
        let reader = stdin
            .take()
            .ok_or_else(|| CliError::Input("stdin ('-') can supply only one sample".into()))?;
        read_sample(BufReader::new(reader), "<stdin>", header)
    } else {
        let file = File::open(path).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        read_sample(BufReader::new(file), &name, header)
    }
}

fn load_pair(
    control: &PathBuf,
    treatment: &PathBuf,
    header: bool,
    stdin: &mut dyn Read,
) -> CliResult<(OrderedSample, OrderedSample)> {
    let mut stdin = Some(stdin);
    Ok((load(control, header, &mut stdin)?, load(treatment, header, &mut stdin)?))
}

#[derive(Debug, Serialize)]
struct CiRecord<'a> {
    method: &'a str,
    lower: f64,
    upper: f64,
    alpha: f64,
    q: f64,
    n_c: usize,
    n_t: usize,
    flags: Vec<&'static str>,
}

fn json_line<W: Write + ?Sized, T: Serialize>(out: &mut W, value: &T) -> CliResult<()> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

/// One interval per requested method. Intervals that succeed are written
/// even when another method fails; the first failure decides the error.
pub fn cmd_ci(args: &CiArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult<()> {
    let spec = args.level.spec()?;
    let methods = parse_methods(&args.methods)?;
    let (control, treatment) = load_pair(&args.input.control, &args.input.treatment, args.input.header, stdin)?;
    let kind = args.statistic.kind(control.len(), treatment.len());

    let results: Vec<(Method, Result<ConfidenceInterval, Error>)> = methods
        .iter()
        .map(|&m| (m, difference_interval(m, &control, &treatment, &spec, kind)))
        .collect();

    if args.format == Format::Csv {
        writeln!(out, "method,lower,upper,alpha,q,n_c,n_t,flags")?;
    }
    let mut first_error = None;
    for (method, result) in results {
        match result {
            Ok(ci) => {
                let record = CiRecord {
                    method: method.as_str(),
                    lower: ci.lower,
                    upper: ci.upper,
                    alpha: spec.alpha(),
                    q: spec.q(),
                    n_c: control.len(),
                    n_t: treatment.len(),
                    flags: ci.flags.iter().map(|f| f.as_str()).collect(),
                };
                match args.format {
                    Format::Json => json_line(out, &record)?,
                    Format::Csv => writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        record.method,
                        record.lower,
                        record.upper,
                        record.alpha,
                        record.q,
                        record.n_c,
                        record.n_t,
                        record.flags.join(";")
                    )?,
                }
            }
            Err(e) => {
                first_error.get_or_insert(CliError::from_core(method.as_str(), e));
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

#[derive(Debug, Serialize)]
struct TestRecord {
    d: f64,
    statistic: f64,
    p_value: f64,
    i_star: usize,
    j_star: usize,
    reject_at_alpha: bool,
}

pub fn cmd_test(args: &TestArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult<()> {
    let spec = args.level.spec()?;
    if !args.d.is_finite() {
        return Err(CliError::Input(format!("--d must be finite, got {}", args.d)));
    }
    let (control, treatment) = load_pair(&args.input.control, &args.input.treatment, args.input.header, stdin)?;
    let core = |e| CliError::from_core("lr_test", e);
    let result = lr_test(&control, &treatment, &spec, args.d).map_err(core)?;
    let record = TestRecord {
        d: result.d,
        statistic: result.statistic,
        p_value: result.p_value,
        i_star: result.i_star,
        j_star: result.j_star,
        reject_at_alpha: result.rejects(spec.alpha()).map_err(core)?,
    };
    match args.format {
        Format::Json => json_line(out, &record)?,
        Format::Csv => {
            writeln!(out, "d,statistic,p_value,i_star,j_star,reject_at_alpha")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                record.d, record.statistic, record.p_value, record.i_star, record.j_star, record.reject_at_alpha
            )?;
        }
    }
    Ok(())
}

pub fn cmd_region(args: &RegionArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult<()> {
    let spec = args.level.spec()?;
    let (n_c, n_t) = match (&args.control, &args.treatment, args.n_c, args.n_t) {
        (Some(c), Some(t), _, _) => {
            let (c, t) = load_pair(c, t, args.header, stdin)?;
            (c.len(), t.len())
        }
        (None, None, Some(n_c), Some(n_t)) => (n_c, n_t),
        _ => return Err(CliError::Input("give either --control and --treatment, or --n-c and --n-t".into())),
    };
    let kind = args.statistic.kind(n_c, n_t);
    let grid = acceptance_grid(n_c, n_t, &spec, kind).map_err(|e| CliError::from_core("region", e))?;
    match args.format {
        Format::Csv => grid.write_csv(&mut *out)?,
        Format::Json => json_line(out, &grid)?,
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let dist = |text: &str| text.parse::<Distribution>().map_err(|e| CliError::Input(e.to_string()));
    let spec = ScenarioSpec {
        dist_c: dist(&args.dist_c)?,
        dist_t: dist(&args.dist_t)?,
        n_c: args.n_c,
        n_t: args.n_t,
        q: args.level.q,
        alpha: args.level.alpha,
        replications: args.replications,
        master_seed: args.seed,
    };
    spec.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let methods = parse_methods(&args.methods)?;
    let rows = if args.threads == 0 {
        sim::run_coverage_study(&spec, &methods)
    } else {
        sim::run_coverage_study_with_threads(&spec, &methods, args.threads)
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    match args.format {
        Format::Csv => sim::write_coverage_csv(&spec, &rows, &mut *out)?,
        Format::Json => {
            for row in &rows {
                json_line(out, row)?;
            }
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Ci(a) => cmd_ci(a, stdin, out),
        Command::Test(a) => cmd_test(a, stdin, out),
        Command::Region(a) => cmd_region(a, stdin, out),
        Command::Simulate(a) => cmd_simulate(a, out),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Usage errors print clap's message and map to the input-error code.
pub fn run<I, T>(argv: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match execute(&cli, stdin, out).and_then(|()| out.flush().map_err(CliError::from)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "qdiff: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_lists() {
        assert_eq!(parse_methods("all").unwrap(), Method::DIFFERENCE.to_vec());
        assert_eq!(
            parse_methods("donner_zou, lr_two_step,donner_zou").unwrap(),
            vec![Method::DonnerZou, Method::LrTwoStep]
        );
        assert!(parse_methods("one_sample").is_err());
        assert!(parse_methods("bootstrap").is_err());
        assert!(parse_methods("").is_err());
    }

    #[test]
    fn sample_parsing_reports_line() {
        let text = "value\n1.5\n\n2\nabc\n";
        let e = read_sample(text.as_bytes(), "c.csv", true).unwrap_err();
        assert_eq!(e.to_string(), "c.csv:5: cannot parse 'abc' as a number");
        assert_eq!(e.exit_code(), EXIT_INPUT);
        let e = read_sample("1\nNaN\n".as_bytes(), "t.csv", false).unwrap_err();
        assert_eq!(e.to_string(), "t.csv:2: non-finite value 'NaN'");
        let s = read_sample("3\n 1 \r\n2\n".as_bytes(), "x", false).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert!(read_sample("h\n".as_bytes(), "x", true).is_err());
    }

    #[test]
    fn error_classification() {
        let e = CliError::from_core("lr_two_step", Error::InsufficientSample("n=1".into()));
        assert_eq!(e.exit_code(), EXIT_DEGENERATE);
        assert!(e.to_string().starts_with("lr_two_step:"));
        assert_eq!(CliError::from_core("x", Error::DegenerateRegion).exit_code(), EXIT_DEGENERATE);
        assert_eq!(CliError::from_core("x", Error::EmptySample).exit_code(), EXIT_INPUT);
    }
}
