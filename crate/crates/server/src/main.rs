use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chartforge::attention::LargestComponent;
use chartforge::chart::{derive_geometry, parse_table, ChartSpec, ChartType, MaskVariant, TableFormat};
use chartforge::genclient::{connect, BackendDescriptor, HttpSegmentation};
use chartforge_server::api::{self, DEFAULT_PORT};
use chartforge_server::error::ErrorClass;
use chartforge_server::flows::{run_flow, FlowContext};
use chartforge_server::model::{GenOptions, Method, Target};
use chartforge_server::{Service, ServiceError};
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "chartforge", version, about = "Pictorial chart authoring: generation flows, service and mock backend")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Fg,
    Bg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cond,
    Uncond,
}

#[derive(Subcommand)]
enum Command {
    /// Run one generation flow on a data file and write the result as PNG.
    Gen {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "type", default_value = "bar")]
        chart_type: ChartType,
        #[arg(long)]
        object: String,
        #[arg(long, default_value = "")]
        desc: String,
        #[arg(long, value_enum, default_value = "fg")]
        target: TargetArg,
        #[arg(long, value_enum, default_value = "cond")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Category or x column; the first categorical column by default.
        #[arg(long)]
        x: Option<String>,
        /// Value column; the first numeric column by default.
        #[arg(long)]
        y: Option<String>,
        /// Bubble size column for scatter plots.
        #[arg(long)]
        size: Option<String>,
        #[arg(long)]
        strength: Option<f64>,
        /// Backend base URL, or `mock`.
        #[arg(long, env = "CHARTFORGE_BACKEND_URL", default_value = "mock")]
        backend: String,
    },
    /// Serve the project API.
    Serve {
        #[arg(long, env = "CHARTFORGE_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "CHARTFORGE_DATA_DIR", default_value = "chartforge-data")]
        data_dir: PathBuf,
        /// Backend base URL, or `mock`.
        #[arg(long, env = "CHARTFORGE_BACKEND_URL", default_value = "mock")]
        backend: String,
    },
    /// Serve the deterministic mock over the backend wire protocol.
    MockBackend {
        #[arg(long, default_value_t = 7861)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn descriptor(url: &str) -> BackendDescriptor {
    if url.trim().is_empty() || url == "mock" {
        BackendDescriptor::mock()
    } else {
        BackendDescriptor::http(url)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_gen(
    data: PathBuf,
    chart_type: ChartType,
    options: GenOptions,
    out: PathBuf,
    x: Option<String>,
    y: Option<String>,
    size: Option<String>,
    backend_url: &str,
) -> Result<(), ServiceError> {
    let bytes = std::fs::read(&data).map_err(|e| ServiceError::Storage(format!("{}: {e}", data.display())))?;
    let is_json = data.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let table = parse_table(&bytes, if is_json { TableFormat::Json } else { TableFormat::Csv })?;
    let (dx, dy) = table.default_xy();
    let mut spec = ChartSpec::new(chart_type, x.as_deref().unwrap_or(&dx), y.as_deref().unwrap_or(&dy));
    if let Some(s) = &size {
        spec = spec.with_size_column(s);
    }
    let geometry = derive_geometry(&table, &spec)?;
    let d = descriptor(backend_url);
    let backend = connect(&d)?;
    let flow = if d.is_mock() {
        run_flow(
            &FlowContext {
                geometry: &geometry,
                backend: backend.as_ref(),
                segmentation: &LargestComponent,
            },
            &options,
        )?
    } else {
        run_flow(
            &FlowContext {
                geometry: &geometry,
                backend: backend.as_ref(),
                segmentation: &HttpSegmentation::new(d.clone())?,
            },
            &options,
        )?
    };
    std::fs::write(&out, flow.image.to_png()?).map_err(|e| ServiceError::Storage(format!("{}: {e}", out.display())))?;
    let variant = options.mask_variant.unwrap_or_else(|| MaskVariant::default_for(chart_type));
    println!(
        "wrote {} ({}x{}, {:?} {:?}, mask {}, seed {})",
        out.display(),
        flow.image.width(),
        flow.image.height(),
        options.target,
        options.method,
        variant.name(),
        options.seed
    );
    Ok(())
}

async fn bind(host: &str, port: u16) -> std::io::Result<tokio::net::TcpListener> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{host}:{port}: {e}")))?;
    tokio::net::TcpListener::bind(addr).await
}

fn exit_code(e: &ServiceError) -> ExitCode {
    match e.class() {
        ErrorClass::Invalid | ErrorClass::NotFound | ErrorClass::Unprocessable => ExitCode::from(2),
        ErrorClass::Upstream | ErrorClass::UpstreamTimeout => ExitCode::from(3),
        ErrorClass::Internal => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            data,
            chart_type,
            object,
            desc,
            target,
            method,
            out,
            seed,
            x,
            y,
            size,
            strength,
            backend,
        } => {
            let options = GenOptions {
                object,
                description: desc,
                target: match target {
                    TargetArg::Fg => Target::Foreground,
                    TargetArg::Bg => Target::Background,
                },
                method: match method {
                    MethodArg::Cond => Method::Conditional,
                    MethodArg::Uncond => Method::Unconditional,
                },
                mask_variant: None,
                seed,
                strength,
                augment: None,
            };
            match run_gen(data, chart_type, options, out, x, y, size, &backend) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Command::Serve {
            port,
            host,
            data_dir,
            backend,
        } => {
            let service = match Service::from_env(Some(data_dir), Some(backend)) {
                Ok(s) => Arc::new(s),
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            run_server(&host, port, api::router(service))
        }
        Command::MockBackend { port, host } => run_server(&host, port, api::mock_backend_router()),
    }
}

fn run_server(host: &str, port: u16, app: axum::Router) -> ExitCode {
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = runtime.block_on(async {
        let listener = bind(host, port).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        api::serve(listener, app).await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
