use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use uuis_core::bulkload::{parse_csv, RowResult};
use uuis_core::storage::{seed_fixture, Store, SEED_PASSWORD};
use uuis_core::Uuis;
use uuis_server::config::Config;

#[derive(Debug, Parser)]
#[command(name = "uuis", version, about = "University inventory service")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// SQLite database file; overrides the config file and UUIS_STORE.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        /// Load the demonstration fixture if the store is empty.
        #[arg(long)]
        seed: bool,
    },
    /// Create or upgrade the database schema and exit.
    Migrate,
    /// Load the demonstration fixture into an empty store.
    Seed,
    /// Load assets from a CSV file as the named user.
    Bulkload {
        file: PathBuf,
        #[arg(long)]
        user: String,
        /// Update existing assets keyed by iufaid or legacyid instead of inserting.
        #[arg(long)]
        update: bool,
    },
}

fn open(cfg: &Config) -> anyhow::Result<Uuis> {
    let store = Store::open(&cfg.store)?;
    Ok(Uuis::new(store))
}

fn seed_if_empty(uuis: &Uuis) -> anyhow::Result<bool> {
    if !uuis.store().is_empty()? {
        return Ok(false);
    }
    seed_fixture(uuis.store(), uuis.passwords())?;
    Ok(true)
}

fn bulkload(uuis: &Uuis, file: &Path, user: &str, update: bool) -> anyhow::Result<bool> {
    let bytes = std::fs::read(file).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
    let parsed = parse_csv(&bytes)?;
    let actor = uuis.actor_for_username(user)?;
    let rows = if update {
        uuis.bulk_update(&actor, &parsed)?
    } else {
        uuis.bulk_insert(&actor, &parsed)?
    };
    let mut failed = 0;
    for row in &rows {
        let result = match row.result {
            RowResult::Created => "CREATED",
            RowResult::Updated => "UPDATED",
            RowResult::Failed => {
                failed += 1;
                "FAILED"
            }
        };
        let id = row.asset_id.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
        println!("row {}\t{result}\t{id}\t{}", row.row_index, row.message.as_deref().unwrap_or(""));
    }
    println!("{} rows, {} failed", rows.len(), failed);
    Ok(failed == 0)
}

async fn serve(cfg: Config) -> anyhow::Result<()> {
    let uuis = open(&cfg)?;
    if cfg.seed && seed_if_empty(&uuis)? {
        tracing::info!("loaded demonstration fixture; every seeded user's password is {SEED_PASSWORD:?}");
    }
    let app = uuis_server::app(Arc::new(uuis));
    let listener = tokio::net::TcpListener::bind((cfg.bind.as_str(), cfg.port)).await?;
    tracing::info!(address = %listener.local_addr()?, store = %cfg.store.display(), "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(store) = cli.store {
        cfg.store = store;
    }
    match cli.command {
        Command::Serve { port, bind, seed } => {
            if let Some(p) = port {
                cfg.port = p;
            }
            if let Some(b) = bind {
                cfg.bind = b;
            }
            cfg.seed |= seed;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(cfg))?;
            Ok(true)
        }
        Command::Migrate => {
            let uuis = open(&cfg)?;
            println!(
                "schema ready at {} ({} tables)",
                cfg.store.display(),
                uuis.store().table_names()?.len()
            );
            Ok(true)
        }
        Command::Seed => {
            let uuis = open(&cfg)?;
            if seed_if_empty(&uuis)? {
                println!("fixture loaded; every seeded user's password is {SEED_PASSWORD:?}");
                Ok(true)
            } else {
                eprintln!("store {} is not empty; refusing to seed", cfg.store.display());
                Ok(false)
            }
        }
        Command::Bulkload { file, user, update } => {
            let uuis = open(&cfg)?;
            bulkload(&uuis, &file, &user, update)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
