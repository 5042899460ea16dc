//! Run the HTTP scoring service in-process until ctrl-c.
//!
//! cargo run --release --example serve_model -- MODEL [BIND]
//!
//! Then:
//!   curl localhost:8080/api/v1/health
//!   curl -F image=@trace.png localhost:8080/api/v1/predict

use handscreen::service::{serve, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let Some(model) = args.next() else {
        eprintln!("usage: serve_model MODEL [BIND]");
        std::process::exit(2);
    };
    let mut cfg = ServiceConfig::new(model);
    if let Some(bind) = args.next() {
        cfg.bind = bind.parse()?;
    }
    let stop = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    serve(&cfg, stop, |addr| println!("listening on http://{addr}")).await?;
    Ok(())
}
