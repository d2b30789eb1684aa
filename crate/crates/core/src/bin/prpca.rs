fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(prpca::cli::LOG_ENV, "warn")).init();
    std::process::exit(prpca::cli::run_cli(std::env::args_os()));
}
