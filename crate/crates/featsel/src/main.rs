fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init()
        .ok();
    let code = featsel::cli::cli_main(std::env::args().collect());
    std::process::exit(code);
}
