fn main() {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).format_timestamp(None).init();
    std::process::exit(credence::cli::run(std::env::args_os()));
}
