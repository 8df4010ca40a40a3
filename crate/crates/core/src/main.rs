fn main() {
    env_logger::init();
    std::process::exit(hsfm::cli::run(std::env::args_os()));
}
