fn main() {
    env_logger::init();
    std::process::exit(momentvv::cli::main_with_args(std::env::args_os()));
}
