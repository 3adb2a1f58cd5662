fn main() {
    std::process::exit(fkwave_cli::run(std::env::args_os()));
}
