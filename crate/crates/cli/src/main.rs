fn main() {
    std::process::exit(gafhole_cli::run(std::env::args_os()));
}
