fn main() {
    std::process::exit(wnet_cli::run(std::env::args_os()));
}
