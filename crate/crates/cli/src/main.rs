fn main() {
    std::process::exit(rvfield_cli::run(std::env::args_os()));
}
